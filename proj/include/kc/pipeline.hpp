#pragma once

// Glue shared by the CLI subcommands and the benchmark: seed derivation,
// artifact paths, and loading/saving of the intermediate files.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kc/checkpoint.hpp"
#include "kc/config.hpp"
#include "kc/dataset.hpp"
#include "kc/distillation.hpp"
#include "kc/io.hpp"
#include "kc/rng.hpp"
#include "kc/taxonomy.hpp"

namespace kc {

namespace fs = std::filesystem;

// Every stage draws from its own stream derived from the root seed, so a
// stage can be rerun alone and still match the full pipeline.
inline SyntheticConfig data_config(const RunConfig& c) {
  SyntheticConfig d = c.data;
  d.seed = derive_seed(c.seed, "data");
  return d;
}

inline TrainConfig teacher_train_config(const RunConfig& c, LabelId vertical) {
  TrainConfig t = c.teacher_train;
  t.seed = derive_seed(c.seed, "teacher/" + std::to_string(vertical));
  return t;
}

// All students share one stream: arms differ only in what they are
// configured to differ in.
inline TrainConfig student_train_config(const RunConfig& c) {
  TrainConfig t = c.train;
  t.seed = derive_seed(c.seed, "student");
  return t;
}

inline fs::path teacher_path(const fs::path& dir, LabelId vertical) {
  return dir / ("vertical_" + std::to_string(vertical) + ".ckpt");
}

inline void save_taxonomy(const fs::path& path, const LabelTaxonomy& tax) {
  std::ostringstream os;
  write_taxonomy(os, tax);
  write_file_atomic(path, os.str());
}

inline LabelTaxonomy load_taxonomy(const fs::path& path) {
  std::istringstream is(read_file(path));
  return read_taxonomy(is);
}

inline void save_dataset(const fs::path& path, const Dataset& data) {
  std::ostringstream os;
  write_dataset(os, data);
  write_file_atomic(path, os.str());
}

inline Dataset load_dataset(const fs::path& path) {
  std::istringstream is(read_file(path));
  return read_dataset(is);
}

inline void save_soft_targets(const fs::path& path,
                              std::span<const SoftTargetRecord> recs) {
  std::ostringstream os;
  write_soft_targets(os, recs);
  write_file_atomic(path, os.str());
}

inline std::vector<SoftTargetRecord> load_soft_targets(const fs::path& path) {
  std::istringstream is(read_file(path));
  return read_soft_targets(is);
}

// One teacher per vertical root, in vertical order. A missing file is a
// routing error naming the vertical.
inline std::vector<Teacher> load_teachers(const fs::path& dir,
                                          const LabelTaxonomy& tax) {
  std::vector<Teacher> out;
  for (LabelId v : tax.vertical_roots()) {
    const auto path = teacher_path(dir, v);
    if (!fs::exists(path)) {
      throw RoutingError("no teacher checkpoint for vertical " +
                         std::to_string(v) + " (" + path.string() + ")");
    }
    Teacher t = teacher_from_checkpoint(load_checkpoint(path));
    if (t.vertical != v) {
      throw FormatError(path.string() + " holds the teacher of vertical " +
                        std::to_string(t.vertical));
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline std::size_t steps_per_epoch(std::size_t samples, std::size_t batch) {
  return (samples + batch - 1) / batch;
}

// Mean step loss over the last epoch.
inline double final_loss(std::span<const double> losses, std::size_t per_epoch) {
  if (losses.empty() || per_epoch == 0) throw ContractError("final_loss: no steps");
  const std::size_t n = std::min(per_epoch, losses.size());
  double total = 0.0;
  for (std::size_t i = losses.size() - n; i < losses.size(); ++i) total += losses[i];
  return total / static_cast<double>(n);
}

}  // namespace kc
