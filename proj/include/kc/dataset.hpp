#pragma once

// Feature-vector datasets and the synthetic hierarchical generator.
//
// The generator builds root -> vertical -> group -> leaf. Every leaf owns a
// few Gaussian modes in feature space. Leaves of one vertical share the
// vertical's center, and `confusability` pulls their modes toward it, so
// raising it makes classes inside a vertical harder to tell apart while
// verticals stay well separated.

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "kc/error.hpp"
#include "kc/rng.hpp"
#include "kc/taxonomy.hpp"
#include "kc/tensor.hpp"

namespace kc {

enum class Split { kTrain, kTest };

inline std::string_view split_name(Split s) {
  return s == Split::kTrain ? "train" : "test";
}

struct SampleRecord {
  std::uint64_t sample_id = 0;
  std::vector<double> features;
  LabelId label = 0;
  Split split = Split::kTrain;

  bool operator==(const SampleRecord&) const = default;
};

struct Dataset {
  std::size_t input_dim = 0;
  std::vector<SampleRecord> samples;

  std::vector<const SampleRecord*> subset(Split split) const {
    std::vector<const SampleRecord*> out;
    for (const auto& s : samples)
      if (s.split == split) out.push_back(&s);
    return out;
  }

  void validate(const LabelTaxonomy& tax) const {
    for (const auto& s : samples) {
      if (s.features.size() != input_dim) {
        throw ValidationError("dataset: sample " + std::to_string(s.sample_id) +
                              " has " + std::to_string(s.features.size()) +
                              " features, expected " + std::to_string(input_dim));
      }
      if (!tax.contains(s.label) || !tax.is_leaf(s.label)) {
        throw ValidationError("dataset: sample " + std::to_string(s.sample_id) +
                              " has label " + std::to_string(s.label) +
                              " which is not a taxonomy leaf");
      }
    }
  }
};

// Stacks the feature vectors of `rows` into a [rows x input_dim] tensor.
inline Tensor feature_matrix(std::span<const SampleRecord* const> rows,
                             std::size_t input_dim) {
  std::vector<double> data;
  data.reserve(rows.size() * input_dim);
  for (const auto* s : rows)
    data.insert(data.end(), s->features.begin(), s->features.end());
  return Tensor::from({rows.size(), input_dim}, std::move(data));
}

inline void write_dataset(std::ostream& os, const Dataset& ds) {
  for (const auto& s : ds.samples) {
    nlohmann::ordered_json j;
    j["sample_id"] = s.sample_id;
    j["split"] = split_name(s.split);
    j["label_id"] = s.label;
    j["features"] = s.features;
    os << j.dump() << '\n';
  }
}

inline Dataset read_dataset(std::istream& is) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SampleRecord s;
      s.sample_id = j.at("sample_id").get<std::uint64_t>();
      const auto split = j.at("split").get<std::string>();
      if (split == "train") {
        s.split = Split::kTrain;
      } else if (split == "test") {
        s.split = Split::kTest;
      } else {
        throw FormatError("dataset line " + std::to_string(lineno) +
                          ": unknown split '" + split + "'");
      }
      s.label = j.at("label_id").get<LabelId>();
      s.features = j.at("features").get<std::vector<double>>();
      if (ds.samples.empty()) ds.input_dim = s.features.size();
      ds.samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("dataset line " + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  return ds;
}

struct SyntheticConfig {
  std::size_t num_verticals = 4;
  std::size_t leaves_per_vertical = 25;
  // Leaves per vertical when they differ; overrides the two counts above.
  std::vector<std::size_t> vertical_sizes;
  std::size_t groups_per_vertical = 5;  // 0 puts leaves directly under verticals
  std::size_t input_dim = 32;
  std::size_t train_per_class = 40;
  std::size_t test_per_class = 10;
  std::size_t modes_per_class = 2;
  double confusability = 0.7;
  std::uint64_t seed = 1;

  // Spread of vertical centers, leaf modes and per-sample noise.
  double vertical_scale = 3.0;
  double class_scale = 2.0;
  double mode_scale = 1.0;
  double noise_scale = 0.5;

  std::vector<std::size_t> sizes() const {
    if (!vertical_sizes.empty()) return vertical_sizes;
    return std::vector<std::size_t>(num_verticals, leaves_per_vertical);
  }

  void validate() const {
    const auto vs = sizes();
    if (vs.empty() || input_dim == 0 || train_per_class == 0 ||
        test_per_class == 0 || modes_per_class == 0) {
      throw ValidationError("synthetic: sizes must be positive");
    }
    for (auto n : vs) {
      if (n == 0) throw ValidationError("synthetic: sizes must be positive");
      if (groups_per_vertical > n) {
        throw ValidationError("synthetic: more groups than leaves in a vertical");
      }
    }
    if (!(confusability >= 0.0 && confusability <= 1.0)) {
      throw ValidationError("synthetic: confusability must lie in [0,1]");
    }
    if (!(vertical_scale >= 0 && class_scale >= 0 && mode_scale >= 0 &&
          noise_scale >= 0)) {
      throw ValidationError("synthetic: scales must be non-negative");
    }
  }
};

struct SyntheticData {
  LabelTaxonomy taxonomy;
  Dataset dataset;
};

inline SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const auto sizes = cfg.sizes();
  const std::size_t M = sizes.size(), G = cfg.groups_per_vertical,
                    D = cfg.input_dim;

  std::vector<LabelNode> nodes;
  LabelId next = 0;
  nodes.push_back({next++, "root", std::nullopt, false});
  std::vector<LabelId> vertical_ids;
  for (std::size_t v = 0; v < M; ++v) {
    vertical_ids.push_back(next);
    nodes.push_back({next++, "vertical_" + std::to_string(v), LabelId{0}, true});
  }
  struct LeafInfo {
    LabelId id;
    std::size_t vertical;
    std::size_t group;
  };
  std::vector<LeafInfo> leaves;
  for (std::size_t v = 0; v < M; ++v) {
    std::vector<LabelId> group_ids;
    for (std::size_t g = 0; g < G; ++g) {
      group_ids.push_back(next);
      nodes.push_back({next++,
                       "v" + std::to_string(v) + "_group" + std::to_string(g),
                       vertical_ids[v], false});
    }
    const std::size_t L = sizes[v];
    for (std::size_t l = 0; l < L; ++l) {
      // Contiguous chunks of leaves per group.
      const std::size_t g = G ? l * G / L : 0;
      const LabelId parent = G ? group_ids[g] : vertical_ids[v];
      leaves.push_back({next, v, g});
      nodes.push_back({next++,
                       "v" + std::to_string(v) + "_leaf" + std::to_string(l),
                       parent, false});
    }
  }

  auto gaussian_vector = [D](Rng& rng, double scale) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(D);
    for (auto& x : v) x = scale * dist(rng);
    return v;
  };

  Rng center_rng(derive_seed(cfg.seed, "synthetic/centers"));
  std::vector<std::vector<double>> vertical_centers;
  for (std::size_t v = 0; v < M; ++v)
    vertical_centers.push_back(gaussian_vector(center_rng, cfg.vertical_scale));
  std::vector<std::vector<std::vector<double>>> group_centers(M);
  for (std::size_t v = 0; v < M; ++v)
    for (std::size_t g = 0; g < std::max<std::size_t>(G, 1); ++g)
      group_centers[v].push_back(gaussian_vector(center_rng, cfg.class_scale));

  const double spread = 1.0 - cfg.confusability;
  Dataset ds;
  ds.input_dim = D;
  std::uint64_t sample_id = 0;
  for (const auto& leaf : leaves) {
    Rng rng(derive_seed(cfg.seed, "synthetic/class/" + std::to_string(leaf.id)));
    // Leaf offset: half from its group, half its own, both shrunk by
    // confusability.
    const auto own = gaussian_vector(rng, cfg.class_scale);
    std::vector<std::vector<double>> modes;
    for (std::size_t k = 0; k < cfg.modes_per_class; ++k) {
      auto mode = gaussian_vector(rng, cfg.mode_scale);
      for (std::size_t d = 0; d < D; ++d) {
        const double offset =
            0.5 * group_centers[leaf.vertical][leaf.group][d] + own[d];
        mode[d] = vertical_centers[leaf.vertical][d] +
                  spread * (offset + mode[d]);
      }
      modes.push_back(std::move(mode));
    }
    std::uniform_int_distribution<std::size_t> pick(0, modes.size() - 1);
    auto emit = [&](Split split) {
      const auto& mode = modes[pick(rng)];
      auto f = gaussian_vector(rng, cfg.noise_scale);
      for (std::size_t d = 0; d < D; ++d) f[d] += mode[d];
      ds.samples.push_back({sample_id++, std::move(f), leaf.id, split});
    };
    for (std::size_t i = 0; i < cfg.train_per_class; ++i) emit(Split::kTrain);
    for (std::size_t i = 0; i < cfg.test_per_class; ++i) emit(Split::kTest);
  }
  return {LabelTaxonomy(std::move(nodes)), std::move(ds)};
}

}  // namespace kc
