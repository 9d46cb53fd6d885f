#pragma once

// Multi-teacher, single-student distillation.
//
//  1. One teacher per vertical, trained on that vertical's samples against
//     smeared labels over the vertical's subtree.
//  2. Each training sample is routed to the teacher of its groundtruth
//     vertical; the teacher's top-K leaf probabilities become the sample's
//     soft targets and every other class is 0.
//  3. One student over all leaves is trained on those targets with the same
//     sigmoid cross-entropy. Teachers stay frozen.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kc/checkpoint.hpp"
#include "kc/dataset.hpp"
#include "kc/error.hpp"
#include "kc/evaluation.hpp"
#include "kc/io.hpp"
#include "kc/losses.hpp"
#include "kc/model.hpp"
#include "kc/rng.hpp"
#include "kc/taxonomy.hpp"

namespace kc {

struct TrainConfig {
  std::size_t top_k = 100;
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  double adagrad_eps = 1e-8;
  double adagrad_init = 0.1;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  // Swap the groundtruth leaf into the top-K when the teacher ranks it lower.
  bool force_groundtruth = false;

  void validate() const {
    if (top_k == 0) throw ValidationError("train: k must be >= 1");
    if (batch_size == 0) throw ValidationError("train: batch size must be >= 1");
    if (epochs == 0) throw ValidationError("train: epochs must be >= 1");
    if (!(learning_rate >= 0.0)) {
      throw ValidationError("train: learning rate must be non-negative");
    }
    if (!(adagrad_init >= 0.0)) {
      throw ValidationError("train: adagrad_init must be non-negative");
    }
  }
};

// Layer sizes and head for a model whose class counts come from the data.
struct NetConfig {
  Topology topology = Topology::kFcFc;
  std::size_t base_hidden = 32;
  std::size_t base_size = 16;
  std::size_t top1_size = 32;
  std::size_t top2_size = 16;
  std::size_t generic_size = 0;
  bool use_bias = false;
  HeadSpec head;

  ArchSpec arch(std::size_t input_dim,
                std::vector<std::size_t> class_counts) const {
    ArchSpec a;
    a.topology = topology;
    a.input_dim = input_dim;
    a.base_hidden = base_hidden;
    a.base_size = base_size;
    a.top1_size = top1_size;
    a.top2_size = top2_size;
    a.generic_size = generic_size;
    a.num_classes = std::accumulate(class_counts.begin(), class_counts.end(),
                                    std::size_t{0});
    a.class_counts = std::move(class_counts);
    a.use_bias = use_bias;
    return a;
  }
};

struct TrainedModel {
  Model model;
  std::vector<double> losses;  // one per optimizer step
};

// Mini-batch Adagrad on sigmoid cross-entropy. `targets` is row-major
// [inputs.rows() x num_classes]. Batches follow a per-epoch shuffle drawn
// from `shuffle_seed`; the last batch of an epoch may be short.
// `on_epoch`, if set, sees the epoch index and that epoch's step losses.
using EpochHook = std::function<void(std::size_t, std::span<const double>)>;

inline std::vector<double> fit(Model& model, const Tensor& inputs,
                               const std::vector<double>& targets,
                               const TrainConfig& cfg,
                               std::uint64_t shuffle_seed,
                               const EpochHook& on_epoch = {}) {
  cfg.validate();
  const std::size_t n = inputs.rows(), d = inputs.cols();
  const std::size_t C = model.spec().num_classes;
  if (targets.size() != n * C) {
    throw DimensionError("fit: targets have " + std::to_string(targets.size()) +
                         " values, expected " + std::to_string(n * C));
  }
  Rng rng(shuffle_seed);
  Adagrad opt(cfg.learning_rate, cfg.adagrad_eps, cfg.adagrad_init);
  auto params = model.trainable();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> losses;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::size_t first = losses.size();
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, n - start);
      std::vector<double> x(b * d), t(b * C);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t r = order[start + i];
        std::copy_n(inputs.data().begin() + r * d, d, x.begin() + i * d);
        std::copy_n(targets.begin() + r * C, C, t.begin() + i * C);
      }
      model.zero_grad();
      Tensor loss = sigmoid_ce_loss(
          model.logits(Tensor::from({b, d}, std::move(x))),
          Tensor::from({b, C}, std::move(t)));
      backward(loss);
      opt.step(params);
      losses.push_back(loss.item());
    }
    if (on_epoch) {
      on_epoch(epoch, std::span<const double>(losses).subspan(first));
    }
  }
  return losses;
}

struct Teacher {
  LabelId vertical = 0;
  std::vector<LabelId> labels;  // output column -> subtree label id
  Model model;
};

inline nlohmann::json teacher_meta(const Teacher& t) {
  return {{"role", "teacher"}, {"vertical", t.vertical}, {"labels", t.labels}};
}

inline Teacher teacher_from_checkpoint(LoadedCheckpoint ckpt) {
  try {
    if (ckpt.meta.at("role").get<std::string>() != "teacher") {
      throw FormatError("checkpoint is not a teacher");
    }
    Teacher t{ckpt.meta.at("vertical").get<LabelId>(),
              ckpt.meta.at("labels").get<std::vector<LabelId>>(),
              std::move(ckpt.model)};
    if (t.labels.size() != t.model.spec().num_classes) {
      throw FormatError("teacher checkpoint: label list does not match width");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("teacher checkpoint meta: ") + e.what());
  }
}

struct TeacherResult {
  Teacher teacher;
  std::vector<double> losses;
};

// Trains the specialist for `vertical` on the training samples it owns.
// Its label space is the vertical's whole subtree; targets are leaf labels
// smeared up to (and including) the vertical root.
inline TeacherResult train_teacher(const LabelTaxonomy& tax, const Dataset& data,
                                   LabelId vertical, const NetConfig& net,
                                   const TrainConfig& cfg,
                                   const EpochHook& on_epoch = {}) {
  cfg.validate();
  if (!tax.contains(vertical) || !tax.node(vertical).is_vertical_root) {
    throw LookupError("train_teacher: " + std::to_string(vertical) +
                      " is not a vertical root");
  }
  std::vector<const SampleRecord*> rows;
  for (const auto* s : data.subset(Split::kTrain))
    if (f_map(tax, s->label) == vertical) rows.push_back(s);
  if (rows.empty()) {
    throw NoDataError("train_teacher: no training samples for vertical " +
                      std::to_string(vertical));
  }
  Teacher t;
  t.vertical = vertical;
  t.labels = tax.subtree(vertical);
  const std::size_t C = t.labels.size();
  std::map<LabelId, std::size_t> col;
  for (std::size_t i = 0; i < C; ++i) col[t.labels[i]] = i;
  std::vector<double> targets(rows.size() * C, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (LabelId p : smear(tax, rows[r]->label, SmearScope::kWithinVertical).positives)
      targets[r * C + col.at(p)] = 1.0;

  t.model = build_model(net.arch(data.input_dim, {C}), net.head,
                        derive_seed(cfg.seed, "init"));
  auto losses = fit(t.model, feature_matrix(rows, data.input_dim), targets, cfg,
                    derive_seed(cfg.seed, "shuffle"), on_epoch);
  return {std::move(t), std::move(losses)};
}

struct SoftTargetRecord {
  std::uint64_t sample_id = 0;
  LabelId vertical = 0;
  std::vector<std::pair<LabelId, double>> targets;  // descending probability

  bool operator==(const SoftTargetRecord&) const = default;
};

inline const Teacher& route(std::span<const Teacher> teachers, LabelId vertical) {
  for (const auto& t : teachers)
    if (t.vertical == vertical) return t;
  throw RoutingError("no teacher for vertical " + std::to_string(vertical));
}

// Largest-K (class, probability) pairs; ties go to the smaller class id.
inline std::vector<std::pair<LabelId, double>> top_k(
    std::vector<std::pair<LabelId, double>> probs, std::size_t k) {
  std::sort(probs.begin(), probs.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (probs.size() > k) probs.resize(k);
  return probs;
}

inline std::vector<SoftTargetRecord> generate_soft_targets(
    const LabelTaxonomy& tax, const Dataset& data,
    std::span<const Teacher> teachers, std::size_t k,
    bool force_groundtruth = false, Split split = Split::kTrain) {
  if (k == 0) throw ValidationError("generate_soft_targets: k must be >= 1");
  const auto samples = data.subset(split);
  std::map<LabelId, std::vector<const SampleRecord*>> by_vertical;
  for (const auto* s : samples) by_vertical[f_map(tax, s->label)].push_back(s);

  std::vector<SoftTargetRecord> out;
  out.reserve(samples.size());
  for (const auto& [vertical, rows] : by_vertical) {
    const Teacher& t = route(teachers, vertical);
    const Tensor probs = sigmoid(t.model.logits(feature_matrix(rows, data.input_dim)));
    const std::size_t C = t.labels.size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::vector<std::pair<LabelId, double>> leaf_probs;
      for (std::size_t c = 0; c < C; ++c)
        if (tax.is_leaf(t.labels[c])) leaf_probs.emplace_back(t.labels[c], probs.at(r, c));
      auto kept = top_k(leaf_probs, k);
      const LabelId gt = rows[r]->label;
      if (force_groundtruth &&
          std::none_of(kept.begin(), kept.end(), [&](auto& e) { return e.first == gt; })) {
        auto it = std::find_if(leaf_probs.begin(), leaf_probs.end(),
                               [&](auto& e) { return e.first == gt; });
        kept.back() = *it;
      }
      out.push_back({rows[r]->sample_id, vertical, std::move(kept)});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
  return out;
}

// {"sample_id":5,"vertical_id":1,"targets":[[7,0.93000000000000005],...]}
// Probabilities use 17 significant digits so they read back bit-exact.
inline void write_soft_targets(std::ostream& os,
                               std::span<const SoftTargetRecord> records) {
  for (const auto& r : records) {
    os << "{\"sample_id\":" << r.sample_id << ",\"vertical_id\":" << r.vertical
       << ",\"targets\":[";
    for (std::size_t i = 0; i < r.targets.size(); ++i) {
      if (i) os << ',';
      os << '[' << r.targets[i].first << ',' << format_double(r.targets[i].second)
         << ']';
    }
    os << "]}\n";
  }
}

inline std::vector<SoftTargetRecord> read_soft_targets(std::istream& is) {
  std::vector<SoftTargetRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SoftTargetRecord r;
      r.sample_id = j.at("sample_id").get<std::uint64_t>();
      r.vertical = j.at("vertical_id").get<LabelId>();
      for (const auto& e : j.at("targets"))
        r.targets.emplace_back(e.at(0).get<LabelId>(), e.at(1).get<double>());
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("soft targets line " + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  return out;
}

// Dense target row in student column order; classes absent from the record
// are 0. Values are copied, never renormalized.
inline std::vector<double> densify(const SoftTargetRecord& r,
                                   const ClassLayout& layout) {
  std::vector<double> row(layout.num_classes(), 0.0);
  for (const auto& [cls, p] : r.targets) {
    if (!(p > 0.0 && p <= 1.0)) {
      throw ValidationError("soft target for sample " + std::to_string(r.sample_id) +
                            " has probability outside (0,1]");
    }
    row[layout.column_of(cls)] = p;
  }
  return row;
}

inline TrainedModel train_student(const LabelTaxonomy& tax, const Dataset& data,
                                  std::span<const SoftTargetRecord> soft_targets,
                                  const NetConfig& net, const TrainConfig& cfg,
                                  const EpochHook& on_epoch = {}) {
  cfg.validate();
  const ClassLayout layout = class_layout(tax);
  const auto rows = data.subset(Split::kTrain);
  if (rows.empty()) throw NoDataError("train_student: no training samples");
  std::map<std::uint64_t, const SoftTargetRecord*> by_id;
  for (const auto& r : soft_targets) by_id[r.sample_id] = &r;
  std::vector<std::uint64_t> missing;
  for (const auto* s : rows)
    if (!by_id.count(s->sample_id)) missing.push_back(s->sample_id);
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i)
      ids += (i ? "," : "") + std::to_string(missing[i]);
    if (missing.size() > 20) ids += ",...";
    throw MissingTargetsError("train_student: " + std::to_string(missing.size()) +
                              " training samples lack soft targets: " + ids);
  }
  const std::size_t C = layout.num_classes();
  std::vector<double> targets;
  targets.reserve(rows.size() * C);
  for (const auto* s : rows) {
    const auto row = densify(*by_id.at(s->sample_id), layout);
    targets.insert(targets.end(), row.begin(), row.end());
  }
  TrainedModel out{build_model(net.arch(data.input_dim, layout.class_counts()),
                               net.head, derive_seed(cfg.seed, "init")),
                   {}};
  out.losses = fit(out.model, feature_matrix(rows, data.input_dim), targets, cfg,
                   derive_seed(cfg.seed, "shuffle"), on_epoch);
  return out;
}

// Standard training: one-hot leaf labels, no smearing, no teachers.
inline TrainedModel train_generalist_baseline(const LabelTaxonomy& tax,
                                              const Dataset& data,
                                              const NetConfig& net,
                                              const TrainConfig& cfg,
                                              const EpochHook& on_epoch = {}) {
  cfg.validate();
  const ClassLayout layout = class_layout(tax);
  const auto rows = data.subset(Split::kTrain);
  if (rows.empty()) throw NoDataError("train_generalist_baseline: no training samples");
  const std::size_t C = layout.num_classes();
  std::vector<double> targets(rows.size() * C, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r)
    targets[r * C + layout.column_of(rows[r]->label)] = 1.0;
  TrainedModel out{build_model(net.arch(data.input_dim, layout.class_counts()),
                               net.head, derive_seed(cfg.seed, "init")),
                   {}};
  out.losses = fit(out.model, feature_matrix(rows, data.input_dim), targets, cfg,
                   derive_seed(cfg.seed, "shuffle"), on_epoch);
  return out;
}

// Scores of a model over all leaf classes, in the model's column order.
inline Predictions predict(const Model& model, const ClassLayout& layout,
                           const Dataset& data, Split split = Split::kTest) {
  const auto rows = data.subset(split);
  if (rows.empty()) throw NoDataError("predict: no samples in split");
  Predictions p;
  for (const auto* s : rows) {
    p.sample_ids.push_back(s->sample_id);
    p.labels.push_back(s->label);
  }
  p.class_ids = layout.column_label;
  const Tensor logits = model.logits(feature_matrix(rows, data.input_dim));
  p.scores.assign(logits.data().begin(), logits.data().end());
  return p;
}

// Each sample is scored by the teacher of its groundtruth vertical; columns
// of other verticals hold the lowest double and are never read by pvap.
inline Predictions predict_specialists(std::span<const Teacher> teachers,
                                       const LabelTaxonomy& tax,
                                       const Dataset& data,
                                       Split split = Split::kTest) {
  const ClassLayout layout = class_layout(tax);
  const auto rows = data.subset(split);
  if (rows.empty()) throw NoDataError("predict_specialists: no samples in split");
  Predictions p;
  p.class_ids = layout.column_label;
  const std::size_t C = layout.num_classes();
  p.scores.assign(rows.size() * C, std::numeric_limits<double>::lowest());
  std::map<LabelId, std::vector<std::size_t>> by_vertical;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    p.sample_ids.push_back(rows[r]->sample_id);
    p.labels.push_back(rows[r]->label);
    by_vertical[f_map(tax, rows[r]->label)].push_back(r);
  }
  for (const auto& [vertical, idx] : by_vertical) {
    const Teacher& t = route(teachers, vertical);
    std::vector<const SampleRecord*> sub;
    for (auto r : idx) sub.push_back(rows[r]);
    const Tensor logits = t.model.logits(feature_matrix(sub, data.input_dim));
    for (std::size_t c = 0; c < t.labels.size(); ++c) {
      if (!tax.is_leaf(t.labels[c])) continue;
      const std::size_t col = layout.column_of(t.labels[c]);
      for (std::size_t i = 0; i < idx.size(); ++i)
        p.scores[idx[i] * C + col] = logits.at(i, c);
    }
  }
  return p;
}

}  // namespace kc
