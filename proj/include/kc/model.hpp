#pragma once

// Base feature extractor, the four top-layer structures and the self-paced
// scaling head.
//
// Logit columns are grouped by vertical (see ClassLayout), so vertical v
// owns columns segments()[v]. In the SC structures vertical v's logits are
// computed only from its own top-2 block (and, for SC-SC, its own top-1
// block). FC-SC-generic concatenates one shared x-wide top-2 slice in front
// of each vertical's (s2 - x)-wide individual slice before the logit
// projection.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "kc/error.hpp"
#include "kc/param_budget.hpp"
#include "kc/rng.hpp"
#include "kc/tensor.hpp"

namespace kc {

struct ArchSpec {
  Topology topology = Topology::kFcFc;
  std::size_t input_dim = 0;    // raw feature width fed to the extractor
  std::size_t base_hidden = 0;  // hidden width inside the extractor
  std::size_t base_size = 0;    // s_b
  std::size_t top1_size = 0;    // s1 / s1s / s1i
  std::size_t top2_size = 0;    // s2
  std::size_t generic_size = 0; // x
  std::size_t num_classes = 0;  // N
  std::vector<std::size_t> class_counts;  // N_v, one per vertical
  bool use_bias = false;

  std::size_t num_verticals() const { return class_counts.size(); }

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) {
        throw ValidationError(std::string("arch: ") + name +
                              " must be positive");
      }
    };
    positive(input_dim, "input_dim");
    positive(base_hidden, "base_hidden");
    positive(base_size, "base_size");
    positive(top1_size, "top1_size");
    positive(top2_size, "top2_size");
    if (class_counts.empty()) {
      throw ValidationError("arch: at least one vertical is required");
    }
    std::size_t total = 0;
    for (auto n : class_counts) {
      positive(n, "vertical class count");
      total += n;
    }
    if (total != num_classes) {
      throw ValidationError("arch: vertical class counts sum to " +
                            std::to_string(total) + " but num_classes is " +
                            std::to_string(num_classes));
    }
    if (generic_size > top2_size) {
      throw ValidationError("arch: generic_size " +
                            std::to_string(generic_size) +
                            " exceeds top2_size " + std::to_string(top2_size));
    }
    if (generic_size != 0 && topology != Topology::kFcScGeneric) {
      throw ValidationError("arch: generic_size needs fc-sc-generic");
    }
  }

  BudgetInput budget_input() const {
    return {topology,  num_classes, num_verticals(), base_size,
            top1_size, top2_size,   generic_size};
  }
};

enum class ScaleMode { kNone, kVertical, kClass };

inline std::string_view scale_mode_name(ScaleMode m) {
  switch (m) {
    case ScaleMode::kNone: return "none";
    case ScaleMode::kVertical: return "vertical";
    case ScaleMode::kClass: return "class";
  }
  return "?";
}

inline ScaleMode parse_scale_mode(std::string_view s) {
  for (auto m : {ScaleMode::kNone, ScaleMode::kVertical, ScaleMode::kClass})
    if (scale_mode_name(m) == s) return m;
  throw ValidationError("unknown self-paced mode '" + std::string(s) + "'");
}

struct GammaInit {
  enum class Kind { kSqrtNv, kConstant };
  Kind kind = Kind::kSqrtNv;
  double value = 0.0;  // mean for kConstant
  double dev = 1e-3;

  std::string to_string() const {
    if (kind == Kind::kSqrtNv) return "sqrt-nv";
    char buf[64];
    std::snprintf(buf, sizeof buf, "const:%.17g", value);
    return buf;
  }

  static GammaInit parse(std::string_view s) {
    if (s == "sqrt-nv") return {};
    if (s.substr(0, 6) == "const:") {
      GammaInit g;
      g.kind = Kind::kConstant;
      const std::string num(s.substr(6));
      char* end = nullptr;
      g.value = std::strtod(num.c_str(), &end);
      if (num.empty() || *end != '\0') {
        throw ValidationError("bad gamma init '" + std::string(s) + "'");
      }
      return g;
    }
    throw ValidationError("bad gamma init '" + std::string(s) +
                          "', expected sqrt-nv or const:<v>");
  }
};

struct HeadSpec {
  ScaleMode mode = ScaleMode::kNone;
  GammaInit init;
  bool trainable = true;
};

enum class ParamRole { kBase, kTopWeight, kBias, kGamma };

struct NamedTensor {
  std::string name;
  Tensor tensor;
  ParamRole role = ParamRole::kBase;
};

class Model {
 public:
  const ArchSpec& spec() const { return spec_; }
  const HeadSpec& head() const { return head_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Segment>& segments() const { return segments_; }

  // Stable order: extractor, top-1, top-2, logit projection, gamma.
  const std::vector<NamedTensor>& parameters() const { return params_; }
  std::vector<NamedTensor>& parameters() { return params_; }

  const Tensor& param(std::string_view name) const {
    for (const auto& p : params_)
      if (p.name == name) return p.tensor;
    throw LookupError("model: no parameter named '" + std::string(name) + "'");
  }

  std::vector<Tensor> trainable() const {
    std::vector<Tensor> out;
    for (const auto& p : params_)
      if (p.tensor.requires_grad()) out.push_back(p.tensor);
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  // Weights of the top-1, top-2 and logit layers; biases excluded.
  std::size_t top_layer_weight_count() const {
    std::size_t n = 0;
    for (const auto& p : params_)
      if (p.role == ParamRole::kTopWeight) n += p.tensor.size();
    return n;
  }

  // raw[batch x input_dim] -> features[batch x s_b]; two sigmoid layers.
  Tensor base_extract(const Tensor& raw) const {
    if (raw.rank() != 2 || raw.cols() != spec_.input_dim) {
      throw DimensionError("base_extract: expected [batch x " +
                           std::to_string(spec_.input_dim) + "], got " +
                           shape_string(raw.shape()));
    }
    Tensor h = sigmoid(add_row_vector(matmul(raw, param("base.w1")),
                                      param("base.b1")));
    return sigmoid(add_row_vector(matmul(h, param("base.w2")),
                                  param("base.b2")));
  }

  // features[batch x s_b] -> logits[batch x N], head applied.
  Tensor forward(const Tensor& features) const {
    if (features.rank() != 2 || features.cols() != spec_.base_size) {
      throw DimensionError("forward: expected [batch x " +
                           std::to_string(spec_.base_size) + "], got " +
                           shape_string(features.shape()));
    }
    return apply_head(top_logits(features));
  }

  Tensor logits(const Tensor& raw) const { return forward(base_extract(raw)); }

  // Raw top-layer logits before the head.
  Tensor top_logits(const Tensor& f) const {
    const std::size_t M = spec_.num_verticals();
    switch (spec_.topology) {
      case Topology::kFcFc: {
        Tensor h1 = dense(f, "top1", true);
        Tensor h2 = dense(h1, "top2", true);
        return dense(h2, "logit", false);
      }
      case Topology::kFcSc:
      case Topology::kFcScGeneric: {
        Tensor h1 = dense(f, "top1", true);
        const std::size_t x = spec_.generic_size;
        Tensor generic;
        if (x > 0) generic = dense(h1, "top2.generic", true);
        std::vector<Tensor> blocks;
        for (std::size_t v = 0; v < M; ++v) {
          const std::string vs = std::to_string(v);
          Tensor h2;
          if (x == 0) {
            h2 = dense(h1, "top2.v" + vs, true);
          } else if (x == spec_.top2_size) {
            h2 = generic;
          } else {
            h2 = concat_cols({generic, dense(h1, "top2.v" + vs, true)});
          }
          blocks.push_back(dense(h2, "logit.v" + vs, false));
        }
        return M == 1 ? blocks[0] : concat_cols(blocks);
      }
      case Topology::kScSc: {
        std::vector<Tensor> blocks;
        for (std::size_t v = 0; v < M; ++v) {
          const std::string vs = std::to_string(v);
          Tensor h1 = dense(f, "top1.v" + vs, true);
          Tensor h2 = dense(h1, "top2.v" + vs, true);
          blocks.push_back(dense(h2, "logit.v" + vs, false));
        }
        return M == 1 ? blocks[0] : concat_cols(blocks);
      }
    }
    throw ContractError("unknown topology");
  }

  Tensor apply_head(const Tensor& logits) const {
    if (head_.mode == ScaleMode::kNone) return logits;
    Tensor normalized = l2_normalize_segments(logits, segments_);
    std::vector<std::size_t> index(spec_.num_classes);
    for (std::size_t v = 0; v < segments_.size(); ++v)
      for (std::size_t c = segments_[v].begin; c < segments_[v].end; ++c)
        index[c] = head_.mode == ScaleMode::kVertical ? v : c;
    return scale_columns(normalized, param("head.gamma"), std::move(index));
  }

 private:
  friend Model build_model(const ArchSpec&, const HeadSpec&, std::uint64_t);

  Tensor dense(const Tensor& in, const std::string& name, bool act) const {
    Tensor out = matmul(in, param(name + ".w"));
    if (spec_.use_bias) out = add_row_vector(out, param(name + ".b"));
    return act ? sigmoid(out) : out;
  }

  ArchSpec spec_;
  HeadSpec head_;
  std::uint64_t seed_ = 0;
  std::vector<Segment> segments_;
  std::vector<NamedTensor> params_;
};

namespace detail {

// Uniform on [-a, a] with a = sqrt(6 / (fan_in + fan_out)), i.e. variance
// 2 / (fan_in + fan_out).
inline Tensor init_weight(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  std::vector<double> w(fan_in * fan_out);
  for (auto& v : w) v = dist(rng);
  return Tensor::from({fan_in, fan_out}, std::move(w), true);
}

}  // namespace detail

inline Model build_model(const ArchSpec& spec, const HeadSpec& head,
                         std::uint64_t seed) {
  spec.validate();
  Model m;
  m.spec_ = spec;
  m.head_ = head;
  m.seed_ = seed;
  std::size_t begin = 0;
  for (auto n : spec.class_counts) {
    m.segments_.push_back({begin, begin + n});
    begin += n;
  }

  Rng rng(seed);
  auto& P = m.params_;
  auto add_dense = [&](const std::string& name, std::size_t in,
                       std::size_t out, ParamRole role, bool bias) {
    P.push_back({name + ".w", detail::init_weight(rng, in, out), role});
    if (bias) P.push_back({name + ".b", Tensor::zeros({out}, true), ParamRole::kBias});
  };

  P.push_back({"base.w1", detail::init_weight(rng, spec.input_dim, spec.base_hidden),
               ParamRole::kBase});
  P.push_back({"base.b1", Tensor::zeros({spec.base_hidden}, true), ParamRole::kBase});
  P.push_back({"base.w2", detail::init_weight(rng, spec.base_hidden, spec.base_size),
               ParamRole::kBase});
  P.push_back({"base.b2", Tensor::zeros({spec.base_size}, true), ParamRole::kBase});

  const std::size_t M = spec.num_verticals();
  const std::size_t s1 = spec.top1_size, s2 = spec.top2_size;
  const bool b = spec.use_bias;
  const auto top = ParamRole::kTopWeight;
  switch (spec.topology) {
    case Topology::kFcFc:
      add_dense("top1", spec.base_size, s1, top, b);
      add_dense("top2", s1, s2, top, b);
      add_dense("logit", s2, spec.num_classes, top, b);
      break;
    case Topology::kFcSc:
    case Topology::kFcScGeneric: {
      const std::size_t x = spec.generic_size;
      add_dense("top1", spec.base_size, s1, top, b);
      if (x > 0) add_dense("top2.generic", s1, x, top, b);
      if (x < s2)
        for (std::size_t v = 0; v < M; ++v)
          add_dense("top2.v" + std::to_string(v), s1, s2 - x, top, b);
      for (std::size_t v = 0; v < M; ++v)
        add_dense("logit.v" + std::to_string(v), s2, spec.class_counts[v], top, b);
      break;
    }
    case Topology::kScSc:
      for (std::size_t v = 0; v < M; ++v)
        add_dense("top1.v" + std::to_string(v), spec.base_size, s1, top, b);
      for (std::size_t v = 0; v < M; ++v)
        add_dense("top2.v" + std::to_string(v), s1, s2, top, b);
      for (std::size_t v = 0; v < M; ++v)
        add_dense("logit.v" + std::to_string(v), s2, spec.class_counts[v], top, b);
      break;
  }
  // Output biases start at -log C, roughly the log-odds of a uniform prior,
  // so early updates go into features instead of pushing every logit down.
  const double prior = -std::log(static_cast<double>(spec.num_classes));
  for (auto& p : P)
    if (p.role == ParamRole::kBias && p.name.rfind("logit", 0) == 0)
      for (auto& v : p.tensor.mutable_data()) v = prior;

  if (head.mode != ScaleMode::kNone) {
    if (!(head.init.dev >= 0.0)) {
      throw ValidationError("head: gamma deviation must be non-negative");
    }
    std::vector<double> gamma;
    auto mean_for = [&](std::size_t v) {
      return head.init.kind == GammaInit::Kind::kSqrtNv
                 ? std::sqrt(static_cast<double>(spec.class_counts[v]))
                 : head.init.value;
    };
    auto draw = [&](double mean) {
      if (head.init.dev == 0.0) return mean;
      std::normal_distribution<double> dist(mean, head.init.dev);
      return dist(rng);
    };
    for (std::size_t v = 0; v < M; ++v) {
      const std::size_t reps =
          head.mode == ScaleMode::kVertical ? 1 : spec.class_counts[v];
      for (std::size_t i = 0; i < reps; ++i) gamma.push_back(draw(mean_for(v)));
    }
    const std::size_t n = gamma.size();
    P.push_back({"head.gamma", Tensor::from({n}, std::move(gamma), head.trainable),
                 ParamRole::kGamma});
  }
  return m;
}

}  // namespace kc
