#pragma once

// Sigmoid cross-entropy, Adagrad, and the self-paced gradient diagnostics.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "kc/error.hpp"
#include "kc/tensor.hpp"

namespace kc {

namespace detail {

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace detail

// L = -(1/N_b) sum_i sum_j [ t_ij log s(x_ij) + (1 - t_ij) log(1 - s(x_ij)) ]
// Averaged over the batch, summed over classes. log s(x) = -softplus(-x) and
// log(1 - s(x)) = -softplus(x).
inline Tensor sigmoid_ce_loss(const Tensor& logits, const Tensor& targets) {
  detail::require_same_shape(logits, targets, "sigmoid_ce_loss");
  for (double t : targets.data()) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw ValidationError("sigmoid_ce_loss: target " + std::to_string(t) +
                            " outside [0,1]");
    }
  }
  const double batch = static_cast<double>(logits.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i], t = targets[i];
    total += t * detail::softplus(-x) + (1.0 - t) * detail::softplus(x);
  }
  return make_result({1}, {total / batch}, {logits, targets},
                     [batch](detail::TensorImpl& o) {
                       auto& px = *o.parents[0];
                       auto& pt = *o.parents[1];
                       const double g = o.grad[0] / batch;
                       if (px.requires_grad) {
                         auto& gx = px.ensure_grad();
                         for (std::size_t i = 0; i < gx.size(); ++i)
                           gx[i] += g * (detail::stable_sigmoid(px.data[i]) -
                                         pt.data[i]);
                       }
                       if (pt.requires_grad) {
                         auto& gt = pt.ensure_grad();
                         for (std::size_t i = 0; i < gt.size(); ++i)
                           gt[i] -= g * px.data[i];
                       }
                     });
}

// accum += g^2; param -= lr * g / (sqrt(accum) + eps)
class Adagrad {
 public:
  // Accumulators start at `initial` (TensorFlow's default is 0.1). With 0
  // the first step moves every parameter by lr * sign(g).
  explicit Adagrad(double lr, double eps = 1e-8, double initial = 0.0)
      : lr_(lr), eps_(eps), initial_(initial) {
    if (!(initial >= 0.0)) {
      throw ContractError("adagrad: initial accumulator must be non-negative");
    }
  }

  double lr() const { return lr_; }
  double eps() const { return eps_; }
  double initial_accumulator() const { return initial_; }
  const std::vector<std::vector<double>>& accumulators() const {
    return accum_;
  }

  void apply(std::size_t slot, std::span<double> param,
             std::span<const double> grad) {
    if (param.size() != grad.size()) {
      throw ContractError("adagrad: parameter has " +
                          std::to_string(param.size()) + " values, gradient " +
                          std::to_string(grad.size()));
    }
    if (accum_.size() <= slot) accum_.resize(slot + 1);
    auto& acc = accum_[slot];
    if (acc.empty()) acc.assign(param.size(), initial_);
    if (acc.size() != param.size()) {
      throw ContractError("adagrad: slot " + std::to_string(slot) +
                          " changed size");
    }
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = grad[i];
      acc[i] += g * g;
      if (g == 0.0) continue;
      param[i] -= lr_ * g / (std::sqrt(acc[i]) + eps_);
    }
  }

  // Updates every tensor from its accumulated gradient. Slot i always
  // refers to params[i], so pass the same list each step.
  void step(std::span<Tensor> params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].has_grad()) {
        throw ContractError("adagrad: parameter " + std::to_string(i) +
                            " has no gradient");
      }
      apply(i, params[i].mutable_data(), params[i].grad());
    }
  }

 private:
  double lr_;
  double eps_;
  double initial_;
  std::vector<std::vector<double>> accum_;
};

// Diagonal-only gradient of y = gamma * x / ||x|| with respect to x:
//   gamma * upstream_i * (1/||x|| - x_i^2 / ||x||^3)
// The exact gradient also carries the cross terms -x_i x_j / ||x||^3; this
// is kept as a diagnostic against the exact Jacobian's diagonal.
inline std::vector<double> eq5_diagonal_gradient(std::span<const double> x,
                                                 double gamma,
                                                 std::span<const double> upstream) {
  if (x.size() != upstream.size()) {
    throw DimensionError("eq5_diagonal_gradient: x has " +
                         std::to_string(x.size()) + " entries, upstream " +
                         std::to_string(upstream.size()));
  }
  double sq = 0.0;
  for (double v : x) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!(norm > kNormEpsilon)) {
    throw DegenerateInputError("eq5_diagonal_gradient: zero-norm input");
  }
  const double norm3 = norm * norm * norm;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = gamma * upstream[i] * (1.0 / norm - x[i] * x[i] / norm3);
  return out;
}

// Normalizing N_v logits shrinks d xhat / d x by roughly 1/sqrt(N_v); this
// is the gamma initialization mean that restores the scale.
inline double grad_ratio_estimate(std::size_t class_count) {
  if (class_count == 0) {
    throw ContractError("grad_ratio_estimate: class count must be >= 1");
  }
  return std::sqrt(static_cast<double>(class_count));
}

}  // namespace kc
