#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "kc/losses.hpp"
#include "kc/rng.hpp"

namespace kc {
namespace {

constexpr double kLog2 = 0.69314718055994530942;

TEST(SigmoidCeLoss, SingleLogitAtZero) {
  auto loss = sigmoid_ce_loss(Tensor::from({1, 1}, {0}), Tensor::from({1, 1}, {1}));
  EXPECT_NEAR(loss.item(), kLog2, 1e-12);
}

TEST(SigmoidCeLoss, SumsOverClassesNotMean) {
  auto loss = sigmoid_ce_loss(Tensor::from({1, 2}, {0, 0}), Tensor::from({1, 2}, {1, 0}));
  EXPECT_NEAR(loss.item(), 2 * kLog2, 1e-12);
  EXPECT_NEAR(loss.item(), 1.386294, 1e-6);
}

TEST(SigmoidCeLoss, AveragesOverBatch) {
  auto loss = sigmoid_ce_loss(Tensor::from({2, 1}, {0, 0}), Tensor::from({2, 1}, {1, 0}));
  EXPECT_NEAR(loss.item(), kLog2, 1e-12);
}

TEST(SigmoidCeLoss, SoftTargetSymmetricPoint) {
  auto loss = sigmoid_ce_loss(Tensor::from({1, 1}, {0}), Tensor::from({1, 1}, {0.5}));
  EXPECT_NEAR(loss.item(), kLog2, 1e-12);
}

TEST(SigmoidCeLoss, RejectsTargetsOutsideUnitInterval) {
  EXPECT_THROW(sigmoid_ce_loss(Tensor::from({1, 1}, {0}), Tensor::from({1, 1}, {1.5})),
               ValidationError);
  EXPECT_THROW(sigmoid_ce_loss(Tensor::from({1, 1}, {0}), Tensor::from({1, 1}, {-0.1})),
               ValidationError);
  EXPECT_THROW(sigmoid_ce_loss(Tensor::from({1, 2}, {0, 0}), Tensor::from({2, 1}, {0, 0})),
               DimensionError);
}

TEST(SigmoidCeLoss, StableForLargeLogits) {
  auto loss = sigmoid_ce_loss(Tensor::from({1, 2}, {800, -800}),
                              Tensor::from({1, 2}, {0, 1}));
  EXPECT_NEAR(loss.item(), 1600.0, 1e-9);
  auto saturated = sigmoid_ce_loss(Tensor::from({1, 2}, {60, -60}),
                                   Tensor::from({1, 2}, {1, 0}));
  EXPECT_GE(saturated.item(), 0.0);
  EXPECT_LT(saturated.item(), 1e-25);
}

TEST(SigmoidCeLoss, NonNegativeAndGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 3.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(4 * 6), t(4 * 6);
    for (auto& v : x) v = n(rng);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = i % 3 == 0 ? u(rng) : (i % 3 == 1);
    auto logits = Tensor::from({4, 6}, x, true);
    auto targets = Tensor::from({4, 6}, t);
    EXPECT_GE(sigmoid_ce_loss(logits, targets).item(), 0.0);
    const double err = testing::max_gradient_error(
        [&] { return sigmoid_ce_loss(logits, targets); }, {logits});
    EXPECT_LT(err, 1e-5) << "seed " << seed;
  }
}

TEST(Adagrad, FirstStepMovesByLearningRate) {
  Adagrad opt(0.1, 0.0);
  std::vector<double> p{1.0};
  const std::vector<double> g{3.0};
  opt.apply(0, p, g);
  EXPECT_NEAR(p[0], 0.9, 1e-15);
  EXPECT_EQ(opt.accumulators()[0][0], 9.0);
}

TEST(Adagrad, ZeroGradientIsNoOp) {
  Adagrad opt(0.1);
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.0, 0.0};
  opt.apply(0, p, g);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(Adagrad, ZeroLearningRateIsNoOp) {
  Adagrad opt(0.0);
  std::vector<double> p{1.0};
  const std::vector<double> g{5.0};
  opt.apply(0, p, g);
  EXPECT_EQ(p[0], 1.0);
}

TEST(Adagrad, ConstantGradientUpdatesShrink) {
  Adagrad opt(0.5);
  std::vector<double> p{0.0};
  const std::vector<double> g{2.0};
  double prev_step = std::numeric_limits<double>::infinity();
  double prev_acc = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double before = p[0];
    opt.apply(0, p, g);
    const double step = before - p[0];
    EXPECT_LE(step, prev_step);
    EXPECT_GE(opt.accumulators()[0][0], prev_acc);
    prev_step = step;
    prev_acc = opt.accumulators()[0][0];
  }
}

TEST(Adagrad, ShapeMismatchIsContractError) {
  Adagrad opt(0.1);
  std::vector<double> p{1.0, 2.0};
  const std::vector<double> g{1.0};
  EXPECT_THROW(opt.apply(0, p, g), ContractError);
  std::vector<Tensor> params{Tensor::zeros({2}, true)};
  EXPECT_THROW(opt.step(params), ContractError);  // no gradient yet
}

TEST(DiagonalGradient, WorkedExample) {
  const std::vector<double> x{3, 4}, up{1, 0};
  const auto g = eq5_diagonal_gradient(x, 1.0, up);
  EXPECT_NEAR(g[0], 0.128, 1e-15);
  EXPECT_EQ(g[1], 0.0);
}

TEST(DiagonalGradient, ZeroUpstreamAndSingleton) {
  const std::vector<double> x{1, -2, 0.5}, zero{0, 0, 0};
  for (double v : eq5_diagonal_gradient(x, 2.0, zero)) EXPECT_EQ(v, 0.0);
  const std::vector<double> five{5}, one{1};
  EXPECT_NEAR(eq5_diagonal_gradient(five, 1.0, one)[0], 0.0, 1e-17);
  const std::vector<double> zeros{0, 0};
  EXPECT_THROW(eq5_diagonal_gradient(zeros, 1.0, std::vector<double>{1, 1}),
               DegenerateInputError);
}

// The diagonal expression equals gamma * upstream_i * J_ii, where J is the
// exact normalization Jacobian read off the autodiff op with one-hot
// upstream gradients. When J_ii cancels to zero (singleton segments) the
// error is measured against the size of the cancelling terms,
// gamma * |upstream_i| / ||x||.
TEST(DiagonalGradient, MatchesExactJacobianDiagonal) {
  Rng rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t len = 1 + trial % 12;
    std::vector<double> xs(len), up(len);
    for (auto& v : xs) v = n(rng);
    for (auto& v : up) v = n(rng);
    const double gamma = 0.5 + std::abs(n(rng));
    double norm = 0.0;
    for (double v : xs) norm += v * v;
    norm = std::sqrt(norm);
    const auto diag = eq5_diagonal_gradient(xs, gamma, up);
    for (std::size_t i = 0; i < len; ++i) {
      auto x = Tensor::from({len}, xs, true);
      std::vector<double> onehot(len, 0.0);
      onehot[i] = 1.0;
      backward(sum(mul(l2_normalize_segment(x, {0, len}), Tensor::from({len}, onehot))));
      const double jii = x.grad()[i];
      const double expect = gamma * up[i] * jii;
      const double term = gamma * std::abs(up[i]) / norm;
      EXPECT_LE(std::abs(diag[i] - expect), 1e-10 * std::max(std::abs(expect), 1e-4 * term))
          << "trial " << trial << " i " << i;
    }
  }
}

TEST(GradRatio, SquareRootOfClassCount) {
  EXPECT_EQ(grad_ratio_estimate(16), 4.0);
  EXPECT_EQ(grad_ratio_estimate(1), 1.0);
  EXPECT_EQ(grad_ratio_estimate(25), 5.0);
  EXPECT_THROW(grad_ratio_estimate(0), ContractError);
}

// Monte-Carlo: mean d xhat_j / d x_j over unit-variance vectors is close to
// 1/sqrt(N_v).
TEST(GradRatio, MonteCarloAgreesWithinTwentyPercent) {
  Rng rng(25);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t nv = 25;
  double total = 0.0;
  const int draws = 1000;
  for (int d = 0; d < draws; ++d) {
    std::vector<double> xs(nv);
    for (auto& v : xs) v = n(rng);
    auto x = Tensor::from({nv}, xs, true);
    const std::size_t j = static_cast<std::size_t>(d) % nv;
    std::vector<double> onehot(nv, 0.0);
    onehot[j] = 1.0;
    backward(sum(mul(l2_normalize_segment(x, {0, nv}), Tensor::from({nv}, onehot))));
    total += x.grad()[j];
  }
  const double ratio = total / draws;
  EXPECT_NEAR(ratio * grad_ratio_estimate(nv), 1.0, 0.2);
}

}  // namespace
}  // namespace kc
