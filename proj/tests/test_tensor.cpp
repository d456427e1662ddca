#include <gtest/gtest.h>

#include <cmath>

#include "support/oracles.hpp"

using namespace pelican;

TEST(Tensor, LengthMatchesShapeProduct) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), ShapeError);
}

TEST(Tensor, ReshapeCopiesDataAndKeepsOriginal) {
  Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor r = t.reshape({3, 2});
  EXPECT_EQ(r.shape(), (Shape{3, 2}));
  EXPECT_EQ(t.shape(), (Shape{2, 3}));
  r[0] = 42;
  EXPECT_EQ(t[0], 1.0);
  EXPECT_THROW(t.reshape({4, 2}), ShapeError);
}

TEST(Matmul, IdentityLeavesMatrix) {
  const auto b = Tensor::matrix({{3, 4}, {5, 6}});
  EXPECT_EQ(matmul(Tensor::matrix({{1, 0}, {0, 1}}), b), b);
}

TEST(Matmul, RowTimesColumn) {
  const auto c = matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}}));
  EXPECT_EQ(c.shape(), (Shape{1, 1}));
  EXPECT_EQ(c[0], 11.0);
}

TEST(Matmul, MatchesTripleLoop) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t m = 1 + rng.below(9), k = 1 + rng.below(9), n = 1 + rng.below(9);
    const auto a = oracle::random_tensor({m, k}, rng), b = oracle::random_tensor({k, n}, rng);
    const auto c = matmul(a, b), ref = oracle::naive_matmul(a, b);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], ref[i], 1e-12);
  }
  Rng rng(99);
  const auto a = oracle::random_tensor({3, 4}, rng), b = oracle::random_tensor({4, 2}, rng);
  const auto c = matmul(a, b), ref = oracle::naive_matmul(a, b);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], ref[i], 1e-14);
}

TEST(Matmul, MismatchNamesBothShapes) {
  try {
    matmul(Tensor({2, 3}), Tensor({4, 2}));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2,3)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(4,2)"), std::string::npos) << msg;
  }
}

TEST(Conv1d, HandSlidingWindow) {
  Tensor x({5, 1}, std::vector<double>{1, 2, 3, 4, 5});
  Tensor w({3, 1, 1}, 1.0);
  const auto y = conv1d_same(x, w, Tensor({1}, 0.0));
  EXPECT_EQ(y, Tensor({5, 1}, std::vector<double>{3, 6, 9, 12, 9}));
}

TEST(Conv1d, SingleStepUsesCenterTap) {
  Rng rng(3);
  const std::size_t cin = 4, cout = 3, k = 10;
  const auto x = oracle::random_tensor({1, cin}, rng);
  const auto w = oracle::random_tensor({k, cin, cout}, rng);
  const auto b = oracle::random_tensor({cout}, rng);
  const auto y = conv1d_same(x, w, b);
  const std::size_t center = 4;
  for (std::size_t co = 0; co < cout; ++co) {
    double s = b[co];
    for (std::size_t ci = 0; ci < cin; ++ci) s += x.at(0, ci) * w.at(center, ci, co);
    EXPECT_NEAR(y.at(0, co), s, 1e-14);
  }
}

TEST(Conv1d, ZeroInputZeroBias) {
  const auto y = conv1d_same(Tensor({6, 2}), Tensor({3, 2, 5}, 0.7), Tensor({5}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv1d, PreservesLengthAndMatchesDirectSum) {
  Rng rng(11);
  for (std::size_t k = 1; k <= 12; ++k) {
    for (std::size_t t : {1u, 2u, 5u, 13u}) {
      const auto x = oracle::random_tensor({t, 3}, rng);
      const auto w = oracle::random_tensor({k, 3, 2}, rng);
      const auto b = oracle::random_tensor({2}, rng);
      const auto y = conv1d_same(x, w, b);
      ASSERT_EQ(y.shape(), (Shape{t, 2})) << "K=" << k;
      const auto ref = oracle::naive_conv(x, w, b);
      for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12) << "K=" << k << " T=" << t;
    }
  }
}

TEST(Conv1d, BatchedEqualsPerSample) {
  Rng rng(5);
  const auto x = oracle::random_tensor({3, 7, 2}, rng);
  const auto w = oracle::random_tensor({4, 2, 3}, rng);
  const auto b = oracle::random_tensor({3}, rng);
  const auto y = conv1d_same(x, w, b);
  for (std::size_t s = 0; s < 3; ++s) {
    Tensor xs({7, 2}, std::vector<double>(x.raw() + s * 14, x.raw() + (s + 1) * 14));
    const auto ref = oracle::naive_conv(xs, w, b);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[s * 21 + i], ref[i], 1e-12);
  }
}

TEST(Conv1d, ChannelMismatchThrows) {
  EXPECT_THROW(conv1d_same(Tensor({4, 3}), Tensor({3, 2, 1}), Tensor({1})), ShapeError);
}

TEST(Conv1d, BackwardMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t k = 1 + rng.below(6), t = 1 + rng.below(6);
    auto x = oracle::random_tensor({2, t, 2}, rng);
    auto w = oracle::random_tensor({k, 2, 3}, rng);
    auto b = oracle::random_tensor({3}, rng);
    const auto r = oracle::random_tensor({2, t, 3}, rng);
    const auto g = conv1d_same_backward(x, w, r);
    auto loss = [&] { return oracle::project(conv1d_same(x, w, b), r); };
    oracle::GradCheck res;
    oracle::check_gradient(x.data(), g.input.data(), loss, res, "x");
    oracle::check_gradient(w.data(), g.kernels.data(), loss, res, "w");
    oracle::check_gradient(b.data(), g.bias.data(), loss, res, "b");
    EXPECT_LT(res.max_rel, 1e-4) << res.worst;
    EXPECT_EQ(res.skipped, 0u);
  }
}

TEST(Activations, PointValues) {
  EXPECT_EQ(relu(-2.0), 0.0);
  EXPECT_EQ(relu(3.0), 3.0);
  EXPECT_EQ(hard_sigmoid(0.0), 0.5);
  EXPECT_EQ(hard_sigmoid(3.0), 1.0);
  EXPECT_EQ(hard_sigmoid(-3.0), 0.0);
  EXPECT_EQ(tanh_derivative(0.0), 1.0);
}

TEST(Activations, KinksHaveZeroDerivative) {
  EXPECT_EQ(relu_derivative(0.0), 0.0);
  EXPECT_EQ(hard_sigmoid_derivative(2.5), 0.0);
  EXPECT_EQ(hard_sigmoid_derivative(-2.5), 0.0);
  EXPECT_EQ(hard_sigmoid_derivative(2.4), 0.2);
}

TEST(Activations, DerivativesMatchFiniteDifferences) {
  Rng rng(1);
  const double h = 1e-5;
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(-4.0, 4.0);
    auto fd = [&](auto f) { return (f(x + h) - f(x - h)) / (2 * h); };
    auto rel = [](double a, double n) { return std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-6}); };
    if (std::fabs(x) > 10 * h) {
      EXPECT_LT(rel(relu_derivative(x), fd([](double v) { return relu(v); })), 1e-4);
    }
    if (std::fabs(std::fabs(x) - 2.5) > 10 * h) {
      EXPECT_LT(rel(hard_sigmoid_derivative(x), fd([](double v) { return hard_sigmoid(v); })), 1e-4);
    }
    EXPECT_LT(rel(tanh_derivative(x), fd([](double v) { return std::tanh(v); })), 1e-4);
  }
}

TEST(Softmax, RowsSumToOne) {
  Rng rng(2);
  const auto p = softmax(oracle::random_tensor({7, 5}, rng, -30, 30));
  for (std::size_t r = 0; r < 7; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 5; ++c) s += p.at(r, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(CrossEntropy, UniformLogits) {
  const auto lg = softmax_cross_entropy(Tensor({1, 4}, 2.5), Tensor({1, 4}, std::vector<double>{0, 0, 1, 0}));
  EXPECT_NEAR(lg.loss, std::log(4.0), 1e-15);
}

TEST(CrossEntropy, Saturated) {
  const auto lg = softmax_cross_entropy(Tensor::matrix({{10, -10}}), Tensor::matrix({{1, 0}}));
  EXPECT_LT(lg.loss, 1e-4);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto logits = oracle::random_tensor({3, 5}, rng, -3, 3);
    Tensor onehot({3, 5});
    for (std::size_t r = 0; r < 3; ++r) onehot.at(r, rng.below(5)) = 1.0;
    const auto lg = softmax_cross_entropy(logits, onehot);
    oracle::GradCheck res;
    oracle::check_gradient(logits.data(), lg.grad.data(), [&] { return softmax_cross_entropy(logits, onehot).loss; },
                           res, "logits");
    EXPECT_LT(res.max_rel, 1e-6) << res.worst;
  }
}

TEST(CrossEntropy, RejectsMismatchAndNonOneHot) {
  EXPECT_THROW(softmax_cross_entropy(Tensor({2, 3}), Tensor({2, 4})), ShapeError);
  EXPECT_THROW(softmax_cross_entropy(Tensor({1, 2}), Tensor::matrix({{0.5, 0.5}})), DataError);
}

TEST(Kernels, Deterministic) {
  Rng rng(8);
  const auto x = oracle::random_tensor({4, 9, 3}, rng);
  const auto w = oracle::random_tensor({5, 3, 6}, rng);
  const auto b = oracle::random_tensor({6}, rng);
  EXPECT_EQ(conv1d_same(x, w, b), conv1d_same(x, w, b));
  const auto a = oracle::random_tensor({13, 17}, rng), c = oracle::random_tensor({17, 11}, rng);
  EXPECT_EQ(matmul(a, c), matmul(a, c));
}

TEST(Hash, StableAcrossCopies) {
  Tensor a({3}, std::vector<double>{1, 2, 3});
  Tensor b = a;
  EXPECT_EQ(hash_tensor(a), hash_tensor(b));
  b[2] = 3.0000001;
  EXPECT_NE(hash_tensor(a), hash_tensor(b));
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}
