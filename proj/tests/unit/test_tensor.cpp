#include <gtest/gtest.h>

#include <random>

#include "ffino/core/conv.hpp"
#include "ffino/core/fft.hpp"
#include "support/gradcheck.hpp"

using namespace ffino;
using ffino::testing::grad_check;

namespace {

Tensor<double> random_tensor(const Shape& shape, std::uint64_t seed, bool rg = true) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(gen);
  return Tensor<double>(shape, v, rg);
}

}  // namespace

TEST(Tensor, RejectsCountMismatchAndZeroAxes) {
  EXPECT_THROW(Tensor<double>({2, 2}, {1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(Tensor<double>({0, 2}, {}), std::invalid_argument);
}

TEST(Elementwise, AddValues) {
  Tensor<double> a({2}, {1, 2}), b({2}, {3, 4});
  auto c = a + b;
  EXPECT_EQ(c[0], 4);
  EXPECT_EQ(c[1], 6);
}

TEST(Elementwise, MulByOnesIsIdentity) {
  auto x = random_tensor({3, 4}, 1, false);
  auto y = x * Tensor<double>::ones({3, 4});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Elementwise, BroadcastTrailingAxes) {
  Tensor<double> a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor<double> b({2, 1}, {10, 20});
  auto c = a + b;
  EXPECT_EQ(c[0], 11);
  EXPECT_EQ(c[5], 26);
  Tensor<double> row({3}, {1, 1, 1});
  EXPECT_EQ((a * row)[4], 5);
}

TEST(Elementwise, MismatchNamesBothShapes) {
  Tensor<double> a({2, 3}, std::vector<double>(6, 1.0)), b({2, 2}, std::vector<double>(4, 1.0));
  try {
    (void)(a + b);
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2, 3)"), std::string::npos);
    EXPECT_NE(msg.find("(2, 2)"), std::string::npos);
  }
}

TEST(Elementwise, GradOfSumProductIsOtherFactor) {
  auto a = random_tensor({3, 4}, 2);
  auto b = random_tensor({3, 4}, 3);
  backward(sum(a * b));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_DOUBLE_EQ(a.grad()[i], b[i]);
  auto r = grad_check([&] { return sum(a * b); }, {a, b});
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Elementwise, BroadcastGradReducesBySum) {
  auto a = random_tensor({2, 3, 4}, 4);
  auto b = random_tensor({3, 1}, 5);
  auto r = grad_check([&] { return sum(square(a * b - a + b)); }, {a, b});
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  auto d = random_tensor({3, 4}, 6);
  for (auto& v : d.mutable_data()) v = 2.0 + v;  // keep away from zero
  auto r2 = grad_check([&] { return sum(div(a, d)); }, {a, d});
  EXPECT_LT(r2.max_rel_error, 1e-6) << r2.worst;
}

TEST(Matmul, IdentityAndHandCase) {
  Tensor<double> eye({2, 2}, {1, 0, 0, 1}), v({2, 1}, {5, 7});
  auto y = matmul(eye, v);
  EXPECT_EQ(y[0], 5);
  EXPECT_EQ(y[1], 7);
  Tensor<double> a({2, 2}, {1, 2, 3, 4}), ones({2, 1}, {1, 1});
  auto z = matmul(a, ones);
  EXPECT_EQ(z[0], 3);
  EXPECT_EQ(z[1], 7);
  EXPECT_THROW(matmul(a, Tensor<double>::ones({3, 1})), std::invalid_argument);
}

TEST(Matmul, GradCheck) {
  auto a = random_tensor({3, 4}, 7);
  auto b = random_tensor({4, 2}, 8);
  auto r = grad_check([&] { return sum(square(matmul(a, b))); }, {a, b});
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  auto x = random_tensor({2, 3, 4}, 9);
  auto bias = random_tensor({2}, 10);
  auto r2 = grad_check([&] { return sum(square(linear(x, b, bias))); }, {x, b, bias});
  EXPECT_LT(r2.max_rel_error, 1e-6) << r2.worst;
}

TEST(Conv2d, PointwiseIdentity) {
  auto x = random_tensor({1, 1, 4, 5}, 11, false);
  auto y = conv2d(x, Tensor<double>::ones({1, 1, 1, 1}), Tensor<double>::zeros({1}));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Conv2d, OnesKernelOnImpulseValid) {
  std::vector<double> v(25, 0.0);
  v[2 * 5 + 2] = 1.0;
  Tensor<double> x({1, 1, 5, 5}, v);
  auto y = conv2d(x, Tensor<double>::ones({1, 1, 3, 3}), Tensor<double>::zeros({1}), Padding::valid);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(y[i], 1.0);
  EXPECT_THROW(conv2d(Tensor<double>::ones({1, 1, 2, 2}), Tensor<double>::ones({1, 1, 3, 3}),
                      Tensor<double>::zeros({1}), Padding::valid),
               std::invalid_argument);
}

TEST(Conv2d, SamePaddingPreservesShapeAndStrideHalves) {
  auto x = random_tensor({2, 3, 8, 6}, 12, false);
  auto w = random_tensor({4, 3, 3, 3}, 13, false);
  auto b = random_tensor({4}, 14, false);
  EXPECT_EQ(conv2d(x, w, b).shape(), (Shape{2, 4, 8, 6}));
  EXPECT_EQ(conv2d(x, w, b, Padding::same, 2).shape(), (Shape{2, 4, 4, 3}));
}

TEST(Conv2d, GradCheck) {
  auto x = random_tensor({2, 3, 6, 5}, 15);
  auto w = random_tensor({2, 3, 3, 3}, 16);
  auto b = random_tensor({2}, 17);
  for (std::size_t stride : {1, 2}) {
    auto r = grad_check([&] { return sum(square(conv2d(x, w, b, Padding::same, stride))); }, {x, w, b});
    EXPECT_LT(r.max_rel_error, 1e-6) << "stride " << stride << " " << r.worst;
  }
  auto w1 = random_tensor({4, 3, 1, 1}, 18);
  auto b1 = random_tensor({4}, 19);
  auto r = grad_check([&] { return sum(square(conv2d(x, w1, b1))); }, {x, w1, b1});
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Conv2d, UpsampleAndConcatGradCheck) {
  auto a = random_tensor({2, 2, 3, 2}, 20);
  auto b = random_tensor({2, 3, 6, 4}, 21);
  auto w = random_tensor({2, 5, 6, 4}, 22, false);
  auto r = grad_check([&] { return sum(concat_channels(upsample_nearest2x(a), b) * w); }, {a, b});
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Backward, SumAndHalfSquare) {
  auto x = random_tensor({5}, 23);
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
  x.zero_grad();
  backward(affine(sum(square(x)), 0.5));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(x.grad()[i], x[i]);
}

TEST(Backward, AccumulatesAcrossCalls) {
  auto x = random_tensor({3}, 24);
  auto loss = sum(x * x);
  backward(loss);
  backward(loss);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x.grad()[i], 4 * x[i], 1e-12);
}

TEST(Backward, NonScalarLossIsError) {
  auto x = random_tensor({3}, 25);
  EXPECT_THROW(backward(x * x), std::invalid_argument);
}

TEST(Backward, NoGradGuardSkipsTape) {
  auto x = random_tensor({3}, 26);
  NoGradGuard guard;
  auto y = sum(x * x);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Fft, ConstantAndImpulse) {
  Tensor<double> c({4}, {2.5, 2.5, 2.5, 2.5});
  auto s = rfft(c, 0);
  ASSERT_EQ(s.shape(), (Shape{3}));
  EXPECT_NEAR(s.real(0), 10.0, 1e-14);
  for (std::size_t k = 1; k < 3; ++k) {
    EXPECT_NEAR(s.real(k), 0.0, 1e-14);
    EXPECT_NEAR(s.imag(k), 0.0, 1e-14);
  }
  auto imp = rfft(Tensor<double>({4}, {1, 0, 0, 0}), 0);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(imp.real(k), 1.0, 1e-14);
    EXPECT_NEAR(imp.imag(k), 0.0, 1e-14);
  }
}

TEST(Fft, RoundTripNonPowerOfTwo) {
  for (std::size_t n : {37, 192, 64, 45, 7, 1, 2}) {
    auto x = random_tensor({3, n}, 27 + n, false);
    auto y = irfft(rfft(x, 1), 1, n);
    double err = 0;
    for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(y[i] - x[i]));
    EXPECT_LT(err, 1e-12) << "n = " << n;
  }
}

TEST(Fft, MatchesDirectDft) {
  const std::size_t n = 30;
  auto x = random_tensor({n}, 28, false);
  auto s = rfft(x, 0);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    double re = 0, im = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = 2 * std::numbers::pi * double(k * j) / n;
      re += x[j] * std::cos(a);
      im -= x[j] * std::sin(a);
    }
    EXPECT_NEAR(s.real(k), re, 1e-11);
    EXPECT_NEAR(s.imag(k), im, 1e-11);
  }
}

TEST(Fft, LinearityAndParseval) {
  const std::size_t n = 48;
  auto x = random_tensor({n}, 29, false), y = random_tensor({n}, 30, false);
  const double alpha = 0.7, beta = -1.3;
  auto lhs = rfft(affine(x, alpha) + affine(y, beta), 0);
  auto sx = rfft(x, 0), sy = rfft(y, 0);
  for (std::size_t k = 0; k < lhs.shape()[0]; ++k) {
    EXPECT_NEAR(lhs.real(k), alpha * sx.real(k) + beta * sy.real(k), 1e-12);
    EXPECT_NEAR(lhs.imag(k), alpha * sx.imag(k) + beta * sy.imag(k), 1e-12);
  }
  for (std::size_t len : {48, 37}) {
    auto z = random_tensor({len}, 31 + len, false);
    auto sz = rfft(z, 0);
    double e_time = 0, e_freq = 0;
    for (double v : z.data()) e_time += v * v;
    for (std::size_t k = 0; k < sz.shape()[0]; ++k) {
      const double m = sz.real(k) * sz.real(k) + sz.imag(k) * sz.imag(k);
      e_freq += (k == 0 || 2 * k == len) ? m : 2 * m;
    }
    EXPECT_NEAR(e_time, e_freq / len, 1e-10);
  }
}

TEST(Fft, ZeroLengthAxisAndBinMismatch) {
  auto x = random_tensor({2, 8}, 32, false);
  EXPECT_THROW(rfft(x, 2), std::invalid_argument);
  EXPECT_THROW(irfft(rfft(x, 1), 1, 12), std::invalid_argument);
}

TEST(Fft, AdjointsGradCheck) {
  auto x = random_tensor({2, 9, 5}, 33);
  auto w = random_tensor({2, 5, 5}, 34, false);
  for (std::size_t axis : {1, 2}) {
    auto r = grad_check([&] { return sum(square(as_real(rfft(x, axis)))); }, {x});
    EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  }
  auto spec = random_tensor({2, 5, 5, 2}, 35);
  auto r = grad_check([&] { return sum(irfft(as_complex(spec), 1, 9) * random_tensor({2, 9, 5}, 36, false)); }, {spec});
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  (void)w;
}

TEST(Determinism, RepeatedForwardIsBitIdentical) {
  auto x = random_tensor({2, 3, 8, 8}, 37, false);
  auto w = random_tensor({3, 3, 3, 3}, 38, false);
  auto b = random_tensor({3}, 39, false);
  auto y1 = conv2d(x, w, b), y2 = conv2d(x, w, b);
  for (std::size_t i = 0; i < y1.size(); ++i) ASSERT_EQ(y1[i], y2[i]);
}
