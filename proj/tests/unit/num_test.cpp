#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

#include "kalm/errors.hpp"
#include "kalm/num/gradcheck.hpp"
#include "kalm/num/linear.hpp"
#include "kalm/num/ops.hpp"
#include "kalm/num/serialize.hpp"
#include "support/support.hpp"

using namespace kalm;
using namespace kalm::num;
using kalm::testing::max_abs_diff;
using kalm::testing::random_matrix;

TEST(Tensor, NumelMatchesShape) {
  auto t = Tensor::zeros({3, 4});
  EXPECT_EQ(t.numel(), 12u);
  EXPECT_EQ(t.data().size(), 12u);
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  auto i2 = Tensor::from({2, 2}, {1, 0, 0, 1});
  auto m = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(matmul(i2, m).to_vector(), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Matmul, AnnihilatingProductIsZero) {
  auto out = matmul(Tensor::row({1, 0}), Tensor::from({2, 1}, {0, 5}));
  EXPECT_EQ(out.shape(), (Shape{1, 1}));
  EXPECT_EQ(out.item(), 0.0);
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
}

TEST(Matmul, GradientMatchesFiniteDifference) {
  Rng rng(3);
  auto a = random_matrix(3, 4, rng, true);
  auto b = random_matrix(4, 2, rng, true);
  auto w = random_matrix(3, 2, rng);
  const Tensor params[] = {a, b};
  auto r = fd_check([&] { return sum(mul(matmul(a, b), w)); }, params);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(Softmax, UniformOnEqualInputs) {
  auto s = softmax(Tensor::row({0, 0, 0}));
  for (double v : s.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LargeInputsDoNotOverflow) {
  auto s = softmax(Tensor::row({1000, 1000}));
  EXPECT_DOUBLE_EQ(s.at(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(s.at(0, 1), 0.5);
}

TEST(Softmax, MatchesDirectEvaluation) {
  auto s = softmax(Tensor::row({1, 2, 3}));
  const long double z = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.at(0, i), double(std::exp((long double)(i + 1)) / z), 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_matrix(4, 7, rng, false, 5.0);
    auto s = softmax(x);
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 7; ++c) {
        EXPECT_GT(s.at(r, c), 0.0);
        total += s.at(r, c);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
    const double c = rng.uniform(-100, 100);
    auto shifted = softmax(add(x, Tensor::full({4, 7}, c)));
    EXPECT_LT(max_abs_diff(s, shifted), 1e-12);
  }
}

TEST(Softmax, ColumnAxis) {
  auto s = softmax(Tensor::from({2, 2}, {0, 1, 0, 1}), 0);
  EXPECT_NEAR(s.at(0, 0) + s.at(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(s.at(0, 1), 0.5, 1e-15);
}

TEST(Softmax, EmptyAxisThrows) { EXPECT_THROW(softmax(Tensor::zeros({2, 0})), DimensionError); }

TEST(Elu, ZeroAndAsymptote) {
  EXPECT_EQ(elu(Tensor::row({0})).item(), 0.0);
  EXPECT_NEAR(elu(Tensor::row({-20})).item(), -1.0, 1e-8);
  EXPECT_EQ(elu(Tensor::row({2.5})).item(), 2.5);
}

TEST(Elu, LayerNormCompositionGradient) {
  Rng rng(5);
  auto x = random_matrix(3, 5, rng, true);
  auto gain = random_matrix(1, 5, rng, true);
  auto bias = random_matrix(1, 5, rng, true);
  auto w = random_matrix(3, 5, rng);
  const Tensor params[] = {x, gain, bias};
  auto r = fd_check([&] { return sum(mul(layer_norm(elu(x), gain, bias), w)); }, params);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

// Every differentiable op against central differences on 20 seeds.
TEST(Ops, AllDifferentiableOpsPassFiniteDifference) {
  using Fn = std::function<Tensor(const Tensor&, const Tensor&)>;
  const std::vector<std::pair<const char*, Fn>> ops = {
      {"matmul", [](const Tensor& a, const Tensor& b) { return matmul(a, transpose(b)); }},
      {"add", [](const Tensor& a, const Tensor& b) { return add(a, b); }},
      {"sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }},
      {"mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }},
      {"scale", [](const Tensor& a, const Tensor&) { return scale(a, -1.7); }},
      {"add_row", [](const Tensor& a, const Tensor& b) { return add_row(a, slice_rows(b, 0, 1)); }},
      {"mul_col", [](const Tensor& a, const Tensor& b) { return mul_col(a, slice_cols(b, 0, 1)); }},
      {"elu", [](const Tensor& a, const Tensor&) { return elu(a); }},
      {"tanh", [](const Tensor& a, const Tensor&) { return num::tanh(a); }},
      {"leaky_relu", [](const Tensor& a, const Tensor&) { return leaky_relu(a); }},
      {"softmax", [](const Tensor& a, const Tensor&) { return softmax(a); }},
      {"softmax0", [](const Tensor& a, const Tensor&) { return softmax(a, 0); }},
      {"log_softmax", [](const Tensor& a, const Tensor&) { return log_softmax(a); }},
      {"layer_norm",
       [](const Tensor& a, const Tensor& b) { return layer_norm(a, slice_rows(b, 0, 1), slice_rows(b, 1, 2)); }},
      {"concat_rows",
       [](const Tensor& a, const Tensor& b) {
         const Tensor p[] = {a, b};
         return concat_rows(p);
       }},
      {"concat_cols",
       [](const Tensor& a, const Tensor& b) {
         const Tensor p[] = {a, b};
         return concat_cols(p);
       }},
      {"slice", [](const Tensor& a, const Tensor&) { return slice_cols(slice_rows(a, 1, 3), 1, 4); }},
      {"gather",
       [](const Tensor& a, const Tensor&) {
         const std::size_t idx[] = {2, 0, 2, 1};
         return gather_rows(a, idx);
       }},
      {"scatter",
       [](const Tensor& a, const Tensor&) {
         const std::size_t idx[] = {1, 1, 0};
         return scatter_add_rows(a, idx, 2);
       }},
      {"segment_softmax",
       [](const Tensor& a, const Tensor&) {
         const std::size_t seg[] = {0, 1, 0};
         return segment_softmax(slice_cols(a, 0, 1), seg, 2);
       }},
      {"mean_rows", [](const Tensor& a, const Tensor&) { return mean_rows(a); }},
      {"sum_squares", [](const Tensor& a, const Tensor&) { return sum_squares(a); }},
      {"pick", [](const Tensor& a, const Tensor&) { return pick(a, 1, 2); }},
      {"nll", [](const Tensor& a, const Tensor&) { return nll(log_softmax(slice_rows(a, 0, 1)), 2); }},
      {"reshape", [](const Tensor& a, const Tensor&) { return reshape(a, {5, 3}); }},
      {"transpose", [](const Tensor& a, const Tensor&) { return transpose(a); }},
  };
  for (const auto& [name, op] : ops) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed * 7919 + 1);
      auto a = random_matrix(3, 5, rng, true);
      auto b = random_matrix(3, 5, rng, true);
      auto probe = op(a, b);
      std::vector<double> wv(probe.numel());
      for (auto& x : wv) x = rng.normal();
      const auto w = Tensor::from(probe.shape(), std::move(wv));
      const Tensor params[] = {a, b};
      auto r = fd_check([&] { return sum(mul(op(a, b), w)); }, params);
      EXPECT_LT(r.max_rel_error, 1e-4) << name << " seed " << seed;
    }
  }
}

TEST(Backward, SumGivesOnes) {
  auto x = Tensor::zeros({2, 2}, true);
  backward(sum(x));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{1, 1, 1, 1}));
}

TEST(Backward, QuadraticGradient) {
  auto x = Tensor::row({1, 2}, true);
  auto grads = backward(matmul(x, transpose(x)));
  EXPECT_EQ(grads.at(x.id()), (std::vector<double>{2, 4}));
}

TEST(Backward, SecondCallIsStale) {
  auto x = Tensor::row({1, 2}, true);
  auto loss = sum_squares(num::tanh(x));
  backward(loss);
  EXPECT_THROW(backward(loss), StaleTapeError);
}

TEST(Backward, NonScalarLossRejected) {
  auto x = Tensor::row({1, 2}, true);
  EXPECT_THROW(backward(scale(x, 2)), DimensionError);
}

TEST(Backward, BitReproducible) {
  auto run = [] {
    Rng rng(42);
    auto a = random_matrix(4, 4, rng, true);
    auto b = random_matrix(4, 3, rng, true);
    auto loss = sum(softmax(elu(matmul(a, b))));
    backward(loss);
    auto g = std::vector<double>(a.grad().begin(), a.grad().end());
    g.push_back(loss.item());
    return g;
  };
  EXPECT_EQ(run(), run());
}

TEST(FdCheck, QuadraticIsExact) {
  Rng rng(1);
  auto x = random_matrix(2, 3, rng, true);
  const Tensor params[] = {x};
  EXPECT_LT(fd_check([&] { return sum_squares(x); }, params).max_rel_error, 1e-9);
}

TEST(FdCheck, SoftmaxCrossEntropyHead) {
  Rng rng(2);
  auto x = random_matrix(1, 6, rng);
  Linear head(6, 4, rng);
  ParameterList p;
  head.collect(p, "head", -1);
  std::vector<Tensor> params;
  for (auto& np : p) params.push_back(np.tensor);
  auto r = fd_check([&] { return nll(log_softmax(head(x)), 1); }, params);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(FdCheck, NondeterministicFunctionRejected) {
  auto x = Tensor::row({1, 2}, true);
  DropoutStream stream(9);
  const Tensor params[] = {x};
  EXPECT_THROW(fd_check([&] { return sum(dropout(x, 0.5, stream, true)); }, params), CheckInvalidError);
}

TEST(Dropout, IdentityInEvalMode) {
  Rng rng(4);
  auto x = random_matrix(3, 3, rng);
  DropoutStream s(1);
  EXPECT_EQ(dropout(x, 0.5, s, false).to_vector(), x.to_vector());
  EXPECT_EQ(s.calls(), 0u);
}

TEST(Dropout, SeededMaskIsReproducibleAndScaled) {
  auto x = Tensor::full({10, 10}, 1.0);
  DropoutStream a(77), b(77);
  auto ya = dropout(x, 0.5, a, true);
  auto yb = dropout(x, 0.5, b, true);
  EXPECT_EQ(ya.to_vector(), yb.to_vector());
  std::size_t kept = 0;
  for (double v : ya.data()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    kept += v != 0.0;
  }
  EXPECT_GT(kept, 25u);
  EXPECT_LT(kept, 75u);
  // Next call draws a fresh mask.
  EXPECT_NE(dropout(x, 0.5, a, true).to_vector(), ya.to_vector());
}

TEST(Serialize, HeaderLayoutAndRoundTrip) {
  auto t = Tensor::from({2, 3}, {1, -2, 3.5, 0.25, 1e-3, 7});
  std::stringstream ss;
  write_tensor(ss, t);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 8u + 4u + 2 * 4u + 6 * 4u);
  EXPECT_EQ(bytes.substr(0, 8), "KALMTNSR");
  std::uint32_t rank = 0, d0 = 0;
  std::memcpy(&rank, bytes.data() + 8, 4);
  std::memcpy(&d0, bytes.data() + 12, 4);
  EXPECT_EQ(rank, 2u);
  EXPECT_EQ(d0, 2u);
  auto back = read_tensor(ss);
  EXPECT_EQ(back.shape(), t.shape());
  EXPECT_EQ(back.to_vector(), float32_rounded(t).to_vector());
}

TEST(Serialize, BadMagicRejected) {
  std::stringstream ss("NOTATENSOR......");
  EXPECT_THROW(read_tensor(ss), FormatError);
}

TEST(Linear, InitializationBounds) {
  Rng rng(8);
  Linear l(16, 4, rng);
  for (double v : l.weight().data()) EXPECT_LE(std::fabs(v), 0.25);
  for (double v : l.bias().data()) EXPECT_EQ(v, 0.0);
  auto fusion = small_normal(1, 1000, rng);
  double sq = 0;
  for (double v : fusion.data()) sq += v * v;
  EXPECT_NEAR(std::sqrt(sq / 1000), 0.02, 0.003);
}
