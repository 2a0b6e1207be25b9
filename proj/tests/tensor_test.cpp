/*
 * Copyright 2026 The hiercode Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "hiercode/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace hiercode {
namespace {

using Rng = std::mt19937_64;

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix random_matrix(Index r, Index c, Rng& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

double check(const std::function<Tensor()>& f, std::vector<Tensor> params, Rng& rng) {
  return grad_check<double>(f, std::span<const Tensor>(params), 1e-6, rng);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Rng rng(1);
  Matrix m = random_matrix(2, 2, rng);
  auto out = ops::matmul(Tensor::constant(Matrix::Identity(2, 2)), Tensor::constant(m));
  EXPECT_EQ(out.value(), m);
}

TEST(Matmul, HandArithmetic) {
  auto out = ops::matmul(Tensor::constant(mat({{1, 2}, {3, 4}})), Tensor::constant(mat({{1}, {1}})));
  EXPECT_EQ(out.value(), mat({{3}, {7}}));
}

TEST(Matmul, InnerDimensionMismatchThrows) {
  EXPECT_THROW(ops::matmul(Tensor::constant(Matrix::Zero(2, 3)), Tensor::constant(Matrix::Zero(2, 3))),
               DimensionError);
}

TEST(Conv1d, WidthOneIdentityReproducesInput) {
  Rng rng(2);
  Matrix x = random_matrix(4, 3, rng);
  auto out = ops::conv1d_same(Tensor::constant(x), Tensor::constant(Matrix::Identity(3, 3)), 1);
  EXPECT_EQ(out.value(), x);
}

TEST(Conv1d, WindowSumHasShorterEdges) {
  auto out = ops::conv1d_same(Tensor::constant(Matrix::Ones(5, 1)),
                              Tensor::constant(Matrix::Ones(3, 1)), 3);
  EXPECT_EQ(out.value(), mat({{2}, {3}, {3}, {3}, {2}}));
}

TEST(Conv1d, OutputLengthEqualsInputForEveryOddWidth) {
  Rng rng(3);
  for (Index s : {1, 3, 5, 9, 15, 19, 25}) {
    for (Index n : {1, 2, 7, 30}) {
      auto out = ops::conv1d_same(Tensor::constant(random_matrix(n, 2, rng)),
                                  Tensor::constant(random_matrix(s * 2, 3, rng)), s);
      EXPECT_EQ(out.rows(), n) << "s=" << s;
      EXPECT_EQ(out.cols(), 3);
    }
  }
}

TEST(Conv1d, EvenWidthRejected) {
  EXPECT_THROW(ops::conv1d_same(Tensor::constant(Matrix::Ones(3, 1)),
                                Tensor::constant(Matrix::Ones(2, 1)), 2),
               std::invalid_argument);
}

TEST(Conv1d, MatchesBruteForceConvolution) {
  Rng rng(4);
  const Index n = 6, d = 2, s = 5, out_dim = 3, h = s / 2;
  Matrix x = random_matrix(n, d, rng);
  Matrix w = random_matrix(s * d, out_dim, rng);
  Matrix got = ops::conv1d_same(Tensor::constant(x), Tensor::constant(w), s).value();
  for (Index j = 0; j < n; ++j) {
    for (Index o = 0; o < out_dim; ++o) {
      double acc = 0;
      for (Index k = 0; k < s; ++k) {
        const Index src = j - h + k;
        if (src < 0 || src >= n) continue;
        for (Index c = 0; c < d; ++c) acc += x(src, c) * w(k * d + c, o);
      }
      EXPECT_NEAR(got(j, o), acc, 1e-12);
    }
  }
}

TEST(Softmax, EqualValuesAreUniform) {
  auto out = ops::softmax_rows(Tensor::constant(Matrix::Constant(1, 4, 2.5)));
  for (Index j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(out.value()(0, j), 0.25);
}

TEST(Softmax, ClosedFormTwoEntries) {
  auto out = ops::softmax_rows(Tensor::constant(mat({{0, std::log(3.0)}})));
  EXPECT_NEAR(out.value()(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(out.value()(0, 1), 0.75, 1e-15);
}

TEST(Softmax, RowsSumToOneAndAreShiftInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x = random_matrix(3, 7, rng, -20, 20);
    Matrix a = ops::softmax_rows(Tensor::constant(x)).value();
    Matrix b = ops::softmax_rows(Tensor::constant(Matrix(x.array() + 13.7))).value();
    for (Index i = 0; i < 3; ++i) EXPECT_NEAR(a.row(i).sum(), 1.0, 1e-9);
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Softmax, MaskedColumnsGetExactlyZeroMass) {
  Rng rng(6);
  Matrix x = random_matrix(2, 5, rng);
  std::vector<bool> valid{true, false, true, true, false};
  Matrix p = ops::softmax_rows(Tensor::constant(x), valid).value();
  for (Index i = 0; i < 2; ++i) {
    EXPECT_EQ(p(i, 1), 0.0);
    EXPECT_EQ(p(i, 4), 0.0);
    EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
  }
}

TEST(Elementwise, ClosedForms) {
  EXPECT_EQ(ops::sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_EQ(ops::relu(Tensor::scalar(-2.0)).item(), 0.0);
  EXPECT_EQ(ops::relu(Tensor::scalar(2.0)).item(), 2.0);
  EXPECT_EQ(ops::tanh(Tensor::scalar(0.0)).item(), 0.0);
  auto c = ops::concat_cols({Tensor::constant(Matrix::Zero(3, 2)), Tensor::constant(Matrix::Zero(3, 4))});
  EXPECT_EQ(c.shape(), (std::vector<Index>{3, 6}));
  auto r = ops::concat_rows({Tensor::constant(Matrix::Zero(2, 3)), Tensor::constant(Matrix::Zero(1, 3))});
  EXPECT_EQ(r.shape(), (std::vector<Index>{3, 3}));
  auto m = ops::mean_rows(Tensor::constant(mat({{1, 2}, {3, 6}})));
  EXPECT_EQ(m.value(), mat({{2, 4}}));
}

TEST(Backward, SumGivesOnes) {
  Rng rng(7);
  Tensor p = Tensor::parameter(random_matrix(3, 4, rng));
  backward(ops::sum(p));
  EXPECT_EQ(p.grad(), Matrix::Ones(3, 4));
}

TEST(Backward, SquareGivesTwiceValue) {
  Rng rng(8);
  Tensor p = Tensor::parameter(random_matrix(3, 4, rng));
  backward(ops::sum(ops::mul(p, p)));
  EXPECT_EQ(p.grad(), Matrix(2 * p.value()));
}

TEST(Backward, ReusedParameterAccumulates) {
  Tensor p = Tensor::parameter(Matrix::Ones(2, 2));
  backward(ops::add(ops::sum(p), ops::sum(p)));
  EXPECT_EQ(p.grad(), Matrix::Constant(2, 2, 2.0));
}

TEST(Backward, NonScalarLossRejected) {
  Tensor p = Tensor::parameter(Matrix::Ones(2, 2));
  EXPECT_THROW(backward(p), ContractError);
}

TEST(GradCheck, QuadraticFormIsExact) {
  Rng rng(9);
  Tensor x = Tensor::parameter(random_matrix(1, 5, rng));
  Matrix a = random_matrix(5, 5, rng);
  Tensor q = Tensor::constant(Matrix(a * a.transpose()));
  auto f = [&] { return ops::sum(ops::mul(ops::matmul(x, q), x)); };
  EXPECT_LT(check(f, {x}, rng), 1e-9);
}

TEST(GradCheck, TanhChainOfDepthThree) {
  Rng rng(10);
  Tensor x = Tensor::parameter(random_matrix(2, 3, rng));
  Tensor w = Tensor::parameter(random_matrix(3, 3, rng));
  auto f = [&] {
    Tensor h = x;
    for (int k = 0; k < 3; ++k) h = ops::tanh(ops::matmul(h, w));
    return ops::sum(h);
  };
  EXPECT_LT(check(f, {x, w}, rng), 1e-6);
}

TEST(GradCheck, EpsOutsideRangeRejected) {
  Rng rng(11);
  Tensor x = Tensor::parameter(Matrix::Ones(1, 1));
  std::vector<Tensor> ps{x};
  auto f = [&] { return ops::sum(x); };
  EXPECT_THROW(grad_check<double>(f, std::span<const Tensor>(ps), 1e-2, rng), std::invalid_argument);
}

// Every differentiable op against central differences on random shapes up
// to 8×8.
TEST(GradCheck, EveryOpOnRandomShapes) {
  Rng rng(12);
  std::uniform_int_distribution<Index> dim(1, 8);
  for (int trial = 0; trial < 10; ++trial) {
    const Index r = dim(rng), c = dim(rng), k = dim(rng);
    Tensor a = Tensor::parameter(random_matrix(r, c, rng));
    Tensor b = Tensor::parameter(random_matrix(r, c, rng));
    Tensor w = Tensor::parameter(random_matrix(c, k, rng));
    Tensor row = Tensor::parameter(random_matrix(1, c, rng));
    Matrix weights = random_matrix(r, c, rng);
    Tensor wc = Tensor::constant(weights);
    auto reduce = [&](const Tensor& t) {
      Rng local(99);
      return ops::sum(ops::mul(t, Tensor::constant(random_matrix(t.rows(), t.cols(), local))));
    };
    std::vector<std::pair<const char*, std::function<Tensor()>>> cases = {
        {"matmul", [&] { return reduce(ops::matmul(a, w)); }},
        {"transpose", [&] { return reduce(ops::transpose(a)); }},
        {"add", [&] { return reduce(ops::add(a, b)); }},
        {"add_row", [&] { return reduce(ops::add_row(a, row)); }},
        {"mul", [&] { return reduce(ops::mul(a, b)); }},
        {"scale", [&] { return reduce(ops::scale(a, 1.7)); }},
        {"tanh", [&] { return reduce(ops::tanh(a)); }},
        {"sigmoid", [&] { return reduce(ops::sigmoid(a)); }},
        {"relu", [&] { return reduce(ops::relu(ops::add(a, wc))); }},
        {"concat_cols", [&] { return reduce(ops::concat_cols({a, b})); }},
        {"concat_rows", [&] { return reduce(ops::concat_rows({a, b})); }},
        {"mean_rows", [&] { return reduce(ops::mean_rows(a)); }},
        {"broadcast_rows", [&] { return reduce(ops::broadcast_rows(row, 3)); }},
        {"softmax_rows", [&] { return reduce(ops::softmax_rows(a)); }},
        {"conv1d_same", [&] { return reduce(ops::conv1d_same(a, ops::concat_rows({w, w, w}), 3)); }},
        {"gather_rows", [&] { return reduce(ops::gather_rows(a, {0, r - 1, 0})); }},
        {"segment_mean_rows", [&] { return reduce(ops::segment_mean_rows(a, {{0}, {0, r - 1}})); }},
        {"mask_rows", [&] {
           std::vector<bool> keep(static_cast<std::size_t>(r), true);
           keep[0] = false;
           return reduce(ops::mask_rows(a, keep));
         }},
        {"bce_sum", [&] {
           Matrix target = Matrix::Zero(r, c);
           target(0, 0) = 1;
           return ops::bce_sum(ops::sigmoid(a), target);
         }},
    };
    for (const auto& [name, f] : cases) {
      EXPECT_LT(check(f, {a, b, w, row}, rng), 1e-4) << name << " trial " << trial;
    }
  }
}

TEST(Dropout, EvalModeIsIdentityAndTrainingPreservesExpectation) {
  Rng rng(13);
  Tensor x = Tensor::constant(Matrix::Ones(200, 50));
  EXPECT_EQ(ops::dropout(x, 0.4, false, rng).value(), x.value());
  Matrix d = ops::dropout(x, 0.4, true, rng).value();
  EXPECT_NEAR(d.mean(), 1.0, 0.05);
  for (Index i = 0; i < d.size(); ++i) {
    const double v = d.data()[i];
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.6) < 1e-12);
  }
}

TEST(BceSum, HalfProbabilityGivesLn2PerCode) {
  Tensor p = Tensor::constant(Matrix::Constant(5, 1, 0.5));
  Matrix y = Matrix::Zero(5, 1);
  y(1, 0) = 1;
  EXPECT_NEAR(ops::bce_sum(p, y).item(), 5 * std::log(2.0), 1e-12);
}

TEST(FloatScalar, OpsInstantiateForSinglePrecision) {
  using TensorF = BasicTensor<float>;
  TensorF p = TensorF::parameter(RowMatrix<float>::Ones(2, 2));
  backward(ops::sum(ops::mul(p, p)));
  EXPECT_EQ(p.grad(), RowMatrix<float>::Constant(2, 2, 2.0f));
}

}  // namespace
}  // namespace hiercode
