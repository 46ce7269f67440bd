#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "ttn/dense_tensor.hpp"

using namespace ttn;

namespace {

DenseTensor iota_tensor(const std::vector<Index>& shape) {
  DenseTensor t(shape);
  for (Index i = 0; i < t.size(); ++i) t.data[static_cast<std::size_t>(i)] = double(i + 1);
  return t;
}

}  // namespace

TEST(Matricize, IdentityCaseOnMatrix) {
  DenseTensor t = iota_tensor({2, 2});
  Matrix m = matricize(t, {1});
  EXPECT_EQ(m.rows(), 2);
  EXPECT_EQ(m.cols(), 2);
  // first index fastest: entry (i1, i2) = data[i1 + 2*i2]
  EXPECT_DOUBLE_EQ(m(0, 0), 1);
  EXPECT_DOUBLE_EQ(m(1, 0), 2);
  EXPECT_DOUBLE_EQ(m(0, 1), 3);
  EXPECT_DOUBLE_EQ(m(1, 1), 4);
}

TEST(Matricize, Cube222MiddleMode) {
  DenseTensor t = iota_tensor({2, 2, 2});
  Matrix m = matricize(t, {2});
  ASSERT_EQ(m.rows(), 2);
  ASSERT_EQ(m.cols(), 4);
  // expected values enumerated from the row/column index maps: rows over i2,
  // columns over (i1, i3) with i1 fastest
  for (Index i1 = 0; i1 < 2; ++i1)
    for (Index i2 = 0; i2 < 2; ++i2)
      for (Index i3 = 0; i3 < 2; ++i3) {
        const double v = t.at({i1, i2, i3});
        EXPECT_DOUBLE_EQ(m(i2, i1 + 2 * i3), v);
      }
  EXPECT_DOUBLE_EQ(m(0, 0), 1);
  EXPECT_DOUBLE_EQ(m(1, 3), 8);
}

TEST(Matricize, RoundTrip) {
  DenseTensor t = oracle::random_dense({3, 4, 2, 5}, 7);
  for (const std::vector<int>& modes :
       std::vector<std::vector<int>>{{1}, {2, 4}, {1, 3}, {1, 2, 3, 4}, {3}}) {
    Matrix m = matricize(t, modes);
    DenseTensor back = unmatricize(m, t.shape, modes);
    EXPECT_EQ(back.shape, t.shape);
    for (Index i = 0; i < t.size(); ++i)
      ASSERT_DOUBLE_EQ(back.data[static_cast<std::size_t>(i)],
                       t.data[static_cast<std::size_t>(i)]);
  }
}

TEST(Matricize, PreservesEntriesAndNorm) {
  DenseTensor t = oracle::random_dense({3, 2, 4}, 11);
  std::vector<double> sorted_data = t.data;
  std::sort(sorted_data.begin(), sorted_data.end());
  for (const std::vector<int>& modes : std::vector<std::vector<int>>{{1}, {2}, {3}, {1, 3}}) {
    Matrix m = matricize(t, modes);
    std::vector<double> vals(m.data(), m.data() + m.size());
    std::sort(vals.begin(), vals.end());
    EXPECT_EQ(vals, sorted_data);
    EXPECT_NEAR(frobenius_norm(m), frobenius_norm(t), 1e-14 * frobenius_norm(t));
  }
}

TEST(Matricize, RejectsBadModeSets) {
  DenseTensor t = iota_tensor({2, 2});
  EXPECT_THROW(matricize(t, {0}), UsageError);
  EXPECT_THROW(matricize(t, {3}), UsageError);
  EXPECT_THROW(matricize(t, {1, 1}), UsageError);
  EXPECT_THROW(matricize(t, {2, 1}), UsageError);
  EXPECT_THROW(matricize(t, {}), UsageError);
}

TEST(ModeContract, IdentityLeavesTensorUnchanged) {
  DenseTensor t = oracle::random_dense({3, 4, 2}, 3);
  for (int k = 1; k <= 3; ++k) {
    const Index n = t.shape[static_cast<std::size_t>(k - 1)];
    DenseTensor id = tensor_from_matrix(Matrix::Identity(n, n), {n, n});
    DenseTensor r = mode_contract(t, {k}, id);
    EXPECT_EQ(r.shape, t.shape);
    for (Index i = 0; i < t.size(); ++i)
      ASSERT_NEAR(r.data[static_cast<std::size_t>(i)], t.data[static_cast<std::size_t>(i)],
                  1e-14);
  }
}

TEST(ModeContract, SummingOnesGivesTwos) {
  DenseTensor ones({2, 2, 2});
  std::fill(ones.data.begin(), ones.data.end(), 1.0);
  DenseTensor v({2});  // row-sum vector of ones
  v.data = {1.0, 1.0};
  DenseTensor r = mode_contract(ones, {1}, v);
  ASSERT_EQ(r.shape, (std::vector<Index>{2, 2}));
  for (double x : r.data) EXPECT_DOUBLE_EQ(x, 2.0);
}

TEST(ModeContract, MatchesMatricizeProduct) {
  DenseTensor t = oracle::random_dense({3, 4, 5}, 17);
  Matrix u = rng::gaussian(4, 2, 23);
  DenseTensor ut = tensor_from_matrix(u, {4, 2});
  DenseTensor r = mode_contract(t, {2}, ut);
  ASSERT_EQ(r.shape, (std::vector<Index>{3, 2, 5}));
  Matrix expect = u.transpose() * matricize(t, {2});  // 2 x 15
  Matrix got = matricize(r, {2});
  EXPECT_LT((expect - got).norm(), 1e-13 * expect.norm());
}

TEST(ModeContract, DisjointContractionsCommute) {
  DenseTensor t = oracle::random_dense({3, 4, 5, 2}, 29);
  Matrix a = rng::gaussian(4, 2, 1), b = rng::gaussian(2, 3, 2);
  DenseTensor at = tensor_from_matrix(a, {4, 2}), bt = tensor_from_matrix(b, {2, 3});
  DenseTensor r1 = mode_contract(mode_contract(t, {2}, at), {4}, bt);
  DenseTensor r2 = mode_contract(mode_contract(t, {4}, bt), {2}, at);
  ASSERT_EQ(r1.shape, r2.shape);
  double num = 0, den = 0;
  for (Index i = 0; i < r1.size(); ++i) {
    const double d = r1.data[static_cast<std::size_t>(i)] - r2.data[static_cast<std::size_t>(i)];
    num += d * d;
    den += r1.data[static_cast<std::size_t>(i)] * r1.data[static_cast<std::size_t>(i)];
  }
  EXPECT_LT(std::sqrt(num), 1e-12 * std::sqrt(den));
}

TEST(ModeContract, SizeMismatchThrows) {
  DenseTensor t = oracle::random_dense({3, 4}, 5);
  DenseTensor u = tensor_from_matrix(Matrix::Identity(5, 5), {5, 5});
  EXPECT_THROW(mode_contract(t, {1}, u), UsageError);
}

TEST(Kron, IdentityTimesIdentity) {
  Matrix r = kron(Matrix::Identity(2, 2), Matrix::Identity(3, 3));
  EXPECT_LT((r - Matrix::Identity(6, 6)).norm(), 1e-15);
}

TEST(Kron, ScalarFactor) {
  Matrix a(1, 1);
  a << 2.0;
  Matrix b = rng::gaussian(3, 2, 4);
  EXPECT_LT((kron(a, b) - 2.0 * b).norm(), 1e-15);
}

TEST(Kron, MixedProductProperty) {
  Matrix a = rng::gaussian(2, 2, 5), b = rng::gaussian(2, 2, 6);
  Matrix x = rng::gaussian(2, 1, 7), y = rng::gaussian(2, 1, 8);
  Matrix lhs = kron(a, b) * kron(x, y);
  Matrix rhs = kron(Matrix(a * x), Matrix(b * y));
  EXPECT_LT((lhs - rhs).norm(), 1e-13);
}

TEST(KhatriRao, IdentityColumns) {
  Matrix r = khatri_rao(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  ASSERT_EQ(r.rows(), 4);
  ASSERT_EQ(r.cols(), 2);
  Matrix expect(4, 2);
  expect << 1, 0, 0, 0, 0, 0, 0, 1;  // e1 kron e1, e2 kron e2
  EXPECT_LT((r - expect).norm(), 1e-15);
}

TEST(KhatriRao, SingleColumnIsKron) {
  Matrix a = rng::gaussian(3, 1, 9), b = rng::gaussian(2, 1, 10);
  EXPECT_LT((khatri_rao(a, b) - kron(a, b)).norm(), 1e-15);
}

TEST(KhatriRao, ColumnsMatchKron) {
  Matrix a = rng::gaussian(3, 4, 11), b = rng::gaussian(2, 4, 12);
  Matrix r = khatri_rao(a, b);
  EXPECT_EQ(r.rows(), a.rows() * b.rows());
  EXPECT_EQ(r.cols(), a.cols());
  for (int j = 0; j < 4; ++j) {
    Matrix kj = kron(Matrix(a.col(j)), Matrix(b.col(j)));
    EXPECT_LT((r.col(j) - kj.col(0)).norm(), 1e-15);
  }
}

TEST(KhatriRao, ColumnMismatchThrows) {
  EXPECT_THROW(khatri_rao(Matrix::Identity(2, 2), Matrix::Identity(2, 3)), UsageError);
}

TEST(FrobeniusNorm, BasicValues) {
  DenseTensor z({2, 2, 2});
  EXPECT_DOUBLE_EQ(frobenius_norm(z), 0.0);
  DenseTensor e1({3});
  e1.data = {1, 0, 0};
  EXPECT_DOUBLE_EQ(frobenius_norm(e1), 1.0);
  DenseTensor ones({2, 2, 2});
  std::fill(ones.data.begin(), ones.data.end(), 1.0);
  EXPECT_DOUBLE_EQ(frobenius_norm(ones), std::sqrt(8.0));
}

TEST(HilbertTensor, KnownEntries) {
  DenseTensor h6 = hilbert_tensor(6, 2);
  EXPECT_DOUBLE_EQ(h6.at({0, 0, 0, 0, 0, 0}), 1.0 / 7.0);
  DenseTensor h1 = hilbert_tensor(1, 2);
  EXPECT_DOUBLE_EQ(h1.at({0}), 0.5);
  EXPECT_DOUBLE_EQ(h1.at({1}), 1.0 / 3.0);
}

TEST(HilbertTensor, PermutationSymmetry) {
  DenseTensor h = hilbert_tensor(3, 4);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j)
      for (Index k = 0; k < 4; ++k) {
        EXPECT_DOUBLE_EQ(h.at({i, j, k}), h.at({k, i, j}));
        EXPECT_DOUBLE_EQ(h.at({i, j, k}), h.at({j, i, k}));
      }
}

TEST(PermuteModes, InverseRecovers) {
  DenseTensor t = oracle::random_dense({2, 3, 4}, 31);
  DenseTensor p = permute_modes(t, {3, 1, 2});
  ASSERT_EQ(p.shape, (std::vector<Index>{4, 2, 3}));
  DenseTensor back = permute_modes(p, {2, 3, 1});
  EXPECT_EQ(back.shape, t.shape);
  for (Index i = 0; i < t.size(); ++i)
    ASSERT_DOUBLE_EQ(back.data[static_cast<std::size_t>(i)], t.data[static_cast<std::size_t>(i)]);
  for (Index a = 0; a < 2; ++a)
    for (Index b = 0; b < 3; ++b)
      for (Index c = 0; c < 4; ++c) ASSERT_DOUBLE_EQ(p.at({c, a, b}), t.at({a, b, c}));
}
