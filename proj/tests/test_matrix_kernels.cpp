#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ttn/matrix_kernels.hpp"

using namespace ttn;

namespace {

// 100x100 test matrix with singular values 2^-i and Haar factors.
Matrix dyadic_decay_matrix(int n, std::uint64_t seed) {
  Matrix u = haar_orthogonal(n, n, seed);
  Matrix v = haar_orthogonal(n, n, seed + 1);
  Vector s(n);
  for (int i = 0; i < n; ++i) s(i) = std::pow(2.0, -(i + 1));
  return u * s.asDiagonal() * v.transpose();
}

double svd_tail(const Matrix& a, int rhat) {
  Eigen::BDCSVD<Matrix> svd(a);
  double acc = 0;
  for (Eigen::Index i = rhat; i < svd.singularValues().size(); ++i)
    acc += svd.singularValues()(i) * svd.singularValues()(i);
  return std::sqrt(acc);
}

}  // namespace

TEST(EconomyQr, Identity) {
  auto [q, r] = economy_qr(Matrix::Identity(4, 4));
  EXPECT_LT((q * r - Matrix::Identity(4, 4)).norm(), 1e-14);
  EXPECT_LT((q.transpose() * q - Matrix::Identity(4, 4)).norm(), 1e-14);
}

TEST(EconomyQr, ScaledOrthonormalGivesDiagonalR) {
  Matrix q0 = haar_orthogonal(6, 3, 7);
  Vector scale(3);
  scale << 2.0, 3.0, 0.5;
  auto [q, r] = economy_qr(Matrix(q0 * scale.asDiagonal()));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) EXPECT_NEAR(r(i, j), 0.0, 1e-12);
}

TEST(EconomyQr, Reconstructs) {
  Matrix a = rng::gaussian(6, 3, 5);
  auto [q, r] = economy_qr(a);
  EXPECT_EQ(q.cols(), 3);
  EXPECT_LT((q * r - a).norm(), 1e-12 * a.norm());
  EXPECT_LT((q.transpose() * q - Matrix::Identity(3, 3)).norm(), 1e-13);
}

TEST(TruncatedSvd, Diagonal321) {
  Matrix a = Matrix::Zero(3, 3);
  a(0, 0) = 3;
  a(1, 1) = 2;
  a(2, 2) = 1;
  auto res = truncated_svd(a, 2);
  EXPECT_NEAR(res.tail, 1.0, 1e-14);
  EXPECT_NEAR(res.sigma(0), 3.0, 1e-14);
  EXPECT_NEAR(res.sigma(1), 2.0, 1e-14);
}

TEST(TruncatedSvd, RankOneZeroTail) {
  Matrix a = rng::gaussian(5, 1, 3) * rng::gaussian(4, 1, 4).transpose();
  auto res = truncated_svd(a, 1);
  EXPECT_NEAR(res.tail, 0.0, 1e-12 * a.norm());
  EXPECT_LT((res.u * res.sigma.asDiagonal() * res.v.transpose() - a).norm(), 1e-12 * a.norm());
}

TEST(TruncatedSvd, MatchesFullDecomposition) {
  Matrix a = rng::gaussian(8, 5, 6);
  Eigen::JacobiSVD<Matrix> full(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  auto res = truncated_svd(a, 3);
  for (int i = 0; i < 3; ++i)
    EXPECT_NEAR(res.sigma(i), full.singularValues()(i), 1e-12 * full.singularValues()(0));
  double tail = 0;
  for (int i = 3; i < 5; ++i)
    tail += full.singularValues()(i) * full.singularValues()(i);
  EXPECT_NEAR(res.tail, std::sqrt(tail), 1e-12);
}

TEST(TruncatedSvd, OverlargeRankClampsWithNotice) {
  Matrix a = rng::gaussian(4, 3, 8);
  auto res = truncated_svd(a, 10);
  EXPECT_EQ(res.sigma.size(), 3);
}

TEST(EpsPinv, ThresholdDropsTinySingularValues) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 2.0;
  a(1, 1) = 1e-20;
  Matrix p = eps_pinv_apply(a, 1e-10);
  EXPECT_NEAR(p(0, 0), 0.5, 1e-14);
  EXPECT_NEAR(p(1, 1), 0.0, 1e-14);
}

TEST(EpsPinv, OrthogonalGivesTranspose) {
  Matrix q = haar_orthogonal(5, 5, 9);
  Matrix p = eps_pinv_apply(q, 0.5);
  EXPECT_LT((p - q.transpose()).norm(), 1e-12);
}

TEST(EpsPinv, PenroseConditionsAtZero) {
  Matrix a = rng::gaussian(4, 3, 10);
  Matrix p = eps_pinv_apply(a, 0.0);
  EXPECT_LT((a * p * a - a).norm(), 1e-12 * a.norm());
  EXPECT_LT((p * a * p - p).norm(), 1e-12 * p.norm());
  EXPECT_LT(((a * p).transpose() - a * p).norm(), 1e-12);
  EXPECT_LT(((p * a).transpose() - p * a).norm(), 1e-12);
}

TEST(StabilizedLs, IdentityFactor) {
  Matrix b = rng::gaussian(4, 3, 11);
  EXPECT_LT((stabilized_ls_solve(Matrix::Identity(3, 3), b, LsMode::fast) - b).norm(), 1e-14);
}

TEST(StabilizedLs, TinyDiagonalZeroedInStabilizedMode) {
  Matrix r = Matrix::Zero(2, 2);
  r(0, 0) = 1.0;
  r(1, 1) = 1e-18;
  Matrix b = rng::gaussian(3, 2, 12);
  Matrix x = stabilized_ls_solve(r, b, LsMode::stabilized);
  EXPECT_LT((x.col(0) - b.col(0)).norm(), 1e-12);
  EXPECT_NEAR(x.col(1).norm(), 0.0, 1e-12);
}

TEST(StabilizedLs, MatchesNormalEquations) {
  Matrix r = Matrix::Identity(3, 3) * 2.0;
  r(0, 1) = 0.5;
  r(1, 2) = -0.3;
  Matrix b = rng::gaussian(5, 3, 13);
  Matrix x = stabilized_ls_solve(r, b, LsMode::fast);
  // argmin ||b - x r||: x r r^T = b r^T
  Matrix lhs = x * r * r.transpose();
  Matrix rhs = b * r.transpose();
  EXPECT_LT((lhs - rhs).norm(), 1e-12 * rhs.norm());
}

TEST(StabilizedLs, SingularFastModeThrows) {
  Matrix r = Matrix::Zero(2, 2);
  r(0, 0) = 1.0;
  Matrix b = Matrix::Ones(2, 2);
  EXPECT_THROW(stabilized_ls_solve(r, b, LsMode::fast), PreconditionError);
}

TEST(Hmt, ExactRankRecovery) {
  Matrix a = rng::gaussian(8, 3, 14) * rng::gaussian(3, 7, 15);
  auto f = hmt(a, 3, 99);
  EXPECT_LT((f.left * f.right - a).norm(), 1e-10 * a.norm());
}

TEST(Hmt, FullRankExact) {
  Matrix a = rng::gaussian(6, 4, 16);
  auto f = hmt(a, 4, 100);
  EXPECT_LT((f.left * f.right - a).norm(), 1e-11 * a.norm());
}

TEST(Gn, ExactRankRecovery) {
  Matrix a = rng::gaussian(9, 3, 17) * rng::gaussian(3, 8, 18);
  for (LsMode mode : {LsMode::fast, LsMode::stabilized}) {
    GnConfig cfg;
    cfg.rank = 3;
    cfg.oversample = 2;
    cfg.mode = mode;
    cfg.seed = 101;
    auto f = gn(a, cfg);
    EXPECT_LT((f.left * f.right - a).norm(), 1e-8 * a.norm());
  }
}

TEST(Gn, ZeroMatrixGivesZero) {
  Matrix a = Matrix::Zero(6, 5);
  GnConfig cfg;
  cfg.rank = 2;
  cfg.oversample = 2;
  cfg.mode = LsMode::stabilized;
  cfg.seed = 5;
  auto f = gn(a, cfg);
  EXPECT_NEAR((f.left * f.right).norm(), 0.0, 1e-14);
}

TEST(Gn, StabilizedAtZeroEpsMatchesFast) {
  Matrix a = dyadic_decay_matrix(30, 42);
  GnConfig fast;
  fast.rank = 6;
  fast.oversample = 3;
  fast.mode = LsMode::fast;
  fast.seed = 7;
  GnConfig stab = fast;
  stab.mode = LsMode::stabilized;
  stab.stab_eps = 0.0;
  Matrix af = gn(a, fast).left * gn(a, fast).right;
  Matrix as = gn(a, stab).left * gn(a, stab).right;
  EXPECT_LT((af - as).norm(), 1e-10 * af.norm());
}

// Per-draw chain: hmt error <= tail * rho and gn error <= hmt error * eta,
// with the factors computed from the drawn sketches.
TEST(Bounds, PerDrawChain) {
  const int n = 60, r = 10, rhat = 8, p = 5;
  Matrix a = dyadic_decay_matrix(n, 3);
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinV | Eigen::ComputeThinU);
  Matrix vhat = svd.matrixV().leftCols(rhat);
  const double esvd = svd_tail(a, rhat);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Matrix x = rng::gaussian(n, r, rng::stream_key(seed, rng::kTagKernel, 1));
    const Matrix y = rng::gaussian(n, r + p, rng::stream_key(seed, rng::kTagKernel, 2));
    auto hf = hmt(a, r, seed);
    const double ehmt = (a - hf.left * hf.right).norm();
    GnConfig cfg;
    cfg.rank = r;
    cfg.oversample = p;
    cfg.seed = seed;
    auto gf = gn(a, cfg);
    const double egn = (a - gf.left * gf.right).norm();
    // rho = sqrt(1 + ||(I-VV^T)X (V^T X)^+||^2)
    Matrix a1 = vhat.transpose() * x;
    double rho_f = two_norm(Matrix((x - vhat * a1) * eps_pinv_apply(a1, 0.0)));
    double rho = std::sqrt(1.0 + rho_f * rho_f);
    EXPECT_LE(ehmt, esvd * rho * (1 + 1e-10));
    // eta = 1 + ||(Y^T Q)^+ Y^T Q_perp||
    Matrix q = economy_qr(a * x).first;
    Matrix b1 = y.transpose() * q;
    Matrix yqp = y.transpose() - b1 * q.transpose();
    double eta = 1.0 + two_norm(Matrix(eps_pinv_apply(b1, 0.0) * yqp));
    EXPECT_LE(egn, ehmt * eta * (1 + 1e-10));
  }
}

// Gaussian expectation bounds, small Monte-Carlo version.
TEST(Bounds, ExpectationMonteCarlo) {
  const int n = 60, r = 10, rhat = 8, p = 5, trials = 60;
  Matrix a = dyadic_decay_matrix(n, 4);
  const double esvd = svd_tail(a, rhat);
  double mean_hmt = 0, mean_gn = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t seed = rng::stream_key(77, rng::kTagTrial, trial);
    auto hf = hmt(a, r, seed);
    mean_hmt += (a - hf.left * hf.right).norm();
    GnConfig cfg;
    cfg.rank = r;
    cfg.oversample = p;
    cfg.seed = seed;
    auto gf = gn(a, cfg);
    mean_gn += (a - gf.left * gf.right).norm();
  }
  mean_hmt /= trials;
  mean_gn /= trials;
  const double hmt_rhs = esvd * std::sqrt(1.0 + double(rhat) / (r - rhat - 1));
  const double gn_rhs = hmt_rhs * std::sqrt(1.0 + double(r) / (p - 1));
  EXPECT_LE(mean_hmt, hmt_rhs);
  EXPECT_LE(mean_gn, gn_rhs);
}

TEST(HaarOrthogonal, OrthonormalColumns) {
  Matrix q = haar_orthogonal(8, 5, 21);
  EXPECT_LT((q.transpose() * q - Matrix::Identity(5, 5)).norm(), 1e-12);
}

TEST(HaarOrthogonal, SquareIsOrthogonal) {
  Matrix q = haar_orthogonal(6, 6, 22);
  EXPECT_LT((q * q.transpose() - Matrix::Identity(6, 6)).norm(), 1e-12);
  EXPECT_LT((q.transpose() * q - Matrix::Identity(6, 6)).norm(), 1e-12);
}

TEST(HaarOrthogonal, FirstMomentNearZero) {
  const int n = 16, draws = 1000;
  double acc = 0;
  for (int i = 0; i < draws; ++i) {
    Matrix q = haar_orthogonal(n, 2, 1000 + i);
    acc += q.mean();
  }
  EXPECT_LE(std::abs(acc / draws), 0.01);
}

TEST(Determinism, SameSeedSameDraws) {
  Matrix a = rng::gaussian(7, 4, rng::stream_key(5, 1, 2, 3));
  Matrix b = rng::gaussian(7, 4, rng::stream_key(5, 1, 2, 3));
  EXPECT_EQ((a - b).norm(), 0.0);
  Matrix c = rng::gaussian(7, 4, rng::stream_key(5, 1, 2, 4));
  EXPECT_GT((a - c).norm(), 0.0);
}
