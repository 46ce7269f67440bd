#pragma once

#include <Eigen/Dense>
#include <cfloat>
#include <optional>
#include <string>
#include <utility>

#include "ttn/dense_tensor.hpp"
#include "ttn/errors.hpp"
#include "ttn/rng.hpp"

namespace ttn {

// Two-factor approximant left * right.
struct LowRankFactors {
  Matrix left;
  Matrix right;
};

enum class LsMode { fast, stabilized };

struct GnConfig {
  int rank = 1;
  int oversample = 0;
  LsMode mode = LsMode::fast;
  std::uint64_t seed = 0;
  // Stabilized-mode truncation threshold; defaults to 10*u*||core||_2.
  std::optional<double> stab_eps;
};

inline double two_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::BDCSVD<Matrix>(m).singularValues()(0);
}

// a = Q R with Q m x min(m,n) orthonormal and R upper triangular. Rank
// deficiency is permitted; R may be singular.
inline std::pair<Matrix, Matrix> economy_qr(const Matrix& a) {
  const Eigen::Index k = std::min(a.rows(), a.cols());
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), k);
  Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  return {std::move(q), std::move(r)};
}

struct TruncatedSvd {
  Matrix u;      // m x r
  Vector sigma;  // r
  Matrix v;      // n x r
  double tail;   // sqrt(sum of squared discarded singular values)
};

inline TruncatedSvd truncated_svd(const Matrix& a, int r) {
  const int full = static_cast<int>(std::min(a.rows(), a.cols()));
  if (r > full) {
    warn("truncated_svd: rank " + std::to_string(r) + " clamped to " + std::to_string(full));
    r = full;
  }
  if (r < 1) throw UsageError("truncated_svd: rank must be >= 1");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  TruncatedSvd out;
  out.u = svd.matrixU().leftCols(r);
  out.sigma = svd.singularValues().head(r);
  out.v = svd.matrixV().leftCols(r);
  double t = 0.0;
  for (int i = r; i < full; ++i) t += svd.singularValues()(i) * svd.singularValues()(i);
  out.tail = std::sqrt(t);
  return out;
}

// Pseudoinverse discarding singular values <= eps; eps = 0 gives Moore-Penrose.
inline Matrix eps_pinv_apply(const Matrix& m, double eps) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Matrix out = Matrix::Zero(m.cols(), m.rows());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > eps)
      out += (1.0 / s(i)) * svd.matrixV().col(i) * svd.matrixU().col(i).transpose();
  }
  return out;
}

// argmin_X ||B - X R||_F for square upper-triangular R. Fast mode back-solves
// and refuses exactly singular R; stabilized mode multiplies by the
// eps-pseudoinverse with eps = 10*u*||R||_2.
inline Matrix stabilized_ls_solve(const Matrix& r, const Matrix& b, LsMode mode) {
  if (r.rows() != r.cols())
    throw UsageError("stabilized_ls_solve: R must be square (economy QR factor)");
  if (b.cols() != r.cols())
    throw UsageError("stabilized_ls_solve: dimension mismatch between B and R");
  if (mode == LsMode::fast) {
    for (Eigen::Index i = 0; i < r.rows(); ++i)
      if (r(i, i) == 0.0)
        throw PreconditionError("stabilized_ls_solve: singular triangular factor in fast mode; use stabilized");
    Matrix xt = r.transpose().triangularView<Eigen::Lower>().solve(b.transpose());
    return xt.transpose();
  }
  const double eps = 10.0 * DBL_EPSILON * two_norm(r);
  flops::add(static_cast<std::uint64_t>(b.rows()) * r.rows() * r.cols());
  return b * eps_pinv_apply(r, eps);
}

// Q(Q^T a) with Q = orth(a X) for a Gaussian X.
inline LowRankFactors hmt(const Matrix& a, int r, std::uint64_t seed) {
  if (r < 1 || r > a.cols()) throw UsageError("hmt: need 1 <= r <= cols");
  const Matrix x = rng::gaussian(a.cols(), r, rng::stream_key(seed, rng::kTagKernel, 1));
  Matrix q = economy_qr(a * x).first;
  Matrix right = q.transpose() * a;
  return {std::move(q), std::move(right)};
}

// Two-sided sketched approximant a X (Y^T a X)^+ Y^T a.
inline LowRankFactors gn(const Matrix& a, const GnConfig& cfg) {
  const int r = cfg.rank, p = cfg.oversample;
  if (r < 1 || p < 0) throw UsageError("gn: need r >= 1 and p >= 0");
  if (r + p > a.rows() || r > a.cols())
    throw UsageError("gn: need r + p <= rows and r <= cols");
  const Matrix x = rng::gaussian(a.cols(), r, rng::stream_key(cfg.seed, rng::kTagKernel, 1));
  const Matrix y = rng::gaussian(a.rows(), r + p, rng::stream_key(cfg.seed, rng::kTagKernel, 2));
  const Matrix ax = a * x;
  const Matrix yta = y.transpose() * a;
  const Matrix core = yta * x;  // (r+p) x r
  if (cfg.mode == LsMode::fast) {
    auto [q, rf] = economy_qr(core);
    for (Eigen::Index i = 0; i < rf.rows(); ++i)
      if (rf(i, i) == 0.0)
        throw PreconditionError("gn: sketched core is rank-deficient in fast mode; use stabilized");
    Matrix left = stabilized_ls_solve(rf, ax, LsMode::fast);
    Matrix right = q.transpose() * yta;
    return {std::move(left), std::move(right)};
  }
  const double eps = cfg.stab_eps ? *cfg.stab_eps : 10.0 * DBL_EPSILON * two_norm(core);
  Eigen::JacobiSVD<Matrix> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  int kept = 0;
  while (kept < s.size() && s(kept) > eps) ++kept;
  if (kept == 0) {
    return {Matrix::Zero(a.rows(), 1), Matrix::Zero(1, a.cols())};
  }
  Matrix left = ax * svd.matrixV().leftCols(kept) *
                s.head(kept).cwiseInverse().asDiagonal();
  Matrix right = svd.matrixU().leftCols(kept).transpose() * yta;
  return {std::move(left), std::move(right)};
}

// n x k with orthonormal columns, Haar-distributed: QR of a Gaussian with the
// R-diagonal sign correction.
inline Matrix haar_orthogonal(Index n, Index k, std::uint64_t seed) {
  if (k < 1 || k > n) throw UsageError("haar_orthogonal: need 1 <= k <= n");
  const Matrix g = rng::gaussian(n, k, rng::stream_key(seed, rng::kTagKernel, 3));
  auto [q, r] = economy_qr(g);
  for (Eigen::Index i = 0; i < k; ++i)
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  return q;
}

}  // namespace ttn
