// End-to-end acceptance suite. Each test prints one [ACCEPTANCE] line; the
// whole binary doubles as the release gate (ctest target "acceptance").

#include <gtest/gtest.h>

#include <chrono>
#include <iostream>

#include "oracles.hpp"
#include "ttn/analysis.hpp"
#include "ttn/baselines.hpp"
#include "ttn/experiments.hpp"
#include "ttn/sttnn.hpp"
#include "ttn/ttnn.hpp"

using namespace ttn;

namespace {

class Gate {
 public:
  explicit Gate(std::string name) : name_(std::move(name)) {}
  void check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
    EXPECT_TRUE(ok) << what;
  }
  ~Gate() {
    std::cout << "[ACCEPTANCE] " << name_ << ": " << (failures_.empty() ? "PASS" : "FAIL");
    for (const auto& f : failures_) std::cout << "  <" << f << ">";
    std::cout << std::endl;
  }

 private:
  std::string name_;
  std::vector<std::string> failures_;
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

// 1. Every method reproduces an exact-rank input across 20 seeds in < 10 s.
TEST(Acceptance, Exactness) {
  Gate gate("exactness on exact-rank inputs");
  Timer timer;
  IndexTree tree = toy_tree();
  std::vector<Index> shape(6, 6);
  const RankMap stored = RankMap::uniform(tree, 2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TtnTensor in = random_ttn(tree, shape, stored, Decay::none, seed);
    DenseTensor t = to_dense(in);
    TtnnConfig cfg = make_config(tree, shape, 2, 3, DrmSpec{DrmKind::gaussian, seed + 1000});
    const double e1 = rel_error(t, compress_dense(t, tree, cfg));
    const double e2 = rel_error(t, compress_dense_sequential(t, tree, cfg));
    const double e3 = rel_error(t, ttn_svd(t, tree, cfg.ranks));
    const double e4 = rel_error(t, ttn_hmt(t, tree, cfg.ranks, cfg.overs, cfg.spec));
    gate.check(e1 <= 1e-8, "nystrom error " + std::to_string(e1));
    gate.check(e2 <= 1e-8, "sequential error " + std::to_string(e2));
    gate.check(e3 <= 1e-8, "svd baseline error " + std::to_string(e3));
    gate.check(e4 <= 1e-8, "hmt baseline error " + std::to_string(e4));
  }
  gate.check(timer.seconds() < 10.0, "runtime " + std::to_string(timer.seconds()) + " s");
}

// 2. The recovered network equals the dense projector cascades.
TEST(Acceptance, OracleEquivalence) {
  Gate gate("projector-cascade equivalence");
  IndexTree tree = balanced_binary_tree(4);
  std::vector<Index> shape(4, 5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    DenseTensor t = oracle::random_dense(shape, 9000 + seed);
    TtnnConfig cfg = make_config(tree, shape, 2, 2, DrmSpec{DrmKind::gaussian, seed});
    const double d1 =
        rel_error(oracle::projector_cascade(t, tree, cfg), to_dense(compress_dense(t, tree, cfg)));
    gate.check(d1 <= 1e-9, "nystrom vs cascade " + std::to_string(d1));
    const double d2 = rel_error(oracle::projector_cascade_sequential(t, tree, cfg),
                                to_dense(compress_dense_sequential(t, tree, cfg)));
    gate.check(d2 <= 1e-9, "sequential vs cascade " + std::to_string(d2));
  }
}

// 3. Term-by-term accumulation matches single-shot sketching and compression.
TEST(Acceptance, StreamingEquivalence) {
  Gate gate("streaming equivalence");
  IndexTree tree = toy_tree();
  std::vector<Index> shape(6, 4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TtnnConfig cfg = make_config(tree, shape, 2, 2, DrmSpec{DrmKind::gaussian, 300 + seed});
    StreamAccumulator acc(tree, shape, cfg);
    DenseTensor sum(shape);
    const double lambdas[5] = {1.0, -0.5, 2.0, 0.25, -1.5};
    for (int i = 0; i < 5; ++i) {
      DenseTensor h = oracle::random_dense(shape, 100 * seed + i);
      acc.ingest(lambdas[i], h);
      for (Index q = 0; q < sum.size(); ++q)
        sum.data[static_cast<std::size_t>(q)] += lambdas[i] * h.data[static_cast<std::size_t>(q)];
    }
    SketchState direct = sketch_dense(sum, tree, cfg.ranks, cfg.overs, cfg.spec);
    double num = 0, den = 0;
    for (const auto& [k, m] : direct.omega) {
      num += (m - acc.state().omega.at(k)).squaredNorm();
      den += m.squaredNorm();
    }
    for (const auto& [k, m] : direct.psi) {
      num += (m - acc.state().psi.at(k)).squaredNorm();
      den += m.squaredNorm();
    }
    const double state_diff = std::sqrt(num / den);
    gate.check(state_diff <= 1e-12, "state diff " + std::to_string(state_diff));
    const double out_diff =
        rel_error(to_dense(compress_dense(sum, tree, cfg)), to_dense(acc.finalize()));
    gate.check(out_diff <= 1e-9, "output diff " + std::to_string(out_diff));
  }
}

// 4. Structured sketching of a stored network equals the dense path with
// materialized Khatri-Rao maps.
TEST(Acceptance, StructuredSketchEquivalence) {
  Gate gate("structured sketch equivalence");
  IndexTree tree = toy_tree();
  std::vector<Index> shape(6, 4);
  const RankMap r = RankMap::uniform(tree, 3), p = RankMap::uniform(tree, 2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TtnTensor in = random_ttn(tree, shape, RankMap::uniform(tree, 2), Decay::none, 400 + seed);
    DrmSpec spec{DrmKind::khatri_rao, 500 + seed};
    SketchState structured = sketch_ttn(in, tree, r, p, spec);
    SketchState dense = sketch_dense(to_dense(in), tree, r, p, spec);
    double num = 0, den = 0;
    for (const auto& [k, m] : dense.omega) {
      num += (m - structured.omega.at(k)).squaredNorm();
      den += m.squaredNorm();
    }
    for (const auto& [k, m] : dense.psi) {
      num += (m - structured.psi.at(k)).squaredNorm();
      den += m.squaredNorm();
    }
    const double diff = std::sqrt(num / den);
    gate.check(diff <= 1e-10, "state diff " + std::to_string(diff));
  }
}

// 5. The computable per-node deterministic bound holds for every seed, for
// both the plain and the sequential compressor.
TEST(Acceptance, DeterministicBoundAudit) {
  Gate gate("deterministic bound audit");
  Timer timer;
  {
    IndexTree tree = toy_tree();
    DenseTensor t = hilbert_tensor(6, 10);
    NodeSvdCache cache = NodeSvdCache::build(t, tree);
    const RankMap rhat = RankMap::uniform(tree, 4);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      TtnnConfig cfg = make_config(tree, t.shape, 6, 3, DrmSpec{DrmKind::gaussian, seed});
      DrmDraws draws = draw_drms(cfg.spec, tree, t.shape, cfg.ranks, cfg.overs);
      TtnTensor approx = compress_dense(t, tree, cfg);
      BoundReport rep = deterministic_audit(t, tree, cfg, rhat, approx, draws, &cache);
      gate.check(rep.pass, "seed " + std::to_string(seed) + " measured " +
                               std::to_string(rep.measured_error) + " rhs " +
                               std::to_string(rep.rhs_per_node));
    }
  }
  {
    IndexTree tree = balanced_binary_tree(4);
    DenseTensor t = hilbert_tensor(4, 6);
    NodeSvdCache cache = NodeSvdCache::build(t, tree);
    const RankMap rhat = RankMap::uniform(tree, 2);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      TtnnConfig cfg = make_config(tree, t.shape, 4, 3, DrmSpec{DrmKind::gaussian, seed});
      TtnTensor approx = compress_dense_sequential(t, tree, cfg);
      BoundReport rep = deterministic_audit_sequential(t, tree, cfg, rhat, approx, &cache);
      gate.check(rep.pass, "sequential seed " + std::to_string(seed));
    }
  }
  gate.check(timer.seconds() < 60.0, "runtime " + std::to_string(timer.seconds()) + " s");
}

// 6. Monte-Carlo mean error stays below the closed-form Gaussian bound.
TEST(Acceptance, ExpectedBoundAudit) {
  Gate gate("expected bound audit");
  IndexTree tree = balanced_binary_tree(4);
  DenseTensor t = hilbert_tensor(4, 8);
  auto res = expected_audit(t, tree, 6, 4, 4, 200, 42);
  gate.check(res.pass, "mean " + std::to_string(res.mean_error) + " vs rhs " +
                           std::to_string(res.rhs));
}

// 7. Matrix-level per-draw chains hold for 100 seeds; Monte-Carlo means stay
// below the Gaussian expectation bounds over 200 trials.
TEST(Acceptance, MatrixKernelBounds) {
  Gate gate("matrix kernel bounds");
  const int n = 100, r = 10, rhat = 8, p = 5;
  Matrix u = haar_orthogonal(n, n, 7001), w = haar_orthogonal(n, n, 7002);
  Vector s(n);
  for (int i = 0; i < n; ++i) s(i) = std::pow(2.0, -(i + 1));
  Matrix a = u * s.asDiagonal() * w.transpose();
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinV);
  Matrix vhat = svd.matrixV().leftCols(rhat);
  double esvd = 0;
  for (int i = rhat; i < n; ++i)
    esvd += svd.singularValues()(i) * svd.singularValues()(i);
  esvd = std::sqrt(esvd);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
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
    Matrix a1 = vhat.transpose() * x;
    const double rho_f = two_norm(Matrix((x - vhat * a1) * eps_pinv_apply(a1, 0.0)));
    const double rho = std::sqrt(1.0 + rho_f * rho_f);
    gate.check(ehmt <= esvd * rho * (1 + 1e-10),
               "per-draw range bound at seed " + std::to_string(seed));
    Matrix q = economy_qr(a * x).first;
    Matrix b1 = y.transpose() * q;
    const double eta =
        1.0 + two_norm(Matrix(eps_pinv_apply(b1, 0.0) * (y.transpose() - b1 * q.transpose())));
    gate.check(egn <= ehmt * eta * (1 + 1e-10),
               "per-draw two-sided bound at seed " + std::to_string(seed));
  }
  double mean_hmt = 0, mean_gn = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t seed = rng::stream_key(99, rng::kTagTrial, trial);
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
  gate.check(mean_hmt <= hmt_rhs, "mean range-finder error vs expectation bound");
  gate.check(mean_gn <= gn_rhs, "mean two-sided error vs expectation bound");
}

// 8. Dense-compression benchmark trends at full scale (d=6, n=20).
TEST(Acceptance, HilbertTrends) {
  Gate gate("dense compression benchmark trends");
  Timer timer;
  HilbertExperimentConfig cfg;
  cfg.tree = toy_tree();
  cfg.d = 6;
  cfg.n = 20;
  cfg.ranks = {2, 4, 6, 8, 10, 12};
  cfg.p = 3;
  cfg.trials = 30;
  cfg.seed = 20260810;
  auto rows = run_hilbert_experiment(cfg);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 1; i < rows.size(); ++i)
    gate.check(rows[i].ttnn.median_err <= rows[i - 1].ttnn.median_err * (1 + 1e-12),
               "median error not non-increasing at rank " + std::to_string(rows[i].rank));
  for (const auto& row : rows) {
    gate.check(row.ttnn.median_err <= 3.0 * row.sttnn.median_err &&
                   row.sttnn.median_err <= 3.0 * row.ttnn.median_err,
               "sequential within 3x at rank " + std::to_string(row.rank));
    gate.check(row.hmt.median_err <= row.ttnn.median_err,
               "hmt median above nystrom at rank " + std::to_string(row.rank));
    gate.check(row.ttnn.median_err <= 10.0 * row.svd.median_err,
               "nystrom more than 10x svd at rank " + std::to_string(row.rank));
    gate.check(row.sttnn.mean_sketch_flops < row.ttnn.mean_sketch_flops,
               "sequential sketch flops not below at rank " + std::to_string(row.rank));
  }
  gate.check(timer.seconds() < 900.0, "runtime " + std::to_string(timer.seconds()) + " s");
}

// 9. Rounding benchmark trends (n=100, stored rank 40, three decays).
TEST(Acceptance, RoundingTrends) {
  Gate gate("rounding benchmark trends");
  for (Decay decay : {Decay::quadratic, Decay::cubic, Decay::exponential}) {
    RoundingExperimentConfig cfg;
    cfg.tree = toy_tree();
    cfg.n = 100;
    cfg.stored_rank = 40;
    cfg.ranks = {4, 8, 16, 24, 32};
    cfg.p = 10;
    cfg.trials = 10;
    cfg.seed = 811;
    cfg.decay = decay;
    auto rows = run_rounding_experiment(cfg);
    const std::string name = decay == Decay::quadratic ? "quadratic"
                             : decay == Decay::cubic   ? "cubic"
                                                       : "exponential";
    for (const auto& row : rows)
      gate.check(row.ttnn.median_err <= 10.0 * row.svd.median_err,
                 name + ": nystrom above 10x svd at rank " + std::to_string(row.rank));
    if (decay == Decay::exponential) {
      for (std::size_t i = 1; i < rows.size(); ++i)
        gate.check(rows[i].ttnn.median_err < rows[i - 1].ttnn.median_err,
                   "exponential: error not strictly decreasing at rank " +
                       std::to_string(rows[i].rank));
    }
    for (const auto& row : rows) {
      if (row.rank <= 16)
        gate.check(row.ttnn.mean_time < row.svd.mean_time,
                   name + ": nystrom slower than svd at rank " + std::to_string(row.rank));
    }
  }
}

// 10. The reuse plan reproduces the reference contraction layout exactly.
TEST(Acceptance, ReusePlanLayout) {
  Gate gate("reuse plan layout");
  ReusePlan plan = reuse_plan(toy_tree());
  auto expect = [&](NodeKey v, std::vector<NodeKey> want) {
    for (const PlanStep& s : plan.steps) {
      if (s.node == v) {
        gate.check(s.source == want, "source set mismatch at " + to_string(v));
        return;
      }
    }
    gate.check(false, "missing node " + to_string(v));
  };
  expect({1, 1}, {});
  expect({1, 2}, {{1, 1}});
  expect({1, 3}, {{1, 1}, {1, 2}});
  expect({2, 1}, {});
  expect({2, 2}, {{2, 1}});
  expect({2, 3}, {{1, 1}, {1, 2}});
  expect({2, 4}, {{1, 1}, {1, 2}, {2, 3}});
  expect({3, 1}, {});
  expect({3, 2}, {{3, 1}});
}
