#pragma once

#include <chrono>
#include <map>
#include <string>
#include <vector>

#include "ttn/matrix_kernels.hpp"
#include "ttn/sketch.hpp"
#include "ttn/ttn_tensor.hpp"

namespace ttn {

struct TtnnConfig {
  RankMap ranks;
  RankMap overs;
  DrmSpec spec;
  LsMode ls_mode = LsMode::fast;
};

// Uniform (r, p) config with per-node feasibility clamping: r <= min(n_I,
// n_rest) and r + p <= n_I, reduced with a warning rather than rejected.
inline TtnnConfig make_config(const IndexTree& tree, const std::vector<Index>& shape, int r,
                              int p, DrmSpec spec = {}, LsMode ls = LsMode::fast) {
  if (r < 1 || p < 0) throw UsageError("make_config: need r >= 1 and p >= 0");
  TtnnConfig cfg;
  cfg.spec = spec;
  cfg.ls_mode = ls;
  for (NodeKey v : tree.nonroot_nodes()) {
    const auto& idx = tree.node(v).indices;
    const Index ni = detail::phys_size(shape, idx);
    const Index nrest = detail::phys_size(shape, detail::complement_modes(tree, idx));
    int rv = r, pv = p;
    if (rv > std::min(ni, nrest)) {
      rv = static_cast<int>(std::min(ni, nrest));
      warn("rank clamped to " + std::to_string(rv) + " at node " + to_string(v));
    }
    if (rv + pv > ni) {
      pv = static_cast<int>(ni) - rv;
      warn("oversample clamped to " + std::to_string(pv) + " at node " + to_string(v));
    }
    cfg.ranks.r[v] = rv;
    cfg.overs.r[v] = pv;
  }
  return cfg;
}

struct CompressReport {
  double sketch_seconds = 0.0;
  double recover_seconds = 0.0;
  std::uint64_t sketch_flops = 0;
};

// Recovery phase: per node an economy QR of Omega, then the core least-squares
// solves against the QR factor.
inline TtnTensor recover(const SketchState& state, const TtnnConfig& cfg) {
  if (!(state.ranks == cfg.ranks) || !(state.overs == cfg.overs))
    throw UsageError("recover: state rank/oversample maps do not match the config");
  const IndexTree& tree = state.tree;
  std::map<NodeKey, Matrix> z;
  std::map<NodeKey, Matrix> rfac;
  for (NodeKey v : tree.nonroot_nodes()) {
    auto [q, rf] = economy_qr(state.omega.at(v));
    z[v] = std::move(q);
    rfac[v] = std::move(rf);
  }
  TtnTensor out;
  out.tree = tree;
  out.shape = state.shape;
  auto solve = [&](NodeKey v, const Matrix& b) -> Matrix {
    try {
      return stabilized_ls_solve(rfac.at(v), b, cfg.ls_mode);
    } catch (const PreconditionError& e) {
      throw PreconditionError("recover at node " + to_string(v) + ": " + e.what());
    }
  };
  for (NodeKey v : tree.nonroot_nodes()) {
    if (tree.is_leaf(v)) {
      Matrix b = solve(v, state.psi.at(v));  // n x r
      out.leaves[v] = b.transpose();         // stored r x n
    } else {
      auto kids = tree.children(v);
      std::vector<Index> tshape;
      for (NodeKey c : kids)
        tshape.push_back(state.ranks.at(c) + state.overs.at(c));
      tshape.push_back(state.psi.at(v).cols());
      DenseTensor cur = tensor_from_matrix(state.psi.at(v), tshape);
      for (std::size_t c = 0; c < kids.size(); ++c) {
        const Matrix& zc = z.at(kids[c]);
        cur = mode_contract(cur, {static_cast<int>(c) + 1},
                            tensor_from_matrix(zc, {zc.rows(), zc.cols()}));
      }
      std::vector<int> rows(kids.size());
      for (std::size_t q = 0; q < kids.size(); ++q) rows[q] = static_cast<int>(q) + 1;
      Matrix w = matricize(cur, rows);  // prod(r_c) x r
      Matrix b = solve(v, w);
      std::vector<Index> cshape{static_cast<Index>(b.cols())};
      for (NodeKey c : kids) cshape.push_back(state.ranks.at(c));
      out.transfer[v] = unmatricize(b.transpose(), cshape, {1});
    }
  }
  {
    auto kids = tree.children({0, 1});
    std::vector<Index> tshape;
    for (NodeKey c : kids) tshape.push_back(state.ranks.at(c) + state.overs.at(c));
    DenseTensor cur = tensor_from_matrix(state.psi.at({0, 1}), tshape);
    for (std::size_t c = 0; c < kids.size(); ++c) {
      const Matrix& zc = z.at(kids[c]);
      cur = mode_contract(cur, {static_cast<int>(c) + 1},
                          tensor_from_matrix(zc, {zc.rows(), zc.cols()}));
    }
    out.root_core = cur;
  }
  return out;
}

// Sketch then recover; deterministic given the config.
inline TtnTensor compress_dense(const DenseTensor& t, const IndexTree& tree,
                                const TtnnConfig& cfg, CompressReport* report = nullptr,
                                const DrmDraws* draws = nullptr) {
  namespace ch = std::chrono;
  flops::Scope scope;
  auto t0 = ch::steady_clock::now();
  SketchState s = sketch_dense(t, tree, cfg.ranks, cfg.overs, cfg.spec, draws);
  auto t1 = ch::steady_clock::now();
  const std::uint64_t sflops = scope.elapsed();
  TtnTensor out = recover(s, cfg);
  auto t2 = ch::steady_clock::now();
  if (report) {
    report->sketch_seconds = ch::duration<double>(t1 - t0).count();
    report->recover_seconds = ch::duration<double>(t2 - t1).count();
    report->sketch_flops = sflops;
  }
  return out;
}

// Single-pass accumulator over a linear combination of terms; every term is
// sketched once with the same DRMs and only the small state is kept.
class StreamAccumulator {
 public:
  StreamAccumulator(const IndexTree& tree, const std::vector<Index>& shape, TtnnConfig cfg)
      : cfg_(std::move(cfg)),
        state_(zero_sketch_state(tree, shape, cfg_.ranks, cfg_.overs, cfg_.spec)) {}

  void ingest(double lambda, const DenseTensor& term) {
    if (term.shape != state_.shape)
      throw UsageError("stream: term shape differs from the accumulator shape");
    state_ = accumulate(std::move(state_),
                        sketch_dense(term, state_.tree, cfg_.ranks, cfg_.overs, cfg_.spec),
                        lambda);
  }

  void ingest(double lambda, const TtnTensor& term) {
    if (term.shape != state_.shape)
      throw UsageError("stream: term shape differs from the accumulator shape");
    state_ = accumulate(std::move(state_),
                        sketch_ttn(term, state_.tree, cfg_.ranks, cfg_.overs, cfg_.spec),
                        lambda);
  }

  const SketchState& state() const { return state_; }

  // Resume from a checkpointed state.
  void set_state(SketchState s) {
    if (!s.compatible(state_))
      throw UsageError("stream: checkpoint state is incompatible with this accumulator");
    state_ = std::move(s);
  }

  TtnTensor finalize() const {
    if (state_.is_zero()) return zero_ttn(state_.tree, state_.shape, state_.ranks);
    return recover(state_, cfg_);
  }

 private:
  TtnnConfig cfg_;
  SketchState state_;
};

}  // namespace ttn
