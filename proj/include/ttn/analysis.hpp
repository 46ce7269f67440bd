#pragma once

#include <limits>
#include <map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttn/sttnn.hpp"
#include "ttn/ttnn.hpp"

namespace ttn {

struct NodeBound {
  double rho = 1.0;
  double tau = 1.0;
  double eta = 1.0;
  double tail = 0.0;
  bool degenerate = false;  // zero sketch; constants reported as +inf
};

struct BoundReport {
  std::map<NodeKey, NodeBound> nodes;
  double measured_error = 0.0;
  double rhs_per_node = 0.0;    // sum of rho*tau*tail*(downstream eta products)
  double rhs_simplified = 0.0;  // max-constant form, reported for reference
  double slack = 0.0;
  bool pass = false;
};

inline nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& [k, b] : r.nodes) {
    j["nodes"].push_back({{"node", {k.level, k.pos}},
                          {"rho", b.rho},
                          {"tau", b.tau},
                          {"eta", b.eta},
                          {"tail", b.tail},
                          {"degenerate", b.degenerate}});
  }
  j["measured_error"] = r.measured_error;
  j["rhs_per_node"] = r.rhs_per_node;
  j["rhs_simplified"] = r.rhs_simplified;
  j["slack"] = r.slack;
  j["pass"] = r.pass;
  return j;
}

// Right singular vectors and full spectra of every nonroot matricization,
// shared across seeds (they do not depend on the draws).
struct NodeSvdCache {
  std::map<NodeKey, Vector> sigma;  // descending
  std::map<NodeKey, Matrix> v;      // n_rest x min(n_I, n_rest)

  static NodeSvdCache build(const DenseTensor& t, const IndexTree& tree) {
    NodeSvdCache c;
    for (NodeKey k : tree.nonroot_nodes()) {
      const Matrix m = matricize(t, tree.node(k).indices);
      Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinV);
      c.sigma[k] = svd.singularValues();
      c.v[k] = svd.matrixV();
    }
    return c;
  }

  double tail(NodeKey k, int rhat) const {
    const Vector& s = sigma.at(k);
    double acc = 0.0;
    for (Eigen::Index i = rhat; i < s.size(); ++i) acc += s(i) * s(i);
    return std::sqrt(acc);
  }
};

namespace detail {

// tau/eta ingredient ||(Y^T Q)^+ Y^T Q_perp||_2 via the projector form.
inline double oblique_factor(const Matrix& y, const Matrix& q, bool* degenerate) {
  const Matrix b1 = y.transpose() * q;
  Eigen::JacobiSVD<Matrix> svd(b1);
  if (svd.singularValues().size() == 0 || svd.singularValues()(0) == 0.0) {
    if (degenerate) *degenerate = true;
    return std::numeric_limits<double>::infinity();
  }
  const Matrix yq_perp = y.transpose() - b1 * q.transpose();  // Y^T (I - QQ^T)
  return two_norm(eps_pinv_apply(b1, 0.0) * yq_perp);
}

// rho ingredient ||Vhat_perp^T X (Vhat^T X)^+||_2 without forming complements.
inline double alignment_factor(const Matrix& vhat, const Matrix& x, bool* degenerate) {
  const Matrix a1 = vhat.transpose() * x;  // rhat x r
  Eigen::JacobiSVD<Matrix> svd(a1);
  if (svd.singularValues().size() == 0 || svd.singularValues()(0) == 0.0) {
    if (degenerate) *degenerate = true;
    return std::numeric_limits<double>::infinity();
  }
  const Matrix a2 = x - vhat * a1;  // (I - Vhat Vhat^T) X
  return two_norm(a2 * eps_pinv_apply(a1, 0.0));
}

inline NodeBound node_bound_from(const Matrix& x_effective, const Matrix& y, const Matrix& m,
                                 const Matrix& vhat, const NodeSvdCache& cache, NodeKey v,
                                 int rhat) {
  NodeBound b;
  b.tail = cache.tail(v, rhat);
  const Matrix q = economy_qr(m * x_effective).first;
  bool deg = false;
  const double rho_f = alignment_factor(vhat, x_effective, &deg);
  const double tau_f = oblique_factor(y, q, &deg);
  b.degenerate = deg;
  if (deg) {
    b.rho = b.tau = b.eta = std::numeric_limits<double>::infinity();
    return b;
  }
  b.rho = std::sqrt(1.0 + rho_f * rho_f);
  b.tau = std::sqrt(1.0 + tau_f * tau_f);
  b.eta = 1.0 + tau_f;
  return b;
}

inline void finalize_report(BoundReport& rep, const IndexTree& tree, double tensor_norm) {
  const auto nodes = tree.nonroot_nodes();
  double rhs = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    double downstream = 1.0;
    for (std::size_t j = i + 1; j < nodes.size(); ++j)
      downstream *= rep.nodes.at(nodes[j]).eta;
    const NodeBound& b = rep.nodes.at(nodes[i]);
    rhs += b.rho * b.tau * b.tail * downstream;
  }
  rep.rhs_per_node = rhs;
  double rho_max = 0.0, tau_max = 0.0, eta_max = 0.0, tails2 = 0.0;
  for (const auto& [k, b] : rep.nodes) {
    rho_max = std::max(rho_max, b.rho);
    tau_max = std::max(tau_max, b.tau);
    eta_max = std::max(eta_max, b.eta);
    tails2 += b.tail * b.tail;
  }
  double geo = 0.0, pw = 1.0;
  for (std::size_t s = 0; s < nodes.size(); ++s) {
    geo += pw;
    pw *= eta_max;
  }
  rep.rhs_simplified = rho_max * tau_max * geo * std::sqrt(tails2);
  rep.slack = 1e-12 * tensor_norm;
}

}  // namespace detail

// Per-node constants for the given draws; rhat must stay below each node rank.
inline BoundReport node_constants(const DenseTensor& t, const IndexTree& tree,
                                  const RankMap& ranks, const RankMap& rhat,
                                  const DrmDraws& draws, const NodeSvdCache* cache = nullptr) {
  NodeSvdCache local;
  if (!cache) {
    local = NodeSvdCache::build(t, tree);
    cache = &local;
  }
  BoundReport rep;
  for (NodeKey v : tree.nonroot_nodes()) {
    const int rh = rhat.at(v);
    if (rh >= ranks.at(v))
      throw PreconditionError("node_constants: need rhat < r at " + to_string(v));
    const Matrix m = matricize(t, tree.node(v).indices);
    const Matrix vh = cache->v.at(v).leftCols(rh);
    rep.nodes[v] =
        detail::node_bound_from(draws.at(v).first, draws.at(v).second, m, vh, *cache, v, rh);
  }
  detail::finalize_report(rep, tree, frobenius_norm(t));
  return rep;
}

// Checks the computable per-node bound: ||t - approx|| <= sum over nodes of
// rho*tau*tail*(product of downstream eta), with slack 1e-12*||t||.
inline BoundReport deterministic_audit(const DenseTensor& t, const IndexTree& tree,
                                       const TtnnConfig& cfg, const RankMap& rhat,
                                       const TtnTensor& approx, const DrmDraws& draws,
                                       const NodeSvdCache* cache = nullptr) {
  BoundReport rep = node_constants(t, tree, cfg.ranks, rhat, draws, cache);
  rep.measured_error = frobenius_norm(t) * rel_error(t, to_dense(approx));
  rep.pass = rep.measured_error <= rep.rhs_per_node + rep.slack;
  return rep;
}

namespace detail {

// Right sketches of the sequential path expanded back to the full complement:
// X_eff = (I ox Y_s ox ... ox I) X', so that orth(T^{l,k} X_eff) equals
// orth((T_S)^{l,k} X') and the deterministic bound applies verbatim.
inline Matrix expand_sequential_sketch(const IndexTree& tree, const std::vector<Index>& shape,
                                       const PlanStep& step, const Matrix& xprime,
                                       const std::function<Matrix(NodeKey)>& y_of) {
  // mode layout of the source tensor's complement (everything but step.node's modes)
  struct Mode {
    int phys = 0;
    NodeKey node;
    int key = 0;
    Index size = 0;
  };
  std::vector<Mode> modes;
  {
    std::vector<char> in_source(static_cast<std::size_t>(tree.order()) + 1, 0);
    for (NodeKey u : step.source)
      for (int m : tree.node(u).indices) in_source[static_cast<std::size_t>(m)] = 1;
    std::vector<char> in_node(static_cast<std::size_t>(tree.order()) + 1, 0);
    for (int m : tree.node(step.node).indices) in_node[static_cast<std::size_t>(m)] = 1;
    std::map<int, Mode> ordered;
    for (int m = 1; m <= tree.order(); ++m) {
      if (in_node[static_cast<std::size_t>(m)] || in_source[static_cast<std::size_t>(m)]) continue;
      ordered[m] = Mode{m, {}, m, shape[static_cast<std::size_t>(m - 1)]};
    }
    for (NodeKey u : step.source) {
      const int key = tree.node(u).indices.front();
      Matrix y = y_of(u);
      ordered[key] = Mode{0, u, key, y.cols()};
    }
    for (auto& [k, mo] : ordered) modes.push_back(mo);
  }
  std::vector<Index> tshape;
  for (const auto& mo : modes) tshape.push_back(mo.size);
  Index full_rows = 1;
  {
    std::vector<char> in_node(static_cast<std::size_t>(tree.order()) + 1, 0);
    for (int m : tree.node(step.node).indices) in_node[static_cast<std::size_t>(m)] = 1;
    for (int m = 1; m <= tree.order(); ++m)
      if (!in_node[static_cast<std::size_t>(m)]) full_rows *= shape[static_cast<std::size_t>(m - 1)];
  }
  Matrix xeff(full_rows, xprime.cols());
  for (Eigen::Index j = 0; j < xprime.cols(); ++j) {
    DenseTensor cur = tshape.empty() ? DenseTensor({1}) : DenseTensor(tshape);
    for (Index i = 0; i < cur.size(); ++i) cur.data[static_cast<std::size_t>(i)] = xprime(i, j);
    std::vector<Mode> labels = modes;
    for (NodeKey u : step.source) {
      int pos = 0;
      for (std::size_t q = 0; q < labels.size(); ++q)
        if (labels[q].phys == 0 && labels[q].node == u) pos = static_cast<int>(q) + 1;
      Matrix y = y_of(u);
      // u maps the sketched index back to the node's physical modes
      std::vector<Index> ushape{static_cast<Index>(y.cols())};
      for (int m : tree.node(u).indices) ushape.push_back(shape[static_cast<std::size_t>(m - 1)]);
      Matrix yt = y.transpose();
      cur = mode_contract(cur, {pos}, tensor_from_matrix(yt, ushape));
      std::vector<Mode> nl(labels.begin(), labels.begin() + pos - 1);
      for (int m : tree.node(u).indices)
        nl.push_back(Mode{m, {}, m, shape[static_cast<std::size_t>(m - 1)]});
      nl.insert(nl.end(), labels.begin() + pos, labels.end());
      labels = std::move(nl);
    }
    // restore increasing physical order if interleaving scrambled it
    bool sorted = true;
    for (std::size_t q = 1; q < labels.size(); ++q)
      if (labels[q].phys < labels[q - 1].phys) sorted = false;
    if (!sorted) {
      std::vector<std::pair<int, int>> order;
      for (std::size_t q = 0; q < labels.size(); ++q)
        order.push_back({labels[q].phys, static_cast<int>(q) + 1});
      std::sort(order.begin(), order.end());
      std::vector<int> perm;
      for (auto& [ph, q] : order) perm.push_back(q);
      cur = permute_modes(cur, perm);
    }
    if (cur.size() != full_rows)
      throw UsageError("expand_sequential_sketch: size mismatch");
    for (Index i = 0; i < cur.size(); ++i) xeff(i, j) = cur.data[static_cast<std::size_t>(i)];
  }
  return xeff;
}

}  // namespace detail

// Same bound with the sequential path's contracted sketches: Q comes from
// (T_S)^{l,k} X' and rho uses the expanded X_eff.
inline BoundReport deterministic_audit_sequential(const DenseTensor& t, const IndexTree& tree,
                                                  const TtnnConfig& cfg, const RankMap& rhat,
                                                  const TtnTensor& approx,
                                                  const NodeSvdCache* cache = nullptr) {
  NodeSvdCache local;
  if (!cache) {
    local = NodeSvdCache::build(t, tree);
    cache = &local;
  }
  const ReusePlan plan = reuse_plan(tree);
  auto y_of = [&](NodeKey u) {
    return drm(cfg.spec, tree, t.shape, u, Side::Y, cfg.ranks, cfg.overs);
  };
  BoundReport rep;
  for (const PlanStep& step : plan.steps) {
    const NodeKey v = step.node;
    const int rh = rhat.at(v);
    if (rh >= cfg.ranks.at(v))
      throw PreconditionError("sequential audit: need rhat < r at " + to_string(v));
    Index cols_contracted = 1;
    {
      std::vector<char> in_node(static_cast<std::size_t>(tree.order()) + 1, 0);
      for (int m : tree.node(v).indices) in_node[static_cast<std::size_t>(m)] = 1;
      std::vector<char> in_source(static_cast<std::size_t>(tree.order()) + 1, 0);
      for (NodeKey u : step.source)
        for (int m : tree.node(u).indices) in_source[static_cast<std::size_t>(m)] = 1;
      for (int m = 1; m <= tree.order(); ++m)
        if (!in_node[static_cast<std::size_t>(m)] && !in_source[static_cast<std::size_t>(m)])
          cols_contracted *= t.shape[static_cast<std::size_t>(m - 1)];
      for (NodeKey u : step.source)
        cols_contracted *= cfg.ranks.at(u) + cfg.overs.at(u);
    }
    const Matrix xprime =
        rng::gaussian(cols_contracted, cfg.ranks.at(v),
                      rng::stream_key(cfg.spec.seed, rng::kTagSeqDrm,
                                      static_cast<std::uint64_t>(v.level),
                                      static_cast<std::uint64_t>(v.pos), 1));
    const Matrix xeff = detail::expand_sequential_sketch(tree, t.shape, step, xprime, y_of);
    const Matrix m = matricize(t, tree.node(v).indices);
    const Matrix vh = cache->v.at(v).leftCols(rh);
    rep.nodes[v] = detail::node_bound_from(xeff, y_of(v), m, vh, *cache, v, rh);
  }
  detail::finalize_report(rep, tree, frobenius_norm(t));
  rep.measured_error = frobenius_norm(t) * rel_error(t, to_dense(approx));
  rep.pass = rep.measured_error <= rep.rhs_per_node + rep.slack;
  return rep;
}

struct ExpectedAuditResult {
  double mean_error = 0.0;
  double rhs = 0.0;
  int trials = 0;
  bool pass = false;
};

inline double expected_bound_c(int r, int p) {
  return 1.0 + std::sqrt(static_cast<double>(r) / (p - 1));
}

inline double expected_bound_cprime(int r, int p, int rhat) {
  return std::sqrt(1.0 + static_cast<double>(r) / (p - 1)) *
         std::sqrt(1.0 + static_cast<double>(rhat) / (r - rhat - 1));
}

// Monte-Carlo mean error against the closed-form Gaussian expectation bound.
inline ExpectedAuditResult expected_audit(const DenseTensor& t, const IndexTree& tree, int r,
                                          int rhat, int p, int trials, std::uint64_t seed,
                                          const NodeSvdCache* cache = nullptr) {
  NodeSvdCache local;
  if (!cache) {
    local = NodeSvdCache::build(t, tree);
    cache = &local;
  }
  TtnnConfig cfg = make_config(tree, t.shape, r, p, DrmSpec{DrmKind::gaussian, seed});
  const auto nodes = tree.nonroot_nodes();
  for (NodeKey v : nodes) {
    if (cfg.overs.at(v) < 2)
      throw PreconditionError("expected_audit: need p >= 2 at " + to_string(v));
    if (rhat > cfg.ranks.at(v) - 2)
      throw PreconditionError("expected_audit: need rhat <= r - 2 at " + to_string(v));
  }
  double rhs = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    double downstream = 1.0;
    for (std::size_t j = i + 1; j < nodes.size(); ++j)
      downstream *= expected_bound_c(cfg.ranks.at(nodes[j]), cfg.overs.at(nodes[j]));
    rhs += downstream *
           expected_bound_cprime(cfg.ranks.at(nodes[i]), cfg.overs.at(nodes[i]), rhat) *
           cache->tail(nodes[i], rhat);
  }
  double acc = 0.0;
  const double tnorm = frobenius_norm(t);
  for (int trial = 0; trial < trials; ++trial) {
    TtnnConfig c = cfg;
    c.spec.seed = rng::stream_key(seed, rng::kTagTrial, static_cast<std::uint64_t>(trial));
    c.ls_mode = LsMode::stabilized;
    TtnTensor approx = compress_dense(t, tree, c);
    acc += tnorm * rel_error(t, to_dense(approx));
  }
  ExpectedAuditResult res;
  res.trials = trials;
  res.mean_error = acc / trials;
  res.rhs = rhs;
  res.pass = res.mean_error <= rhs;
  return res;
}

struct LemmaCheck {
  bool precondition_ok = false;
  bool holds = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

// ||P B||_F <= ||B||_F (1 + ||(Y^T Q)^+ (Y^T Q_perp)||_2) for the oblique
// projector P = A X (Y^T A X)^+ Y^T, valid when Y^T A X has full column rank.
inline LemmaCheck lemma_projection_check(const Matrix& a, const Matrix& b, const Matrix& x,
                                         const Matrix& y) {
  LemmaCheck out;
  const Matrix core = y.transpose() * a * x;
  Eigen::JacobiSVD<Matrix> svd(core);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) <= 1e-12 * s(0)) {
    out.precondition_ok = false;
    return out;
  }
  out.precondition_ok = true;
  const Matrix p = a * x * eps_pinv_apply(core, 0.0) * y.transpose();
  out.lhs = frobenius_norm(Matrix(p * b));
  const Matrix q = economy_qr(a * x).first;
  bool deg = false;
  const double factor = detail::oblique_factor(y, q, &deg);
  out.rhs = frobenius_norm(b) * (1.0 + factor);
  out.holds = out.lhs <= out.rhs * (1.0 + 1e-12);
  return out;
}

}  // namespace ttn
