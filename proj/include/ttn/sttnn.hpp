#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttn/ttnn.hpp"

namespace ttn {

// One step of the sequential sweep: which previously contracted nodes the
// sketch of `node` reads from (empty = the full tensor), and whether the chain
// extension T_{S u {node}} is kept for later steps.
struct PlanStep {
  NodeKey node;
  std::vector<NodeKey> source;   // S_{l,k}, in the order the nodes were contracted
  std::vector<int> covered;      // physical indices covered by the source
  bool store_extension = false;
};

struct ReusePlan {
  std::vector<PlanStep> steps;
};

// Lexicographic (level-major, position-minor) ordering with a contraction
// cache. Each visit picks the cached tensor covering the most physical
// indices among those disjoint from the node, ties broken by recency.
inline ReusePlan reuse_plan(const IndexTree& tree) {
  struct Entry {
    std::vector<NodeKey> snodes;
    std::set<int> covered;
  };
  std::vector<Entry> cache;
  ReusePlan plan;
  for (NodeKey v : tree.nonroot_nodes()) {
    const auto& idx = tree.node(v).indices;
    int best = -1;
    for (std::size_t i = 0; i < cache.size(); ++i) {
      bool disjoint = true;
      for (int m : idx)
        if (cache[i].covered.count(m)) {
          disjoint = false;
          break;
        }
      if (!disjoint) continue;
      if (best < 0 || cache[i].covered.size() >= cache[static_cast<std::size_t>(best)].covered.size())
        best = static_cast<int>(i);
    }
    PlanStep step;
    step.node = v;
    if (best >= 0) {
      step.source = cache[static_cast<std::size_t>(best)].snodes;
      step.covered.assign(cache[static_cast<std::size_t>(best)].covered.begin(),
                          cache[static_cast<std::size_t>(best)].covered.end());
    }
    plan.steps.push_back(step);
    Entry e;
    e.snodes = step.source;
    e.snodes.push_back(v);
    e.covered = best >= 0 ? cache[static_cast<std::size_t>(best)].covered : std::set<int>{};
    for (int m : idx) e.covered.insert(m);
    cache.push_back(std::move(e));
  }
  // keep only chain extensions some later step (or the root closure) consumes
  auto key_of = [](std::vector<NodeKey> s) {
    std::sort(s.begin(), s.end());
    return s;
  };
  std::set<std::vector<NodeKey>> needed;
  for (const PlanStep& s : plan.steps)
    if (!s.source.empty()) needed.insert(key_of(s.source));
  {
    std::vector<NodeKey> level1;
    for (int k = 1; k <= tree.level_count(1); ++k) level1.push_back({1, k});
    needed.insert(key_of(level1));  // the root sketch closes over all level-1 nodes
  }
  for (PlanStep& s : plan.steps) {
    auto ext = s.source;
    ext.push_back(s.node);
    s.store_extension = needed.count(key_of(ext)) > 0;
  }
  return plan;
}

// Plan invariant: sources are disjoint from the active node and precede it.
inline std::vector<std::string> validate_plan(const IndexTree& tree, const ReusePlan& plan) {
  std::vector<std::string> out;
  std::set<NodeKey> seen;
  for (const PlanStep& s : plan.steps) {
    const auto& idx = tree.node(s.node).indices;
    for (NodeKey u : s.source) {
      if (!seen.count(u))
        out.push_back(to_string(s.node) + ": source " + to_string(u) + " does not precede it");
      for (int m : tree.node(u).indices)
        if (std::find(idx.begin(), idx.end(), m) != idx.end())
          out.push_back(to_string(s.node) + ": source " + to_string(u) + " overlaps its indices");
    }
    seen.insert(s.node);
  }
  return out;
}

inline nlohmann::json plan_to_json(const ReusePlan& plan) {
  nlohmann::json j = nlohmann::json::array();
  for (const PlanStep& s : plan.steps) {
    nlohmann::json e;
    e["node"] = {s.node.level, s.node.pos};
    e["source"] = nlohmann::json::array();
    for (NodeKey u : s.source) e["source"].push_back({u.level, u.pos});
    e["covered"] = s.covered;
    e["stored"] = s.store_extension;
    j.push_back(e);
  }
  return j;
}

namespace detail {

// Contracted tensor with tracked modes: physical mode i keeps label i; the
// sketched mode left by contracting node u is labelled by u with sort key
// min(I_u). Modes stay sorted by key, mirroring mode_contract's placement.
struct ContractedTensor {
  std::shared_ptr<const DenseTensor> ten;
  struct Mode {
    int phys = 0;  // physical index, or 0 for a sketched mode
    NodeKey node;  // valid when phys == 0
    int key = 0;
  };
  std::vector<Mode> modes;

  static ContractedTensor wrap(const DenseTensor& t) {
    ContractedTensor c;
    c.ten = std::shared_ptr<const DenseTensor>(&t, [](const DenseTensor*) {});
    for (int m = 1; m <= t.order(); ++m) c.modes.push_back({m, {}, m});
    return c;
  }

  std::vector<int> positions_of(const std::vector<int>& phys) const {
    std::vector<int> out;
    for (std::size_t q = 0; q < modes.size(); ++q)
      if (modes[q].phys != 0 &&
          std::find(phys.begin(), phys.end(), modes[q].phys) != phys.end())
        out.push_back(static_cast<int>(q) + 1);
    return out;
  }
};

// T_S extended by contracting node u's physical modes with y (n_{I_u} x cols).
inline ContractedTensor contract_node(const ContractedTensor& src, const IndexTree& tree,
                                      NodeKey u, const Matrix& y) {
  const auto& idx = tree.node(u).indices;
  auto positions = src.positions_of(idx);
  if (positions.size() != idx.size())
    throw UsageError("contract_node: node modes not present in source");
  std::vector<Index> ushape;
  for (int pos : positions) ushape.push_back(src.ten->shape[static_cast<std::size_t>(pos - 1)]);
  ushape.push_back(y.cols());
  DenseTensor res = mode_contract(*src.ten, positions, tensor_from_matrix(y, ushape));
  ContractedTensor out;
  out.ten = std::make_shared<DenseTensor>(std::move(res));
  bool inserted = false;
  for (const auto& m : src.modes) {
    const bool in_group = m.phys != 0 && std::find(idx.begin(), idx.end(), m.phys) != idx.end();
    if (in_group) {
      if (!inserted) {
        out.modes.push_back({0, u, idx.front()});
        inserted = true;
      }
      continue;
    }
    out.modes.push_back(m);
  }
  return out;
}

}  // namespace detail

// Row counts of the sequential right sketches under a given config; the
// sketch of node v reads (prod of untouched physical modes) x (prod of source
// oversketch widths) columns.
inline std::map<NodeKey, Index> sequential_sketch_rows(const IndexTree& tree,
                                                       const std::vector<Index>& shape,
                                                       const TtnnConfig& cfg) {
  std::map<NodeKey, Index> rows;
  for (const PlanStep& step : reuse_plan(tree).steps) {
    std::vector<char> taken(static_cast<std::size_t>(tree.order()) + 1, 0);
    for (int m : tree.node(step.node).indices) taken[static_cast<std::size_t>(m)] = 1;
    Index r = 1;
    for (NodeKey u : step.source) {
      for (int m : tree.node(u).indices) taken[static_cast<std::size_t>(m)] = 1;
      r *= cfg.ranks.at(u) + cfg.overs.at(u);
    }
    for (int m = 1; m <= tree.order(); ++m)
      if (!taken[static_cast<std::size_t>(m)]) r *= shape[static_cast<std::size_t>(m - 1)];
    rows[step.node] = r;
  }
  return rows;
}

// Wide draws of the sequential right sketches for reuse across a rank sweep;
// only entries whose row count matches the active config get sliced, the rest
// are regenerated (their rows depend on the source oversketch widths).
inline std::map<NodeKey, Matrix> draw_sequential_sketches(const IndexTree& tree,
                                                          const std::vector<Index>& shape,
                                                          const TtnnConfig& cfg) {
  std::map<NodeKey, Matrix> out;
  for (const auto& [v, rows] : sequential_sketch_rows(tree, shape, cfg)) {
    out[v] = rng::gaussian(rows, cfg.ranks.at(v),
                           rng::stream_key(cfg.spec.seed, rng::kTagSeqDrm,
                                           static_cast<std::uint64_t>(v.level),
                                           static_cast<std::uint64_t>(v.pos), 1));
  }
  return out;
}

// Sequential compression of a dense tensor: the sketch of each node reads the
// most-contracted reusable cache entry, with freshly drawn right sketches
// sized to the contracted complement. Recovery is identical to recover().
inline TtnTensor compress_dense_sequential(const DenseTensor& t, const IndexTree& tree,
                                           const TtnnConfig& cfg,
                                           CompressReport* report = nullptr,
                                           ReusePlan* plan_out = nullptr,
                                           const DrmDraws* ydraws = nullptr,
                                           const std::map<NodeKey, Matrix>* xdraws = nullptr) {
  if (cfg.spec.kind != DrmKind::gaussian)
    throw PreconditionError("sequential compression supports gaussian DRMs only");
  if (static_cast<int>(t.shape.size()) != tree.order())
    throw UsageError("compress_dense_sequential: tensor order does not match the tree");
  namespace ch = std::chrono;
  flops::Scope scope;
  auto t0 = ch::steady_clock::now();

  const ReusePlan plan = reuse_plan(tree);
  if (plan_out) *plan_out = plan;

  auto key_of = [](std::vector<NodeKey> s) {
    std::sort(s.begin(), s.end());
    return s;
  };
  std::map<std::vector<NodeKey>, detail::ContractedTensor> cache;
  const detail::ContractedTensor full = detail::ContractedTensor::wrap(t);

  auto y_of = [&](NodeKey c) {
    return ydraws ? detail::sliced_drm(*ydraws, c, Side::Y, cfg.ranks.at(c) + cfg.overs.at(c))
                  : drm(cfg.spec, tree, t.shape, c, Side::Y, cfg.ranks, cfg.overs);
  };
  SketchState state{tree, t.shape, cfg.ranks, cfg.overs, cfg.spec, {}, {}};
  for (const PlanStep& step : plan.steps) {
    const NodeKey v = step.node;
    const auto& idx = tree.node(v).indices;
    const detail::ContractedTensor& src =
        step.source.empty() ? full : cache.at(key_of(step.source));
    const auto positions = src.positions_of(idx);
    Index rest = 1;
    for (std::size_t q = 0; q < src.modes.size(); ++q)
      rest *= src.ten->shape[q];
    for (int pos : positions) rest /= src.ten->shape[static_cast<std::size_t>(pos - 1)];
    Matrix xprime;
    if (xdraws && xdraws->count(v) && xdraws->at(v).rows() == rest &&
        xdraws->at(v).cols() >= cfg.ranks.at(v)) {
      xprime = xdraws->at(v).leftCols(cfg.ranks.at(v));
    } else {
      xprime = rng::gaussian(rest, cfg.ranks.at(v),
                             rng::stream_key(cfg.spec.seed, rng::kTagSeqDrm,
                                             static_cast<std::uint64_t>(v.level),
                                             static_cast<std::uint64_t>(v.pos), 1));
    }
    const Matrix y = y_of(v);
    const Matrix tx = detail::right_sketch_apply(*src.ten, positions, xprime);
    state.omega[v] = detail::tracked_product(y.transpose(), tx);
    if (tree.is_leaf(v)) {
      state.psi[v] = tx;
    } else {
      std::vector<Index> tshape;
      for (int mo : idx) tshape.push_back(t.shape[static_cast<std::size_t>(mo - 1)]);
      tshape.push_back(tx.cols());
      DenseTensor cur = tensor_from_matrix(tx, tshape);
      std::vector<int> labels(idx.begin(), idx.end());
      labels.push_back(0);
      detail::contract_children_y(tree, v, cur, labels, y_of);
      const int m_children = static_cast<int>(tree.children(v).size());
      std::vector<int> rows(m_children);
      for (int q = 0; q < m_children; ++q) rows[q] = q + 1;
      state.psi[v] = matricize(cur, rows);
    }
    if (step.store_extension) {
      auto ext = step.source;
      ext.push_back(v);
      cache[key_of(ext)] = detail::contract_node(src, tree, v, y);
    }
  }
  {
    // the fully contracted level-1 chain is the root sketch
    std::vector<NodeKey> level1;
    for (int k = 1; k <= tree.level_count(1); ++k) level1.push_back({1, k});
    const auto& closed = cache.at(key_of(level1));
    Matrix psi_root(closed.ten->size(), 1);
    for (Index i = 0; i < closed.ten->size(); ++i)
      psi_root(i, 0) = closed.ten->data[static_cast<std::size_t>(i)];
    state.psi[{0, 1}] = psi_root;
  }
  auto t1 = ch::steady_clock::now();
  const std::uint64_t sflops = scope.elapsed();
  TtnTensor out = recover(state, cfg);
  auto t2 = ch::steady_clock::now();
  if (report) {
    report->sketch_seconds = ch::duration<double>(t1 - t0).count();
    report->recover_seconds = ch::duration<double>(t2 - t1).count();
    report->sketch_flops = sflops;
  }
  return out;
}

}  // namespace ttn
