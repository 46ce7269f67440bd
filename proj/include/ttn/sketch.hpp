#pragma once

#include <functional>
#include <map>
#include <vector>

#include "ttn/dense_tensor.hpp"
#include "ttn/index_tree.hpp"
#include "ttn/ttn_tensor.hpp"

namespace ttn {

enum class DrmKind { gaussian, khatri_rao };
enum class Side { X, Y };

// Fully deterministic DRM family: (spec, node, side) determines the matrix.
// Khatri-Rao per-mode factor streams are derived from the master seed as
// (seed, mode, side) labels.
struct DrmSpec {
  DrmKind kind = DrmKind::gaussian;
  std::uint64_t seed = 0;

  bool operator==(const DrmSpec&) const = default;
};

namespace detail {

inline Matrix tracked_product(const Matrix& a, const Matrix& b) {
  flops::add(static_cast<std::uint64_t>(a.rows()) * a.cols() * b.cols());
  return a * b;
}

// matricize(t, modes) * x without materializing the unfolding when the mode
// set is contiguous; the tensor is streamed once as (pre x mid) slabs.
inline Matrix right_sketch_apply(const DenseTensor& t, const std::vector<int>& modes,
                                 const Matrix& x) {
  if (auto cs = contiguous_split(t.shape, modes)) {
    if (x.rows() != cs->pre * cs->post)
      throw UsageError("right_sketch_apply: sketch row count mismatch");
    flops::add(static_cast<std::uint64_t>(cs->mid) * cs->pre * cs->post * x.cols());
    Matrix tx = Matrix::Zero(cs->mid, x.cols());
    if (cs->pre == 1) {
      Eigen::Map<const Matrix> in(t.data.data(), cs->mid, cs->post);
      tx.noalias() = in * x;
    } else {
      for (Index z = 0; z < cs->post; ++z) {
        Eigen::Map<const Matrix> slab(t.data.data() + z * cs->pre * cs->mid, cs->pre, cs->mid);
        tx.noalias() += slab.transpose() * x.middleRows(z * cs->pre, cs->pre);
      }
    }
    return tx;
  }
  return tracked_product(matricize(t, modes), x);
}


inline std::vector<int> complement_modes(const IndexTree& tree, const std::vector<int>& in) {
  std::vector<char> sel(static_cast<std::size_t>(tree.order()) + 1, 0);
  for (int m : in) sel[static_cast<std::size_t>(m)] = 1;
  std::vector<int> out;
  for (int m = 1; m <= tree.order(); ++m)
    if (!sel[static_cast<std::size_t>(m)]) out.push_back(m);
  return out;
}

// Per-mode Khatri-Rao factor.
inline Matrix kr_factor(const DrmSpec& spec, Index n, int mode, Side side, int cols) {
  return rng::gaussian(n, cols,
                       rng::stream_key(spec.seed, rng::kTagKrFactor,
                                       static_cast<std::uint64_t>(mode),
                                       side == Side::X ? 1 : 2));
}

// Khatri-Rao product over the listed modes with the smallest mode fastest,
// matching the matricization index maps.
inline Matrix kr_over_modes(const DrmSpec& spec, const std::vector<Index>& shape,
                            const std::vector<int>& modes, Side side, int cols) {
  Matrix acc;
  for (auto it = modes.rbegin(); it != modes.rend(); ++it) {
    Matrix f = kr_factor(spec, shape[static_cast<std::size_t>(*it - 1)], *it, side, cols);
    acc = (acc.size() == 0) ? f : khatri_rao(acc, f);
  }
  return acc;
}

}  // namespace detail

// The DRM attached to (node, side): X is n_{D\I} x r, Y is n_I x (r+p).
inline Matrix drm(const DrmSpec& spec, const IndexTree& tree,
                  const std::vector<Index>& shape, NodeKey node, Side side,
                  const RankMap& ranks, const RankMap& overs) {
  const int r = ranks.at(node);
  const int cols = side == Side::X ? r : r + overs.at(node);
  const auto& idx = tree.node(node).indices;
  const std::vector<int> modes = side == Side::X ? detail::complement_modes(tree, idx) : idx;
  if (spec.kind == DrmKind::gaussian) {
    Index rows = detail::phys_size(shape, modes);
    return rng::gaussian(rows, cols,
                         rng::stream_key(spec.seed, rng::kTagNodeDrm,
                                         static_cast<std::uint64_t>(node.level),
                                         static_cast<std::uint64_t>(node.pos),
                                         side == Side::X ? 1 : 2));
  }
  int ru = 0, pu = 0;
  if (!ranks.uniform_value(&ru) || !overs.uniform_value(&pu))
    throw PreconditionError("khatri_rao DRMs require uniform ranks and oversamples");
  return detail::kr_over_modes(spec, shape, modes, side, cols);
}

// Dummy slots carry identity DRMs of the physical size they pass through.
inline Matrix drm(const DrmSpec& spec, const IndexTree& tree,
                  const std::vector<Index>& shape, const ExtendedNode& node, Side side,
                  const RankMap& ranks, const RankMap& overs) {
  if (node.dummy) {
    const Index n = detail::phys_size(shape, node.indices);
    return Matrix::Identity(n, n);
  }
  return drm(spec, tree, shape, node.origin, side, ranks, overs);
}

// Materialized per-node (X, Y) pairs. Because draws are addressed column-major
// by a counter, a narrower draw is the leading-column slice of a wider one, so
// one wide draw can serve a whole rank sweep bit-identically.
using DrmDraws = std::map<NodeKey, std::pair<Matrix, Matrix>>;

inline DrmDraws draw_drms(const DrmSpec& spec, const IndexTree& tree,
                          const std::vector<Index>& shape, const RankMap& ranks,
                          const RankMap& overs) {
  DrmDraws d;
  for (NodeKey v : tree.nonroot_nodes()) {
    d[v] = {drm(spec, tree, shape, v, Side::X, ranks, overs),
            drm(spec, tree, shape, v, Side::Y, ranks, overs)};
  }
  return d;
}

namespace detail {

inline Matrix sliced_drm(const DrmDraws& draws, NodeKey v, Side side, Index cols) {
  const Matrix& m = side == Side::X ? draws.at(v).first : draws.at(v).second;
  if (m.cols() < cols)
    throw UsageError("provided DRM draws are narrower than the requested rank");
  return m.leftCols(cols);
}

}  // namespace detail

// Per-node sketch pairs: Omega = Y^T T^{l,k} X for every non-root node, Psi in
// its three shapes (root: children-Y contraction of the whole tensor; internal:
// children-Y on the I side against X; leaf: T^{l,k} X). Linear in the input.
struct SketchState {
  IndexTree tree;
  std::vector<Index> shape;
  RankMap ranks, overs;
  DrmSpec spec;
  std::map<NodeKey, Matrix> omega;
  std::map<NodeKey, Matrix> psi;  // includes the root under key {0,1}

  bool compatible(const SketchState& o) const {
    return tree == o.tree && shape == o.shape && ranks == o.ranks && overs == o.overs &&
           spec == o.spec;
  }

  bool is_zero() const {
    for (const auto& [k, m] : omega)
      if (m.cwiseAbs().maxCoeff() != 0.0) return false;
    for (const auto& [k, m] : psi)
      if (m.cwiseAbs().maxCoeff() != 0.0) return false;
    return true;
  }
};

inline SketchState zero_sketch_state(const IndexTree& tree, const std::vector<Index>& shape,
                                     const RankMap& ranks, const RankMap& overs,
                                     const DrmSpec& spec) {
  SketchState s{tree, shape, ranks, overs, spec, {}, {}};
  for (NodeKey v : tree.nonroot_nodes()) {
    const int r = ranks.at(v), p = overs.at(v);
    s.omega[v] = Matrix::Zero(r + p, r);
    if (tree.is_leaf(v)) {
      s.psi[v] = Matrix::Zero(detail::phys_size(shape, tree.node(v).indices), r);
    } else {
      Index rows = 1;
      for (NodeKey c : tree.children(v)) rows *= ranks.at(c) + overs.at(c);
      s.psi[v] = Matrix::Zero(rows, r);
    }
  }
  Index rows = 1;
  for (NodeKey c : tree.children({0, 1})) rows *= ranks.at(c) + overs.at(c);
  s.psi[{0, 1}] = Matrix::Zero(rows, 1);
  return s;
}

namespace detail {

// Contract each child's physical mode group of `cur` (labels track modes; the
// trailing sketch-column mode is labelled 0) with its Y matrix. Children end
// up as the leading modes in child order.
inline void contract_children_y(const IndexTree& tree, NodeKey v, DenseTensor& cur,
                                std::vector<int>& labels,
                                const std::function<Matrix(NodeKey)>& y_of) {
  for (NodeKey c : tree.children(v)) {
    const auto& ci = tree.node(c).indices;
    std::vector<int> positions;
    for (std::size_t q = 0; q < labels.size(); ++q)
      if (std::find(ci.begin(), ci.end(), labels[q]) != ci.end())
        positions.push_back(static_cast<int>(q) + 1);
    Matrix y = y_of(c);
    std::vector<Index> ushape;
    for (int pos : positions) ushape.push_back(cur.shape[static_cast<std::size_t>(pos - 1)]);
    ushape.push_back(y.cols());
    cur = mode_contract(cur, positions, tensor_from_matrix(y, ushape));
    // update labels: group removed, one sketched mode inserted at min position
    std::vector<int> nl;
    bool inserted = false;
    for (std::size_t q = 0; q < labels.size(); ++q) {
      const bool in_group = std::find(ci.begin(), ci.end(), labels[q]) != ci.end();
      if (in_group) {
        if (!inserted) {
          nl.push_back(-c.pos - (c.level << 16));
          inserted = true;
        }
        continue;
      }
      nl.push_back(labels[q]);
    }
    labels = std::move(nl);
  }
}

}  // namespace detail

// Sketch of a dense tensor: matricize + matrix products per node.
inline SketchState sketch_dense(const DenseTensor& t, const IndexTree& tree,
                                const RankMap& ranks, const RankMap& overs,
                                const DrmSpec& spec, const DrmDraws* draws = nullptr) {
  if (static_cast<int>(t.shape.size()) != tree.order())
    throw UsageError("sketch_dense: tensor order does not match the tree");
  auto x_of = [&](NodeKey v) {
    return draws ? detail::sliced_drm(*draws, v, Side::X, ranks.at(v))
                 : drm(spec, tree, t.shape, v, Side::X, ranks, overs);
  };
  auto y_of = [&](NodeKey v) {
    return draws ? detail::sliced_drm(*draws, v, Side::Y, ranks.at(v) + overs.at(v))
                 : drm(spec, tree, t.shape, v, Side::Y, ranks, overs);
  };
  SketchState s{tree, t.shape, ranks, overs, spec, {}, {}};
  for (NodeKey v : tree.nonroot_nodes()) {
    const auto& idx = tree.node(v).indices;
    const Matrix x = x_of(v);
    const Matrix y = y_of(v);
    const Index ni = detail::phys_size(t.shape, idx);
    if (t.size() / ni != x.rows() || ni != y.rows())
      throw UsageError("sketch_dense: DRM shape mismatch at " + to_string(v));
    const Matrix tx = detail::right_sketch_apply(t, idx, x);
    s.omega[v] = detail::tracked_product(y.transpose(), tx);
    if (tree.is_leaf(v)) {
      s.psi[v] = tx;
    } else {
      std::vector<Index> tshape;
      for (int mo : idx) tshape.push_back(t.shape[static_cast<std::size_t>(mo - 1)]);
      tshape.push_back(x.cols());
      DenseTensor cur = tensor_from_matrix(tx, tshape);
      std::vector<int> labels(idx.begin(), idx.end());
      labels.push_back(0);
      detail::contract_children_y(tree, v, cur, labels, y_of);
      const int m_children = static_cast<int>(tree.children(v).size());
      std::vector<int> rows(m_children);
      for (int q = 0; q < m_children; ++q) rows[q] = q + 1;
      s.psi[v] = matricize(cur, rows);
    }
  }
  {
    DenseTensor cur = t;
    std::vector<int> labels;
    for (int m = 1; m <= tree.order(); ++m) labels.push_back(m);
    detail::contract_children_y(tree, {0, 1}, cur, labels, y_of);
    Matrix psi_root(cur.size(), 1);
    for (Index i = 0; i < cur.size(); ++i) psi_root(i, 0) = cur.data[static_cast<std::size_t>(i)];
    s.psi[{0, 1}] = psi_root;
  }
  return s;
}

namespace detail {

// Column messages through a TTN for Khatri-Rao sketching. For each non-root
// node: up[v] (r_v x cols) contracts the subtree below v with per-mode factor
// columns; down[v] (r_v x cols) contracts everything outside the subtree.
struct TtnMessages {
  std::map<NodeKey, Matrix> up;
  std::map<NodeKey, Matrix> down;
};

inline Vector contract_core_vectors(const DenseTensor& core,
                                    const std::vector<const Vector*>& vecs /* per mode, null = keep */) {
  DenseTensor cur = core;
  for (int m = core.order(); m >= 1; --m) {
    if (!vecs[static_cast<std::size_t>(m - 1)]) continue;
    const Vector& v = *vecs[static_cast<std::size_t>(m - 1)];
    DenseTensor u({static_cast<Index>(v.size())});
    for (Index i = 0; i < v.size(); ++i) u.data[static_cast<std::size_t>(i)] = v(i);
    cur = mode_contract(cur, {m}, u);
  }
  Vector out(cur.size());
  for (Index i = 0; i < cur.size(); ++i) out(i) = cur.data[static_cast<std::size_t>(i)];
  return out;
}

inline Matrix leaf_factor_product(const DrmSpec& spec, const std::vector<Index>& shape,
                                  const std::vector<int>& modes, Side side, int cols,
                                  const Matrix& leaf) {
  const Matrix f = kr_over_modes(spec, shape, modes, side, cols);
  return tracked_product(leaf, f);  // r x cols
}

inline TtnMessages ttn_column_messages(const TtnTensor& t, const DrmSpec& spec, Side side,
                                       int cols) {
  const IndexTree& tree = t.tree;
  TtnMessages msg;
  // bottom-up
  auto nodes = tree.nonroot_nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    NodeKey v = *it;
    if (tree.is_leaf(v)) {
      msg.up[v] = leaf_factor_product(spec, t.shape, tree.node(v).indices, side, cols,
                                      t.leaves.at(v));
    } else {
      const DenseTensor& core = t.transfer.at(v);
      auto kids = tree.children(v);
      Matrix up(core.shape[0], cols);
      for (int j = 0; j < cols; ++j) {
        std::vector<Vector> kv;
        kv.reserve(kids.size());
        for (NodeKey c : kids) kv.push_back(msg.up.at(c).col(j));
        std::vector<const Vector*> ptrs(core.shape.size(), nullptr);
        for (std::size_t q = 0; q < kids.size(); ++q) ptrs[q + 1] = &kv[q];
        up.col(j) = contract_core_vectors(core, ptrs);
      }
      msg.up[v] = std::move(up);
    }
  }
  // top-down, parent by parent so sibling messages are reused
  {
    auto kids = tree.children({0, 1});
    for (std::size_t c = 0; c < kids.size(); ++c) {
      Matrix down(t.root_core.shape[c], cols);
      for (int j = 0; j < cols; ++j) {
        std::vector<Vector> sv;
        std::vector<const Vector*> ptrs(t.root_core.shape.size(), nullptr);
        sv.reserve(kids.size());
        for (std::size_t q = 0; q < kids.size(); ++q) {
          if (q == c) continue;
          sv.push_back(msg.up.at(kids[q]).col(j));
          ptrs[q] = &sv.back();
        }
        down.col(j) = contract_core_vectors(t.root_core, ptrs);
      }
      msg.down[kids[c]] = std::move(down);
    }
  }
  for (NodeKey v : tree.nonroot_nodes()) {
    if (tree.is_leaf(v)) continue;
    const DenseTensor& core = t.transfer.at(v);
    auto kids = tree.children(v);
    for (std::size_t c = 0; c < kids.size(); ++c) {
      Matrix down(core.shape[c + 1], cols);
      for (int j = 0; j < cols; ++j) {
        std::vector<Vector> sv;
        std::vector<const Vector*> ptrs(core.shape.size(), nullptr);
        sv.reserve(kids.size() + 1);
        sv.push_back(msg.down.at(v).col(j));
        ptrs[0] = &sv.back();
        for (std::size_t q = 0; q < kids.size(); ++q) {
          if (q == c) continue;
          sv.push_back(msg.up.at(kids[q]).col(j));
          ptrs[q + 1] = &sv.back();
        }
        down.col(j) = contract_core_vectors(core, ptrs);
      }
      msg.down[kids[c]] = std::move(down);
    }
  }
  return msg;
}

}  // namespace detail

// Sketch of a TTN input without densifying: per-column messages propagate
// through the cores, so the cost is linear in the mode sizes. Values agree
// with sketch_dense(to_dense(t), ...) up to floating-point reassociation.
inline SketchState sketch_ttn(const TtnTensor& t, const IndexTree& tree,
                              const RankMap& ranks, const RankMap& overs,
                              const DrmSpec& spec) {
  if (spec.kind != DrmKind::khatri_rao)
    throw PreconditionError("sketch_ttn requires a khatri_rao DRM spec");
  if (!(tree == t.tree)) throw UsageError("sketch_ttn: tree mismatch");
  int r = 0, p = 0;
  if (!ranks.uniform_value(&r) || !overs.uniform_value(&p))
    throw PreconditionError("khatri_rao sketching requires uniform ranks and oversamples");
  SketchState s{tree, t.shape, ranks, overs, spec, {}, {}};
  const auto xmsg = detail::ttn_column_messages(t, spec, Side::X, r);
  // y-side up messages only (no down pass needed)
  std::map<NodeKey, Matrix> yup;
  {
    auto nodes = tree.nonroot_nodes();
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
      NodeKey v = *it;
      if (tree.is_leaf(v)) {
        yup[v] = detail::leaf_factor_product(spec, t.shape, tree.node(v).indices, Side::Y,
                                             r + p, t.leaves.at(v));
      } else {
        const DenseTensor& core = t.transfer.at(v);
        auto kids = tree.children(v);
        Matrix up(core.shape[0], r + p);
        for (int j = 0; j < r + p; ++j) {
          std::vector<Vector> kv;
          kv.reserve(kids.size());
          for (NodeKey c : kids) kv.push_back(yup.at(c).col(j));
          std::vector<const Vector*> ptrs(core.shape.size(), nullptr);
          for (std::size_t q = 0; q < kids.size(); ++q) ptrs[q + 1] = &kv[q];
          up.col(j) = detail::contract_core_vectors(core, ptrs);
        }
        yup[v] = std::move(up);
      }
    }
  }
  for (NodeKey v : tree.nonroot_nodes()) {
    const Matrix& d = xmsg.down.at(v);
    s.omega[v] = detail::tracked_product(yup.at(v).transpose(), d);
    if (tree.is_leaf(v)) {
      s.psi[v] = detail::tracked_product(t.leaves.at(v).transpose(), d);
    } else {
      const DenseTensor& core = t.transfer.at(v);
      auto kids = tree.children(v);
      Index rows = 1;
      for (NodeKey c : kids) rows *= ranks.at(c) + overs.at(c);
      Matrix psi(rows, r);
      for (int j = 0; j < r; ++j) {
        // W_j = core x_parent d_j, then each child mode hit by that child's
        // y-message matrix
        Vector dj = d.col(j);
        DenseTensor u({static_cast<Index>(dj.size())});
        for (Index i = 0; i < dj.size(); ++i) u.data[static_cast<std::size_t>(i)] = dj(i);
        DenseTensor w = mode_contract(core, {1}, u);
        for (std::size_t c = 0; c < kids.size(); ++c) {
          const Matrix& b = yup.at(kids[c]);  // r_c x (r+p)
          w = mode_contract(w, {static_cast<int>(c) + 1},
                            tensor_from_matrix(b, {b.rows(), b.cols()}));
        }
        for (Index i = 0; i < w.size(); ++i) psi(i, j) = w.data[static_cast<std::size_t>(i)];
      }
      s.psi[v] = std::move(psi);
    }
  }
  {
    auto kids = tree.children({0, 1});
    DenseTensor w = t.root_core;
    for (std::size_t c = 0; c < kids.size(); ++c) {
      const Matrix& b = yup.at(kids[c]);
      w = mode_contract(w, {static_cast<int>(c) + 1},
                        tensor_from_matrix(b, {b.rows(), b.cols()}));
    }
    Matrix psi_root(w.size(), 1);
    for (Index i = 0; i < w.size(); ++i) psi_root(i, 0) = w.data[static_cast<std::size_t>(i)];
    s.psi[{0, 1}] = psi_root;
  }
  return s;
}

// Entrywise state + lambda * other; the streamability contract.
inline SketchState accumulate(SketchState state, const SketchState& other, double lambda) {
  if (!state.compatible(other))
    throw UsageError("accumulate: sketch states have different tree/ranks/spec identity");
  for (auto& [k, m] : state.omega) m += lambda * other.omega.at(k);
  for (auto& [k, m] : state.psi) m += lambda * other.psi.at(k);
  return state;
}

}  // namespace ttn
