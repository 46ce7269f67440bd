#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "ttn/dense_tensor.hpp"
#include "ttn/index_tree.hpp"
#include "ttn/matrix_kernels.hpp"

namespace ttn {

// Edge ranks r_{l,k} for every non-root node.
struct RankMap {
  std::map<NodeKey, int> r;

  static RankMap uniform(const IndexTree& tree, int value) {
    RankMap m;
    for (NodeKey k : tree.nonroot_nodes()) m.r[k] = value;
    return m;
  }

  int at(NodeKey k) const {
    auto it = r.find(k);
    if (it == r.end()) throw UsageError("RankMap: no entry for node " + to_string(k));
    return it->second;
  }

  bool uniform_value(int* out) const {
    int v = -1;
    for (const auto& [k, rv] : r) {
      if (v == -1) v = rv;
      if (rv != v) return false;
    }
    if (out) *out = v;
    return true;
  }

  bool operator==(const RankMap& other) const { return r == other.r; }
};

namespace detail {

inline Index phys_size(const std::vector<Index>& shape, const std::vector<int>& modes) {
  Index n = 1;
  for (int m : modes) n *= shape[static_cast<std::size_t>(m - 1)];
  return n;
}

}  // namespace detail

// Tree-shaped factorization: root core of order m_{0,1}, one transfer core per
// internal node (first mode is the node's own rank, then one mode per child in
// child order), and one r x n matrix per leaf.
struct TtnTensor {
  IndexTree tree;
  std::vector<Index> shape;
  DenseTensor root_core;
  std::map<NodeKey, DenseTensor> transfer;
  std::map<NodeKey, Matrix> leaves;

  int rank(NodeKey k) const {
    if (tree.is_leaf(k)) return static_cast<int>(leaves.at(k).rows());
    return static_cast<int>(transfer.at(k).shape[0]);
  }
};

inline RankMap ttn_ranks(const TtnTensor& t) {
  RankMap m;
  for (NodeKey k : t.tree.nonroot_nodes()) m.r[k] = t.rank(k);
  return m;
}

inline Index ttn_storage(const TtnTensor& t) {
  Index total = t.root_core.size();
  for (const auto& [k, core] : t.transfer) total += core.size();
  for (const auto& [k, m] : t.leaves) total += static_cast<Index>(m.size());
  return total;
}

// Shape/edge-compatibility check; violations come back as strings.
inline std::vector<std::string> check(const TtnTensor& t) {
  std::vector<std::string> out;
  const IndexTree& tree = t.tree;
  if (static_cast<int>(t.shape.size()) != tree.order()) {
    out.push_back("shape order does not match the tree");
    return out;
  }
  auto kids = tree.children({0, 1});
  if (t.root_core.order() != static_cast<int>(kids.size()))
    out.push_back("(0,1): root core order != number of children");
  for (NodeKey k : tree.nonroot_nodes()) {
    if (tree.is_leaf(k)) {
      auto it = t.leaves.find(k);
      if (it == t.leaves.end()) {
        out.push_back(to_string(k) + ": missing leaf matrix");
        continue;
      }
      if (it->second.cols() != detail::phys_size(t.shape, tree.node(k).indices))
        out.push_back(to_string(k) + ": leaf physical dimension mismatch");
    } else {
      auto it = t.transfer.find(k);
      if (it == t.transfer.end()) {
        out.push_back(to_string(k) + ": missing transfer core");
        continue;
      }
      auto ck = tree.children(k);
      if (it->second.order() != 1 + static_cast<int>(ck.size())) {
        out.push_back(to_string(k) + ": transfer core order mismatch");
        continue;
      }
      for (std::size_t c = 0; c < ck.size(); ++c) {
        if (it->second.shape[c + 1] != t.rank(ck[c]))
          out.push_back(to_string(k) + ": edge dimension mismatch with child " +
                        to_string(ck[c]));
      }
    }
  }
  if (t.root_core.order() == static_cast<int>(kids.size())) {
    for (std::size_t c = 0; c < kids.size(); ++c)
      if (t.root_core.shape[c] != t.rank(kids[c]))
        out.push_back("(0,1): root edge dimension mismatch with child " + to_string(kids[c]));
  }
  return out;
}

namespace detail {

// Contract `sub` (leading mode = edge rank) into `cur` at the mode currently
// labelled `lbl`, then splice the sub's own labels in. Shared by the assembly
// routines that walk transfer cores.
inline void splice_contract(DenseTensor& cur, std::vector<int>& labels, int lbl,
                            const DenseTensor& sub, const std::vector<int>& sub_labels) {
  int pos = 0;
  for (std::size_t q = 0; q < labels.size(); ++q)
    if (labels[q] == lbl) pos = static_cast<int>(q) + 1;
  if (pos == 0) throw UsageError("internal: label not found while assembling");
  cur = mode_contract(cur, {pos}, sub);
  std::vector<int> nl(labels.begin(), labels.begin() + pos - 1);
  nl.insert(nl.end(), sub_labels.begin(), sub_labels.end());
  nl.insert(nl.end(), labels.begin() + pos, labels.end());
  labels = std::move(nl);
}

inline DenseTensor sort_physical(DenseTensor cur, std::vector<int> labels,
                                 bool keep_label_zero_first) {
  std::vector<int> perm;
  if (keep_label_zero_first) {
    for (std::size_t q = 0; q < labels.size(); ++q)
      if (labels[q] == 0) perm.push_back(static_cast<int>(q) + 1);
  }
  std::vector<std::pair<int, int>> phys;
  for (std::size_t q = 0; q < labels.size(); ++q)
    if (labels[q] != 0) phys.push_back({labels[q], static_cast<int>(q) + 1});
  std::sort(phys.begin(), phys.end());
  for (auto& [lbl, q] : phys) perm.push_back(q);
  return permute_modes(cur, perm);
}

// Subtree of node v contracted into a tensor with modes (r_v, physical modes
// of I_v in increasing order).
inline DenseTensor subtree_dense(const TtnTensor& t, NodeKey v) {
  const IndexTree& tree = t.tree;
  if (tree.is_leaf(v)) {
    const Matrix& l = t.leaves.at(v);
    std::vector<Index> shape{static_cast<Index>(l.rows())};
    for (int m : tree.node(v).indices)
      shape.push_back(t.shape[static_cast<std::size_t>(m - 1)]);
    return tensor_from_matrix(l, shape);
  }
  DenseTensor cur = t.transfer.at(v);
  std::vector<int> labels{0};
  auto kids = tree.children(v);
  for (NodeKey c : kids) labels.push_back(-c.pos);
  for (NodeKey c : kids) {
    DenseTensor sub = subtree_dense(t, c);
    if (sub.shape[0] != t.rank(c))
      throw UsageError("to_dense: inconsistent subtree rank at " + to_string(c));
    splice_contract(cur, labels, -c.pos, sub, tree.node(c).indices);
  }
  return sort_physical(std::move(cur), std::move(labels), /*keep_label_zero_first=*/true);
}

}  // namespace detail

// Recursive bottom-up contraction over the tree (dummies implicit).
inline DenseTensor to_dense(const TtnTensor& t) {
  const IndexTree& tree = t.tree;
  auto viol = check(t);
  if (!viol.empty()) throw UsageError("to_dense: " + viol.front());
  DenseTensor cur = t.root_core;
  std::vector<int> labels;
  auto kids = tree.children({0, 1});
  for (NodeKey c : kids) labels.push_back(-c.pos);
  for (NodeKey c : kids) {
    DenseTensor sub = detail::subtree_dense(t, c);
    detail::splice_contract(cur, labels, -c.pos, sub, tree.node(c).indices);
  }
  DenseTensor out = detail::sort_physical(std::move(cur), std::move(labels), false);
  if (out.shape != t.shape) throw UsageError("to_dense: assembled shape mismatch");
  return out;
}

namespace detail {

template <typename LD>
using MatX = Eigen::Matrix<LD, Eigen::Dynamic, Eigen::Dynamic>;

// Contract one mode of a flat col-major array (pre x nb x post) with g
// (na x nb), producing (pre x na x post).
template <typename LD>
std::vector<LD> fold_mode(const std::vector<LD>& in, Index pre, Index nb, Index post,
                          const MatX<LD>& g) {
  const Index na = g.rows();
  std::vector<LD> out(static_cast<std::size_t>(pre * na * post));
  for (Index z = 0; z < post; ++z) {
    Eigen::Map<const MatX<LD>> slab(in.data() + z * pre * nb, pre, nb);
    Eigen::Map<MatX<LD>> oslab(out.data() + z * pre * na, pre, na);
    oslab = slab * g.transpose();
  }
  return out;
}

// Cross-Gram F_a^T F_b of the subtrees at v (r_a x r_b). Accumulation runs in
// LD; long double keeps the difference-norm formula usable well below the
// double cancellation floor.
template <typename LD>
MatX<LD> subtree_gram(const TtnTensor& a, const TtnTensor& b, NodeKey v) {
  const IndexTree& tree = a.tree;
  if (tree.is_leaf(v)) {
    MatX<LD> la = a.leaves.at(v).template cast<LD>();
    MatX<LD> lb = b.leaves.at(v).template cast<LD>();
    return la * lb.transpose();
  }
  auto kids = tree.children(v);
  const DenseTensor& ca = a.transfer.at(v);
  const DenseTensor& cb = b.transfer.at(v);
  std::vector<LD> buf(cb.data.begin(), cb.data.end());
  std::vector<Index> dims = cb.shape;
  for (std::size_t c = 0; c < kids.size(); ++c) {
    MatX<LD> g = subtree_gram<LD>(a, b, kids[c]);
    Index pre = 1, post = 1;
    for (std::size_t q = 0; q <= c; ++q) pre *= dims[q];
    for (std::size_t q = c + 2; q < dims.size(); ++q) post *= dims[q];
    buf = fold_mode<LD>(buf, pre, dims[c + 1], post, g);
    dims[c + 1] = g.rows();
  }
  const Index ra = ca.shape[0], rb = cb.shape[0];
  const Index rest = static_cast<Index>(buf.size()) / rb;
  Eigen::Map<const MatX<LD>> tmp(buf.data(), rb, rest);
  MatX<LD> cam(ra, ca.size() / ra);
  for (Index j = 0; j < ca.size() / ra; ++j)
    for (Index i = 0; i < ra; ++i)
      cam(i, j) = static_cast<LD>(ca.data[static_cast<std::size_t>(j * ra + i)]);
  return cam * tmp.transpose();
}

template <typename LD>
LD inner_impl(const TtnTensor& a, const TtnTensor& b) {
  if (!(a.tree == b.tree) || a.shape != b.shape)
    throw UsageError("inner: tree or shape mismatch");
  auto kids = a.tree.children({0, 1});
  std::vector<LD> buf(b.root_core.data.begin(), b.root_core.data.end());
  std::vector<Index> dims = b.root_core.shape;
  for (std::size_t c = 0; c < kids.size(); ++c) {
    MatX<LD> g = subtree_gram<LD>(a, b, kids[c]);
    Index pre = 1, post = 1;
    for (std::size_t q = 0; q < c; ++q) pre *= dims[q];
    for (std::size_t q = c + 1; q < dims.size(); ++q) post *= dims[q];
    buf = fold_mode<LD>(buf, pre, dims[c], post, g);
    dims[c] = g.rows();
  }
  LD acc = 0;
  for (Index i = 0; i < a.root_core.size(); ++i)
    acc += static_cast<LD>(a.root_core.data[static_cast<std::size_t>(i)]) *
           buf[static_cast<std::size_t>(i)];
  return acc;
}

}  // namespace detail

// <a,b>_F via bottom-up Gram message passing; requires the same tree/shape.
inline double inner(const TtnTensor& a, const TtnTensor& b) {
  return static_cast<double>(detail::inner_impl<long double>(a, b));
}

inline double norm(const TtnTensor& t) {
  return std::sqrt(std::max(inner(t, t), 0.0));
}

inline double rel_error(const DenseTensor& ref, const DenseTensor& x) {
  if (ref.shape != x.shape) throw UsageError("rel_error: shape mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.data.size(); ++i) {
    const double d = ref.data[i] - x.data[i];
    num += d * d;
    den += ref.data[i] * ref.data[i];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

inline double rel_error(const DenseTensor& ref, const TtnTensor& x) {
  return rel_error(ref, to_dense(x));
}

inline double rel_error(const TtnTensor& ref, const DenseTensor& x) {
  return rel_error(to_dense(ref), x);
}

// ||ref - x|| / ||ref|| via ||a||^2 - 2<a,b> + ||b||^2, clamped at 0.
inline double rel_error(const TtnTensor& ref, const TtnTensor& x) {
  const long double aa = detail::inner_impl<long double>(ref, ref);
  const long double bb = detail::inner_impl<long double>(x, x);
  const long double ab = detail::inner_impl<long double>(ref, x);
  if (aa == 0.0L) return bb == 0.0L ? 0.0 : std::numeric_limits<double>::infinity();
  const long double diff2 = std::max(aa - 2 * ab + bb, 0.0L);
  return static_cast<double>(std::sqrt(diff2 / aa));
}

enum class Decay { none, quadratic, cubic, exponential };

inline Decay decay_from_string(const std::string& s) {
  if (s == "none") return Decay::none;
  if (s == "quadratic") return Decay::quadratic;
  if (s == "cubic") return Decay::cubic;
  if (s == "exponential") return Decay::exponential;
  throw UsageError("unknown decay '" + s + "'");
}

inline double decay_weight(Decay d, int i /*1-based*/) {
  switch (d) {
    case Decay::none: return 1.0;
    case Decay::quadratic: return 1.0 / (static_cast<double>(i) * i);
    case Decay::cubic: return 1.0 / (static_cast<double>(i) * i * i);
    case Decay::exponential: return std::pow(2.0, -i);
  }
  return 1.0;
}

// Synthetic TTN: every core is a superdiagonal tensor with the prescribed
// weight decay, rotated by an independent Haar orthogonal matrix on each mode;
// leaf matrices have Haar-orthonormal rows.
inline TtnTensor random_ttn(const IndexTree& tree, const std::vector<Index>& shape,
                            const RankMap& ranks, Decay decay, std::uint64_t seed) {
  if (static_cast<int>(shape.size()) != tree.order())
    throw UsageError("random_ttn: shape order mismatch");
  TtnTensor t;
  t.tree = tree;
  t.shape = shape;
  auto make_core = [&](NodeKey v, const std::vector<Index>& dims) {
    DenseTensor core(dims);
    Index mind = *std::min_element(dims.begin(), dims.end());
    std::vector<Index> idx(dims.size(), 0);
    for (Index i = 0; i < mind; ++i) {
      std::fill(idx.begin(), idx.end(), i);
      core.at(idx) = decay_weight(decay, static_cast<int>(i) + 1);
    }
    for (std::size_t m = 0; m < dims.size(); ++m) {
      Matrix q = haar_orthogonal(dims[m], dims[m],
                                 rng::stream_key(seed, rng::kTagSynth,
                                                 static_cast<std::uint64_t>(v.level) << 20 |
                                                     static_cast<std::uint64_t>(v.pos),
                                                 m));
      core = mode_contract(core, {static_cast<int>(m) + 1},
                           tensor_from_matrix(q, {dims[m], dims[m]}));
    }
    return core;
  };
  {
    std::vector<Index> dims;
    for (NodeKey c : tree.children({0, 1})) dims.push_back(ranks.at(c));
    t.root_core = make_core({0, 1}, dims);
  }
  for (NodeKey v : tree.nonroot_nodes()) {
    if (tree.is_leaf(v)) {
      const Index n = detail::phys_size(shape, tree.node(v).indices);
      const int r = ranks.at(v);
      if (r > n)
        throw UsageError("random_ttn: rank " + std::to_string(r) + " exceeds leaf size at " +
                         to_string(v));
      Matrix q = haar_orthogonal(n, r,
                                 rng::stream_key(seed, rng::kTagSynth,
                                                 static_cast<std::uint64_t>(v.level) << 20 |
                                                     static_cast<std::uint64_t>(v.pos),
                                                 9999));
      t.leaves[v] = q.transpose();
    } else {
      std::vector<Index> dims{ranks.at(v)};
      for (NodeKey c : tree.children(v)) dims.push_back(ranks.at(c));
      t.transfer[v] = make_core(v, dims);
    }
  }
  return t;
}

// All-zero TTN with the given ranks.
inline TtnTensor zero_ttn(const IndexTree& tree, const std::vector<Index>& shape,
                          const RankMap& ranks) {
  TtnTensor t;
  t.tree = tree;
  t.shape = shape;
  std::vector<Index> rdims;
  for (NodeKey c : tree.children({0, 1})) rdims.push_back(ranks.at(c));
  t.root_core = DenseTensor(rdims);
  for (NodeKey v : tree.nonroot_nodes()) {
    if (tree.is_leaf(v)) {
      t.leaves[v] = Matrix::Zero(ranks.at(v), detail::phys_size(shape, tree.node(v).indices));
    } else {
      std::vector<Index> dims{ranks.at(v)};
      for (NodeKey c : tree.children(v)) dims.push_back(ranks.at(c));
      t.transfer[v] = DenseTensor(dims);
    }
  }
  return t;
}

}  // namespace ttn
