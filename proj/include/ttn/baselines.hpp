#pragma once

#include <map>
#include <vector>

#include "ttn/sketch.hpp"
#include "ttn/ttn_tensor.hpp"

namespace ttn {

// Per-node orthonormal range bases U_{l,k} (n_I x r).
struct BasisMap {
  std::map<NodeKey, Matrix> u;
};

namespace detail {

// Leading left singular vectors of m, deterministic. Small row counts go
// through an exact Gram eigendecomposition; large ones through blocked
// subspace iteration on m m^T with a fixed starting basis (the spectra this
// is used on decay quickly, so convergence is fast).
inline Matrix leading_left_singular_vectors(const Matrix& m, int r) {
  const Index rows = m.rows();
  const int avail = static_cast<int>(std::min(m.rows(), m.cols()));
  Matrix u;
  if (rows <= 2048) {
    Matrix g = m * m.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
    const int keep = std::min(r, static_cast<int>(rows));
    u = Matrix(rows, keep);
    for (int i = 0; i < keep; ++i) u.col(i) = eig.eigenvectors().col(rows - 1 - i);
  } else {
    const int block = static_cast<int>(std::min<Index>(rows, r + 10));
    const int keep = std::min(r, block);
    Matrix q = economy_qr(rng::gaussian(rows, block,
                                        rng::stream_key(0x5eedba5eULL, rng::kTagKernel, 17)))
                   .first;
    Vector prev = Vector::Zero(block);
    Matrix rot = Matrix::Identity(block, block);
    for (int it = 0; it < 400; ++it) {
      Matrix y = m.transpose() * q;          // n x b
      Matrix small = y.transpose() * y;      // q^T (m m^T) q
      Eigen::SelfAdjointEigenSolver<Matrix> eig(small);
      Vector ritz(block);
      for (int i = 0; i < block; ++i) {
        ritz(i) = eig.eigenvalues()(block - 1 - i);
        rot.col(i) = eig.eigenvectors().col(block - 1 - i);
      }
      const double scale = std::max(ritz(0), 1e-300);
      const bool converged =
          it > 2 && (ritz.head(keep) - prev.head(keep)).cwiseAbs().maxCoeff() <= 1e-13 * scale;
      prev = ritz;
      if (converged) break;
      q = economy_qr(m * y).first;
    }
    u = (q * rot).leftCols(keep);
  }
  if (u.cols() < r) {
    warn("rank exceeds matrix rank; basis zero-padded");
    Matrix padded = Matrix::Zero(rows, r);
    padded.leftCols(u.cols()) = u;
    return padded;
  }
  if (r > avail)
    warn("requested rank exceeds min(rows, cols); trailing basis vectors span the nullspace");
  return u;
}

}  // namespace detail

inline BasisMap svd_bases(const DenseTensor& t, const IndexTree& tree, const RankMap& ranks) {
  BasisMap b;
  for (NodeKey v : tree.nonroot_nodes()) {
    const Matrix m = matricize(t, tree.node(v).indices);
    b.u[v] = detail::leading_left_singular_vectors(m, ranks.at(v));
  }
  return b;
}

inline BasisMap hmt_bases(const DenseTensor& t, const IndexTree& tree, const RankMap& ranks,
                          const RankMap& overs, const DrmSpec& spec,
                          const DrmDraws* draws = nullptr) {
  BasisMap b;
  for (NodeKey v : tree.nonroot_nodes()) {
    const Matrix x = draws ? detail::sliced_drm(*draws, v, Side::X, ranks.at(v))
                           : drm(spec, tree, t.shape, v, Side::X, ranks, overs);
    Matrix q = economy_qr(detail::right_sketch_apply(t, tree.node(v).indices, x)).first;
    if (q.cols() < ranks.at(v)) {
      warn("hmt basis zero-padded at " + to_string(v));
      Matrix padded = Matrix::Zero(q.rows(), ranks.at(v));
      padded.leftCols(q.cols()) = q;
      q = std::move(padded);
    }
    b.u[v] = std::move(q);
  }
  return b;
}

// Assembles the projected TTN: leaves carry U^T, internal cores re-express
// their basis in the children's bases, the root contracts t against every
// level-1 basis.
inline TtnTensor assemble_from_bases(const DenseTensor& t, const IndexTree& tree,
                                     const BasisMap& bases) {
  TtnTensor out;
  out.tree = tree;
  out.shape = t.shape;
  for (NodeKey v : tree.nonroot_nodes()) {
    if (tree.is_leaf(v)) {
      out.leaves[v] = bases.u.at(v).transpose();
      continue;
    }
    const auto& idx = tree.node(v).indices;
    const Matrix& uv = bases.u.at(v);
    std::vector<Index> tshape;
    for (int m : idx) tshape.push_back(t.shape[static_cast<std::size_t>(m - 1)]);
    tshape.push_back(uv.cols());
    DenseTensor cur = tensor_from_matrix(uv, tshape);
    std::vector<int> labels(idx.begin(), idx.end());
    labels.push_back(0);
    detail::contract_children_y(tree, v, cur, labels, [&](NodeKey c) {
      return bases.u.at(c);
    });
    auto kids = tree.children(v);
    Matrix coeff = matricize(cur, {static_cast<int>(kids.size()) + 1});  // r_v x prod(r_c)
    std::vector<Index> cshape{static_cast<Index>(uv.cols())};
    for (NodeKey c : kids) cshape.push_back(bases.u.at(c).cols());
    out.transfer[v] = unmatricize(coeff, cshape, {1});
  }
  {
    DenseTensor cur = t;
    std::vector<int> labels;
    for (int m = 1; m <= tree.order(); ++m) labels.push_back(m);
    detail::contract_children_y(tree, {0, 1}, cur, labels, [&](NodeKey c) {
      return bases.u.at(c);
    });
    out.root_core = cur;
  }
  return out;
}

// Hierarchical SVD adapted to the tree: per-node truncated bases from the full
// dense matricizations, deterministic.
inline TtnTensor ttn_svd(const DenseTensor& t, const IndexTree& tree, const RankMap& ranks) {
  return assemble_from_bases(t, tree, svd_bases(t, tree, ranks));
}

// Randomized variant: bases from orth(T^{l,k} X) with the shared X labels, so
// comparisons against the Nystrom compressor use identical randomness.
inline TtnTensor ttn_hmt(const DenseTensor& t, const IndexTree& tree, const RankMap& ranks,
                         const RankMap& overs, const DrmSpec& spec,
                         const DrmDraws* draws = nullptr) {
  return assemble_from_bases(t, tree, hmt_bases(t, tree, ranks, overs, spec, draws));
}

namespace detail {

// W such that F W has orthonormal columns spanning the leading left singular
// space, given S = F^T F and E = C^T C (environment Gram). Returns r columns,
// zero-padded past the numerical rank.
inline Matrix rank_space_basis(const Matrix& s, const Matrix& e, int r) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  const Index n = s.rows();
  Vector lam = es.eigenvalues();
  const double lmax = std::max(lam.maxCoeff(), 0.0);
  Vector sq = Vector::Zero(n), isq = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (lam(i) > lmax * 1e-14 && lam(i) > 0.0) {
      sq(i) = std::sqrt(lam(i));
      isq(i) = 1.0 / sq(i);
    }
  }
  const Matrix w = es.eigenvectors();
  const Matrix rf = sq.asDiagonal() * w.transpose();          // R_F with S = R_F^T R_F
  const Matrix small = rf * e * rf.transpose();               // spectrum of T^{l,k} squared
  Eigen::SelfAdjointEigenSolver<Matrix> em(small);
  const int keep = static_cast<int>(std::min<Index>(r, n));
  Matrix us(n, keep);
  for (int i = 0; i < keep; ++i) us.col(i) = em.eigenvectors().col(n - 1 - i);
  Matrix out = Matrix::Zero(n, r);
  // pinv(R_F) = W diag(isq)
  out.leftCols(keep) = w * isq.asDiagonal() * us;
  if (keep < r) warn("rank-space basis zero-padded");
  return out;
}

struct GramMaps {
  std::map<NodeKey, Matrix> sub;  // S_v = F_v^T F_v
  std::map<NodeKey, Matrix> env;  // E_v = C_v^T C_v
};

inline GramMaps ttn_gram_maps(const TtnTensor& t) {
  const IndexTree& tree = t.tree;
  GramMaps g;
  auto nodes = tree.nonroot_nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    NodeKey v = *it;
    if (tree.is_leaf(v)) {
      g.sub[v] = t.leaves.at(v) * t.leaves.at(v).transpose();
    } else {
      const DenseTensor& core = t.transfer.at(v);
      DenseTensor tmp = core;
      auto kids = tree.children(v);
      for (std::size_t c = 0; c < kids.size(); ++c) {
        const Matrix& sc = g.sub.at(kids[c]);
        tmp = mode_contract(tmp, {static_cast<int>(c) + 2},
                            tensor_from_matrix(sc, {sc.rows(), sc.cols()}));
      }
      g.sub[v] = matricize(core, {1}) * matricize(tmp, {1}).transpose();
    }
  }
  // environment Grams, top-down
  {
    auto kids = tree.children({0, 1});
    for (std::size_t c = 0; c < kids.size(); ++c) {
      DenseTensor tmp = t.root_core;
      for (std::size_t q = 0; q < kids.size(); ++q) {
        if (q == c) continue;
        const Matrix& sq = g.sub.at(kids[q]);
        tmp = mode_contract(tmp, {static_cast<int>(q) + 1},
                            tensor_from_matrix(sq, {sq.rows(), sq.cols()}));
      }
      const int pos = static_cast<int>(c) + 1;
      g.env[kids[c]] =
          matricize(t.root_core, {pos}) * matricize(tmp, {pos}).transpose();
    }
  }
  for (NodeKey v : tree.nonroot_nodes()) {
    if (tree.is_leaf(v)) continue;
    const DenseTensor& core = t.transfer.at(v);
    auto kids = tree.children(v);
    for (std::size_t c = 0; c < kids.size(); ++c) {
      DenseTensor tmp = core;
      {
        const Matrix& ev = g.env.at(v);
        tmp = mode_contract(tmp, {1}, tensor_from_matrix(ev, {ev.rows(), ev.cols()}));
      }
      for (std::size_t q = 0; q < kids.size(); ++q) {
        if (q == c) continue;
        const Matrix& sq = g.sub.at(kids[q]);
        tmp = mode_contract(tmp, {static_cast<int>(q) + 2},
                            tensor_from_matrix(sq, {sq.rows(), sq.cols()}));
      }
      const int pos = static_cast<int>(c) + 2;
      g.env[kids[c]] = matricize(core, {pos}) * matricize(tmp, {pos}).transpose();
    }
  }
  return g;
}

// Shared assembly for the rank-space recompressors: new cores from the old
// ones with child modes hit by S_c W_c and parent modes by W_v.
inline TtnTensor assemble_rank_space(const TtnTensor& t, const std::map<NodeKey, Matrix>& w,
                                     const GramMaps& g) {
  const IndexTree& tree = t.tree;
  TtnTensor out;
  out.tree = tree;
  out.shape = t.shape;
  for (NodeKey v : tree.nonroot_nodes()) {
    if (tree.is_leaf(v)) {
      out.leaves[v] = w.at(v).transpose() * t.leaves.at(v);
    } else {
      DenseTensor tmp = t.transfer.at(v);
      const Matrix& wv = w.at(v);
      tmp = mode_contract(tmp, {1}, tensor_from_matrix(wv, {wv.rows(), wv.cols()}));
      auto kids = tree.children(v);
      for (std::size_t c = 0; c < kids.size(); ++c) {
        Matrix sw = g.sub.at(kids[c]) * w.at(kids[c]);
        tmp = mode_contract(tmp, {static_cast<int>(c) + 2},
                            tensor_from_matrix(sw, {sw.rows(), sw.cols()}));
      }
      out.transfer[v] = tmp;
    }
  }
  {
    DenseTensor tmp = t.root_core;
    auto kids = tree.children({0, 1});
    for (std::size_t c = 0; c < kids.size(); ++c) {
      Matrix sw = g.sub.at(kids[c]) * w.at(kids[c]);
      tmp = mode_contract(tmp, {static_cast<int>(c) + 1},
                          tensor_from_matrix(sw, {sw.rows(), sw.cols()}));
    }
    out.root_core = tmp;
  }
  return out;
}

}  // namespace detail

// Deterministic recompression of a TTN input: per-node leading singular bases
// computed in the rank space via subtree/environment Grams; nothing of
// physical size n_I is ever formed.
inline TtnTensor ttn_svd_recompress(const TtnTensor& t, const RankMap& ranks) {
  detail::GramMaps g = detail::ttn_gram_maps(t);
  std::map<NodeKey, Matrix> w;
  for (NodeKey v : t.tree.nonroot_nodes())
    w[v] = detail::rank_space_basis(g.sub.at(v), g.env.at(v), ranks.at(v));
  return detail::assemble_rank_space(t, w, g);
}

// Randomized variant on TTN inputs: ranges of T^{l,k} X with Khatri-Rao X
// (same labels as the Nystrom rounding path), orthonormalized in rank space.
inline TtnTensor ttn_hmt_recompress(const TtnTensor& t, const RankMap& ranks,
                                    const RankMap& overs, const DrmSpec& spec) {
  if (spec.kind != DrmKind::khatri_rao)
    throw PreconditionError("ttn_hmt_recompress requires a khatri_rao DRM spec");
  int r = 0;
  if (!ranks.uniform_value(&r))
    throw PreconditionError("khatri_rao sketching requires uniform ranks");
  detail::GramMaps g = detail::ttn_gram_maps(t);
  const auto xmsg = detail::ttn_column_messages(t, spec, Side::X, r);
  std::map<NodeKey, Matrix> w;
  for (NodeKey v : t.tree.nonroot_nodes()) {
    const Matrix& d = xmsg.down.at(v);  // r_v x r
    Matrix gram = d.transpose() * g.sub.at(v) * d;
    Eigen::SelfAdjointEigenSolver<Matrix> eg(gram);
    Vector lam = eg.eigenvalues();
    const double lmax = std::max(lam.maxCoeff(), 0.0);
    Matrix winv = Matrix::Zero(gram.rows(), gram.cols());
    int kept = 0;
    for (Index i = 0; i < lam.size(); ++i) {
      if (lam(i) > lmax * 1e-14 && lam(i) > 0.0) {
        winv += (1.0 / std::sqrt(lam(i))) * eg.eigenvectors().col(i) *
                eg.eigenvectors().col(i).transpose();
        ++kept;
      }
    }
    if (kept < ranks.at(v)) warn("hmt recompress basis rank-deficient at " + to_string(v));
    w[v] = d * winv;  // F_v w has orthonormal columns on the kept subspace
  }
  return detail::assemble_rank_space(t, w, g);
}

}  // namespace ttn
