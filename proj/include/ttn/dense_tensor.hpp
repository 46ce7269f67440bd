#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ttn/errors.hpp"
#include "ttn/flops.hpp"

namespace ttn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = std::int64_t;

// Dense d-dimensional array stored first-index-fastest. Mode sets handed to
// matricize/mode_contract use 1-based mode numbers; element access is 0-based.
struct DenseTensor {
  std::vector<Index> shape;
  std::vector<double> data;

  DenseTensor() = default;

  explicit DenseTensor(std::vector<Index> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(check_shape(shape)), 0.0);
  }

  DenseTensor(std::vector<Index> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<Index>(data.size()) != check_shape(shape))
      throw UsageError("DenseTensor: data length does not match shape");
  }

  static Index check_shape(const std::vector<Index>& s) {
    if (s.empty()) throw UsageError("DenseTensor: order must be >= 1");
    Index total = 1;
    for (Index n : s) {
      if (n < 1) throw UsageError("DenseTensor: every mode size must be >= 1");
      total *= n;
    }
    return total;
  }

  int order() const { return static_cast<int>(shape.size()); }
  Index size() const { return static_cast<Index>(data.size()); }

  double& operator[](Index i) { return data[static_cast<std::size_t>(i)]; }
  double operator[](Index i) const { return data[static_cast<std::size_t>(i)]; }

  Index linear_index(const std::vector<Index>& idx) const {
    Index p = 0, stride = 1;
    for (int m = 0; m < order(); ++m) {
      p += idx[m] * stride;
      stride *= shape[m];
    }
    return p;
  }

  double& at(const std::vector<Index>& idx) { return data[linear_index(idx)]; }
  double at(const std::vector<Index>& idx) const { return data[linear_index(idx)]; }
};

namespace detail {

inline void check_mode_set(const std::vector<int>& modes, int d) {
  if (modes.empty()) throw UsageError("mode set must be nonempty");
  for (std::size_t t = 0; t < modes.size(); ++t) {
    if (modes[t] < 1 || modes[t] > d)
      throw UsageError("mode index out of range: " + std::to_string(modes[t]));
    if (t > 0 && modes[t] <= modes[t - 1])
      throw UsageError("mode set must be strictly increasing (duplicate or unordered index)");
  }
}

// Contiguous mode ranges admit copy-free slab arithmetic: the tensor is a
// (pre, mid, post) stack of column-major slabs.
struct ContiguousSplit {
  Index pre = 1, mid = 1, post = 1;
};

inline std::optional<ContiguousSplit> contiguous_split(const std::vector<Index>& shape,
                                                       const std::vector<int>& modes) {
  for (std::size_t i = 1; i < modes.size(); ++i)
    if (modes[i] != modes[i - 1] + 1) return std::nullopt;
  ContiguousSplit s;
  for (int m = 1; m < modes.front(); ++m) s.pre *= shape[static_cast<std::size_t>(m - 1)];
  for (int m : modes) s.mid *= shape[static_cast<std::size_t>(m - 1)];
  for (int m = modes.back() + 1; m <= static_cast<int>(shape.size()); ++m)
    s.post *= shape[static_cast<std::size_t>(m - 1)];
  return s;
}

struct SplitStrides {
  std::vector<Index> row, col;  // per-mode strides; 0 when the mode is on the other side
  Index rows = 1, cols = 1;
};

inline SplitStrides split_strides(const std::vector<Index>& shape,
                                  const std::vector<int>& modes) {
  const int d = static_cast<int>(shape.size());
  SplitStrides s;
  s.row.assign(d, 0);
  s.col.assign(d, 0);
  std::vector<char> sel(d, 0);
  for (int m : modes) sel[m - 1] = 1;
  for (int m : modes) {
    s.row[m - 1] = s.rows;
    s.rows *= shape[m - 1];
  }
  for (int m = 0; m < d; ++m) {
    if (!sel[m]) {
      s.col[m] = s.cols;
      s.cols *= shape[m];
    }
  }
  return s;
}

}  // namespace detail

// Mode-I unfolding: rows indexed by I, columns by the complement, both in
// increasing mode order with the smallest mode varying fastest.
inline Matrix matricize(const DenseTensor& t, const std::vector<int>& modes) {
  detail::check_mode_set(modes, t.order());
  if (auto cs = detail::contiguous_split(t.shape, modes)) {
    Matrix out(cs->mid, cs->pre * cs->post);
    if (cs->pre == 1) {
      out = Eigen::Map<const Matrix>(t.data.data(), cs->mid, cs->post);
    } else {
      for (Index z = 0; z < cs->post; ++z) {
        Eigen::Map<const Matrix> slab(t.data.data() + z * cs->pre * cs->mid, cs->pre, cs->mid);
        out.middleCols(z * cs->pre, cs->pre) = slab.transpose();
      }
    }
    return out;
  }
  const auto s = detail::split_strides(t.shape, modes);
  Matrix out(s.rows, s.cols);
  double* o = out.data();
  std::vector<Index> idx(t.order(), 0);
  Index row = 0, col = 0;
  const Index total = t.size();
  for (Index p = 0; p < total; ++p) {
    o[col * s.rows + row] = t.data[static_cast<std::size_t>(p)];
    for (int m = 0; m < t.order(); ++m) {
      ++idx[m];
      row += s.row[m];
      col += s.col[m];
      if (idx[m] < t.shape[m]) break;
      row -= s.row[m] * t.shape[m];
      col -= s.col[m] * t.shape[m];
      idx[m] = 0;
    }
  }
  return out;
}

// Inverse of matricize for a given shape and row-mode set.
inline DenseTensor unmatricize(const Matrix& m, const std::vector<Index>& shape,
                               const std::vector<int>& modes) {
  detail::check_mode_set(modes, static_cast<int>(shape.size()));
  if (auto cs = detail::contiguous_split(shape, modes)) {
    if (m.rows() != cs->mid || m.cols() != cs->pre * cs->post)
      throw UsageError("unmatricize: matrix dimensions do not match shape/mode split");
    DenseTensor t(shape);
    if (cs->pre == 1) {
      Eigen::Map<Matrix>(t.data.data(), cs->mid, cs->post) = m;
    } else {
      for (Index z = 0; z < cs->post; ++z) {
        Eigen::Map<Matrix> slab(t.data.data() + z * cs->pre * cs->mid, cs->pre, cs->mid);
        slab = m.middleCols(z * cs->pre, cs->pre).transpose();
      }
    }
    return t;
  }
  const auto s = detail::split_strides(shape, modes);
  if (m.rows() != s.rows || m.cols() != s.cols)
    throw UsageError("unmatricize: matrix dimensions do not match shape/mode split");
  DenseTensor t(shape);
  const double* in = m.data();
  std::vector<Index> idx(t.order(), 0);
  Index row = 0, col = 0;
  const Index total = t.size();
  for (Index p = 0; p < total; ++p) {
    t.data[static_cast<std::size_t>(p)] = in[col * s.rows + row];
    for (int mo = 0; mo < t.order(); ++mo) {
      ++idx[mo];
      row += s.row[mo];
      col += s.col[mo];
      if (idx[mo] < t.shape[mo]) break;
      row -= s.row[mo] * t.shape[mo];
      col -= s.col[mo] * t.shape[mo];
      idx[mo] = 0;
    }
  }
  return t;
}

inline DenseTensor reshape(const DenseTensor& t, std::vector<Index> shape) {
  DenseTensor out;
  out.shape = std::move(shape);
  if (DenseTensor::check_shape(out.shape) != t.size())
    throw UsageError("reshape: element count mismatch");
  out.data = t.data;
  return out;
}

inline DenseTensor tensor_from_matrix(const Matrix& m, std::vector<Index> shape) {
  DenseTensor out;
  out.shape = std::move(shape);
  if (DenseTensor::check_shape(out.shape) != static_cast<Index>(m.size()))
    throw UsageError("tensor_from_matrix: element count mismatch");
  out.data.assign(m.data(), m.data() + m.size());
  return out;
}

// Reorders modes; perm[q] is the 1-based old mode placed at new position q.
inline DenseTensor permute_modes(const DenseTensor& t, const std::vector<int>& perm) {
  const int d = t.order();
  if (static_cast<int>(perm.size()) != d)
    throw UsageError("permute_modes: permutation length mismatch");
  std::vector<char> seen(d, 0);
  std::vector<Index> new_shape(d);
  for (int q = 0; q < d; ++q) {
    if (perm[q] < 1 || perm[q] > d || seen[perm[q] - 1])
      throw UsageError("permute_modes: invalid permutation");
    seen[perm[q] - 1] = 1;
    new_shape[q] = t.shape[perm[q] - 1];
  }
  bool identity = true;
  for (int q = 0; q < d; ++q) identity = identity && perm[q] == q + 1;
  if (identity) return t;

  DenseTensor out(new_shape);
  std::vector<Index> out_stride_of_old(d, 0);
  Index acc = 1;
  for (int q = 0; q < d; ++q) {
    out_stride_of_old[perm[q] - 1] = acc;
    acc *= new_shape[q];
  }
  std::vector<Index> idx(d, 0);
  Index op = 0;
  const Index total = t.size();
  for (Index p = 0; p < total; ++p) {
    out.data[static_cast<std::size_t>(op)] = t.data[static_cast<std::size_t>(p)];
    for (int m = 0; m < d; ++m) {
      ++idx[m];
      op += out_stride_of_old[m];
      if (idx[m] < t.shape[m]) break;
      op -= out_stride_of_old[m] * t.shape[m];
      idx[m] = 0;
    }
  }
  return out;
}

// Contracts the I-modes of t against the leading |I| modes of u. The trailing
// modes of u replace the contracted block at the position of min(I); the
// remaining modes of t keep their relative order.
inline DenseTensor mode_contract(const DenseTensor& t, const std::vector<int>& modes,
                                 const DenseTensor& u) {
  detail::check_mode_set(modes, t.order());
  const int k = static_cast<int>(modes.size());
  if (u.order() < k)
    throw UsageError("mode_contract: contracting tensor has too few modes");
  for (int i = 0; i < k; ++i) {
    if (u.shape[i] != t.shape[modes[i] - 1])
      throw UsageError("mode_contract: size mismatch on mode " + std::to_string(modes[i]));
  }

  std::vector<int> lead(k);
  for (int i = 0; i < k; ++i) lead[i] = i + 1;
  const Matrix um = matricize(u, lead);  // n_I x n_trail
  flops::add(static_cast<std::uint64_t>(um.cols()) * um.rows() * (t.size() / um.rows()));

  if (auto cs = detail::contiguous_split(t.shape, modes)) {
    // slab arithmetic over the (pre, mid, post) layout; the trailing block
    // lands exactly between the pre and post modes
    std::vector<Index> result_shape;
    for (int m = 1; m < modes.front(); ++m) result_shape.push_back(t.shape[m - 1]);
    for (int s = k; s < u.order(); ++s) result_shape.push_back(u.shape[s]);
    for (int m = modes.back() + 1; m <= t.order(); ++m) result_shape.push_back(t.shape[m - 1]);
    const Index trail = um.cols();
    DenseTensor out(result_shape.empty() ? std::vector<Index>{1} : result_shape);
    if (cs->pre == 1) {
      Eigen::Map<const Matrix> in(t.data.data(), cs->mid, cs->post);
      Eigen::Map<Matrix> o(out.data.data(), trail, cs->post);
      o.noalias() = um.transpose() * in;
    } else if (cs->post == 1) {
      Eigen::Map<const Matrix> in(t.data.data(), cs->pre, cs->mid);
      Eigen::Map<Matrix> o(out.data.data(), cs->pre, trail);
      o.noalias() = in * um;
    } else {
      for (Index z = 0; z < cs->post; ++z) {
        Eigen::Map<const Matrix> in(t.data.data() + z * cs->pre * cs->mid, cs->pre, cs->mid);
        Eigen::Map<Matrix> o(out.data.data() + z * cs->pre * trail, cs->pre, trail);
        o.noalias() = in * um;
      }
    }
    return out;
  }

  const Matrix tm = matricize(t, modes);  // n_I x n_rest
  const Matrix rm = um.transpose() * tm;  // n_trail x n_rest

  std::vector<Index> result_shape;
  std::vector<int> block;
  const int trailing = u.order() - k;
  int q = 0;  // complement modes smaller than min(I)
  for (int m = 1; m < modes[0]; ++m)
    if (std::find(modes.begin(), modes.end(), m) == modes.end()) ++q;
  {
    int placed = 0;
    std::vector<char> sel(t.order() + 1, 0);
    for (int m : modes) sel[m] = 1;
    int pos = 0;
    for (int m = 1; m <= t.order(); ++m) {
      if (pos == q && placed == 0) {
        for (int s = 0; s < trailing; ++s) {
          result_shape.push_back(u.shape[k + s]);
          block.push_back(static_cast<int>(result_shape.size()));
        }
        placed = 1;
      }
      if (!sel[m]) {
        result_shape.push_back(t.shape[m - 1]);
        ++pos;
      }
    }
    if (placed == 0) {
      for (int s = 0; s < trailing; ++s) {
        result_shape.push_back(u.shape[k + s]);
        block.push_back(static_cast<int>(result_shape.size()));
      }
    }
  }
  if (result_shape.empty()) {
    DenseTensor out({1});
    out.data[0] = rm(0, 0);
    return out;
  }
  if (block.empty()) {
    // fully contracted block: rm is 1 x n_rest, result = complement modes
    DenseTensor out(result_shape);
    for (Index j = 0; j < rm.cols(); ++j) out.data[static_cast<std::size_t>(j)] = rm(0, j);
    return out;
  }
  return unmatricize(rm, result_shape, block);
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index ja = 0; ja < a.cols(); ++ja)
    for (Eigen::Index jb = 0; jb < b.cols(); ++jb)
      for (Eigen::Index ia = 0; ia < a.rows(); ++ia)
        out.block(ia * b.rows(), ja * b.cols() + jb, b.rows(), 1) = a(ia, ja) * b.col(jb);
  flops::add(static_cast<std::uint64_t>(out.size()));
  return out;
}

// Column-wise Khatri-Rao product; column j is kron(a.col(j), b.col(j)).
inline Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw UsageError("khatri_rao: column-count mismatch");
  Matrix out(a.rows() * b.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index ia = 0; ia < a.rows(); ++ia)
      out.block(ia * b.rows(), j, b.rows(), 1) = a(ia, j) * b.col(j);
  flops::add(static_cast<std::uint64_t>(out.size()));
  return out;
}

inline double frobenius_norm(const Matrix& m) { return m.norm(); }

inline double frobenius_norm(const DenseTensor& t) {
  double s = 0.0;
  for (double x : t.data) s += x * x;
  return std::sqrt(s);
}

// Entry at 1-based multi-index (i1..id) is 1/(1 + sum_k i_k).
inline DenseTensor hilbert_tensor(int d, Index n) {
  if (d < 1 || n < 1) throw UsageError("hilbert_tensor: d and n must be >= 1");
  DenseTensor t(std::vector<Index>(static_cast<std::size_t>(d), n));
  std::vector<Index> idx(static_cast<std::size_t>(d), 0);
  const Index total = t.size();
  Index isum = d;  // all 1-based indices start at 1
  for (Index p = 0; p < total; ++p) {
    t.data[static_cast<std::size_t>(p)] = 1.0 / static_cast<double>(1 + isum);
    for (int m = 0; m < d; ++m) {
      ++idx[m];
      ++isum;
      if (idx[m] < n) break;
      isum -= n;  // idx[m] wraps from n-1 back to 0
      idx[m] = 0;
    }
  }
  return t;
}

}  // namespace ttn
