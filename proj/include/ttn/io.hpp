#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttn/sketch.hpp"
#include "ttn/ttn_tensor.hpp"

namespace ttn::io {

namespace fs = std::filesystem;

// Dense tensor file: magic "TTNT", u32 d, u64 shape[d], then the values as
// little-endian f64, first index fastest.
inline void write_dense_tensor(const fs::path& path, const DenseTensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open for writing: " + path.string());
  f.write("TTNT", 4);
  const std::uint32_t d = static_cast<std::uint32_t>(t.order());
  f.write(reinterpret_cast<const char*>(&d), 4);
  for (Index n : t.shape) {
    const std::uint64_t v = static_cast<std::uint64_t>(n);
    f.write(reinterpret_cast<const char*>(&v), 8);
  }
  f.write(reinterpret_cast<const char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!f) throw UsageError("short write: " + path.string());
}

inline DenseTensor read_dense_tensor(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open tensor file: " + path.string());
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "TTNT", 4) != 0)
    throw UsageError("not a tensor file (bad magic): " + path.string());
  std::uint32_t d = 0;
  f.read(reinterpret_cast<char*>(&d), 4);
  if (!f || d == 0 || d > 64) throw UsageError("bad tensor order in " + path.string());
  std::vector<Index> shape(d);
  for (std::uint32_t i = 0; i < d; ++i) {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    shape[i] = static_cast<Index>(v);
  }
  if (!f) throw UsageError("truncated tensor header: " + path.string());
  DenseTensor t(shape);
  f.read(reinterpret_cast<char*>(t.data.data()),
         static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!f) throw UsageError("truncated tensor data: " + path.string());
  return t;
}

namespace detail {

inline nlohmann::json ranks_json(const IndexTree& tree, const RankMap& m) {
  nlohmann::json j = nlohmann::json::array();
  for (NodeKey v : tree.nonroot_nodes()) j.push_back({v.level, v.pos, m.at(v)});
  return j;
}

inline RankMap ranks_from_json(const nlohmann::json& j) {
  RankMap m;
  for (const auto& e : j) m.r[{e.at(0).get<int>(), e.at(1).get<int>()}] = e.at(2).get<int>();
  return m;
}

inline void append_block(std::ofstream& bin, nlohmann::json& blocks, const std::string& kind,
                         NodeKey v, const double* data, Index rows, Index cols,
                         std::uint64_t& offset) {
  nlohmann::json b;
  b["node"] = {v.level, v.pos};
  b["kind"] = kind;
  b["rows"] = rows;
  b["cols"] = cols;
  b["offset"] = offset;
  blocks.push_back(b);
  const std::uint64_t count = static_cast<std::uint64_t>(rows * cols);
  bin.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(double)));
  offset += count;
}

inline std::vector<double> read_block(std::ifstream& bin, std::uint64_t offset,
                                      std::uint64_t count) {
  bin.seekg(static_cast<std::streamoff>(offset * sizeof(double)));
  std::vector<double> out(count);
  bin.read(reinterpret_cast<char*>(out.data()),
           static_cast<std::streamsize>(count * sizeof(double)));
  if (!bin) throw UsageError("truncated binary blob");
  return out;
}

}  // namespace detail

// TTN directory: manifest.json (tree, shape, ranks, per-core offsets) plus
// cores.bin (f64 little-endian, level-major position-minor, each core first
// index fastest).
inline void write_ttn(const fs::path& dir, const TtnTensor& t) {
  fs::create_directories(dir);
  std::ofstream bin(dir / "cores.bin", std::ios::binary);
  if (!bin) throw UsageError("cannot write " + (dir / "cores.bin").string());
  nlohmann::json manifest;
  manifest["tree"] = tree_to_json(t.tree);
  manifest["shape"] = t.shape;
  manifest["ranks"] = detail::ranks_json(t.tree, ttn_ranks(t));
  nlohmann::json cores = nlohmann::json::array();
  std::uint64_t offset = 0;
  auto add_core = [&](NodeKey v, const DenseTensor& c) {
    nlohmann::json e;
    e["node"] = {v.level, v.pos};
    e["dims"] = c.shape;
    e["offset"] = offset;
    e["count"] = c.size();
    cores.push_back(e);
    bin.write(reinterpret_cast<const char*>(c.data.data()),
              static_cast<std::streamsize>(c.data.size() * sizeof(double)));
    offset += static_cast<std::uint64_t>(c.size());
  };
  add_core({0, 1}, t.root_core);
  for (NodeKey v : t.tree.nonroot_nodes()) {
    if (t.tree.is_leaf(v)) {
      const Matrix& l = t.leaves.at(v);
      DenseTensor c = tensor_from_matrix(l, {l.rows(), l.cols()});
      add_core(v, c);
    } else {
      add_core(v, t.transfer.at(v));
    }
  }
  manifest["cores"] = cores;
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << "\n";
  if (!mf) throw UsageError("cannot write " + (dir / "manifest.json").string());
}

inline TtnTensor read_ttn(const fs::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw UsageError("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("bad manifest: " + std::string(e.what()));
  }
  TtnTensor t;
  t.tree = tree_from_json(manifest.at("tree"));
  t.shape = manifest.at("shape").get<std::vector<Index>>();
  std::ifstream bin(dir / "cores.bin", std::ios::binary);
  if (!bin) throw UsageError("cannot open " + (dir / "cores.bin").string());
  for (const auto& e : manifest.at("cores")) {
    const NodeKey v{e.at("node").at(0).get<int>(), e.at("node").at(1).get<int>()};
    const auto dims = e.at("dims").get<std::vector<Index>>();
    auto data = detail::read_block(bin, e.at("offset").get<std::uint64_t>(),
                                   e.at("count").get<std::uint64_t>());
    DenseTensor c(dims, std::move(data));
    if (v == NodeKey{0, 1}) {
      t.root_core = std::move(c);
    } else if (t.tree.is_leaf(v)) {
      if (c.order() != 2) throw UsageError("leaf core must be a matrix at " + to_string(v));
      Matrix l(c.shape[0], c.shape[1]);
      std::memcpy(l.data(), c.data.data(), c.data.size() * sizeof(double));
      t.leaves[v] = std::move(l);
    } else {
      t.transfer[v] = std::move(c);
    }
  }
  auto viol = check(t);
  if (!viol.empty()) throw UsageError("inconsistent TTN file: " + viol.front());
  return t;
}

// Sketch checkpoint: manifest plus a flat blob of the Omega/Psi matrices.
inline void write_sketch_state(const fs::path& dir, const SketchState& s) {
  fs::create_directories(dir);
  std::ofstream bin(dir / "blocks.bin", std::ios::binary);
  if (!bin) throw UsageError("cannot write " + (dir / "blocks.bin").string());
  nlohmann::json manifest;
  manifest["tree"] = tree_to_json(s.tree);
  manifest["shape"] = s.shape;
  manifest["ranks"] = detail::ranks_json(s.tree, s.ranks);
  manifest["oversamples"] = detail::ranks_json(s.tree, s.overs);
  manifest["drm"] = {{"kind", s.spec.kind == DrmKind::gaussian ? "gaussian" : "khatri_rao"},
                     {"seed", s.spec.seed}};
  nlohmann::json blocks = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [v, m] : s.omega)
    detail::append_block(bin, blocks, "omega", v, m.data(), m.rows(), m.cols(), offset);
  for (const auto& [v, m] : s.psi)
    detail::append_block(bin, blocks, "psi", v, m.data(), m.rows(), m.cols(), offset);
  manifest["blocks"] = blocks;
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << "\n";
  if (!mf) throw UsageError("cannot write " + (dir / "manifest.json").string());
}

inline SketchState read_sketch_state(const fs::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw UsageError("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("bad manifest: " + std::string(e.what()));
  }
  SketchState s;
  s.tree = tree_from_json(manifest.at("tree"));
  s.shape = manifest.at("shape").get<std::vector<Index>>();
  s.ranks = detail::ranks_from_json(manifest.at("ranks"));
  s.overs = detail::ranks_from_json(manifest.at("oversamples"));
  const std::string kind = manifest.at("drm").at("kind").get<std::string>();
  s.spec.kind = kind == "gaussian" ? DrmKind::gaussian : DrmKind::khatri_rao;
  s.spec.seed = manifest.at("drm").at("seed").get<std::uint64_t>();
  std::ifstream bin(dir / "blocks.bin", std::ios::binary);
  if (!bin) throw UsageError("cannot open " + (dir / "blocks.bin").string());
  for (const auto& e : manifest.at("blocks")) {
    const NodeKey v{e.at("node").at(0).get<int>(), e.at("node").at(1).get<int>()};
    const Index rows = e.at("rows").get<Index>(), cols = e.at("cols").get<Index>();
    auto data = detail::read_block(bin, e.at("offset").get<std::uint64_t>(),
                                   static_cast<std::uint64_t>(rows * cols));
    Matrix m(rows, cols);
    std::memcpy(m.data(), data.data(), data.size() * sizeof(double));
    if (e.at("kind").get<std::string>() == "omega")
      s.omega[v] = std::move(m);
    else
      s.psi[v] = std::move(m);
  }
  return s;
}

}  // namespace ttn::io
