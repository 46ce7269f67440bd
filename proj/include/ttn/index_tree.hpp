#pragma once

#include <algorithm>
#include <compare>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttn/errors.hpp"

namespace ttn {

// Double-index node address: level 0 is the root, positions are 1-based.
struct NodeKey {
  int level = 0;
  int pos = 1;
  auto operator<=>(const NodeKey&) const = default;
};

inline std::string to_string(NodeKey k) {
  return "(" + std::to_string(k.level) + "," + std::to_string(k.pos) + ")";
}

struct TreeNode {
  std::vector<int> indices;    // sorted 1-based tensor modes
  int parent_pos = 0;          // position at level-1; 0 at the root
  std::vector<int> child_pos;  // consecutive positions at level+1
};

// Rooted tree of index subsets. Nodes are addressed by (level, position);
// children of each node occupy consecutive positions on the next level.
class IndexTree {
 public:
  struct NodeSpec {
    std::vector<int> indices;
    std::vector<NodeSpec> children;
  };

  IndexTree() = default;

  static IndexTree build(const NodeSpec& root) {
    IndexTree t;
    t.levels_.push_back({});
    TreeNode r;
    r.indices = root.indices;
    std::sort(r.indices.begin(), r.indices.end());
    t.levels_[0].push_back(r);
    t.append_children(0, 1, root);
    return t;
  }

  int depth() const { return static_cast<int>(levels_.size()) - 1; }  // L
  int order() const { return static_cast<int>(root().indices.size()); }  // d
  int level_count(int level) const {
    return static_cast<int>(levels_[static_cast<std::size_t>(level)].size());
  }

  const TreeNode& node(NodeKey k) const {
    if (k.level < 0 || k.level > depth() || k.pos < 1 || k.pos > level_count(k.level))
      throw UsageError("IndexTree: no node " + to_string(k));
    return levels_[static_cast<std::size_t>(k.level)][static_cast<std::size_t>(k.pos - 1)];
  }
  const TreeNode& root() const { return levels_[0][0]; }

  bool is_leaf(NodeKey k) const { return node(k).child_pos.empty(); }
  NodeKey parent(NodeKey k) const { return {k.level - 1, node(k).parent_pos}; }

  std::vector<NodeKey> children(NodeKey k) const {
    std::vector<NodeKey> out;
    for (int c : node(k).child_pos) out.push_back({k.level + 1, c});
    return out;
  }

  // All non-root nodes, level-major and position-minor.
  std::vector<NodeKey> nonroot_nodes() const {
    std::vector<NodeKey> out;
    for (int l = 1; l <= depth(); ++l)
      for (int k = 1; k <= level_count(l); ++k) out.push_back({l, k});
    return out;
  }

  std::vector<NodeKey> all_nodes() const {
    std::vector<NodeKey> out{{0, 1}};
    auto rest = nonroot_nodes();
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
  }

  bool operator==(const IndexTree& other) const {
    if (levels_.size() != other.levels_.size()) return false;
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      if (levels_[l].size() != other.levels_[l].size()) return false;
      for (std::size_t k = 0; k < levels_[l].size(); ++k) {
        const TreeNode& a = levels_[l][k];
        const TreeNode& b = other.levels_[l][k];
        if (a.indices != b.indices || a.parent_pos != b.parent_pos ||
            a.child_pos != b.child_pos)
          return false;
      }
    }
    return true;
  }

 private:
  std::vector<std::vector<TreeNode>> levels_;

  void append_children(int level, int pos, const NodeSpec& spec) {
    if (spec.children.empty()) return;
    if (static_cast<int>(levels_.size()) <= level + 1) levels_.push_back({});
    auto& next = levels_[static_cast<std::size_t>(level + 1)];
    const int first = static_cast<int>(next.size()) + 1;
    auto& me = levels_[static_cast<std::size_t>(level)][static_cast<std::size_t>(pos - 1)];
    for (std::size_t c = 0; c < spec.children.size(); ++c) {
      TreeNode n;
      n.indices = spec.children[c].indices;
      std::sort(n.indices.begin(), n.indices.end());
      n.parent_pos = pos;
      next.push_back(n);
      me.child_pos.push_back(first + static_cast<int>(c));
    }
    for (std::size_t c = 0; c < spec.children.size(); ++c)
      append_children(level + 1, first + static_cast<int>(c), spec.children[c]);
  }
};

// Checks every structural invariant; violations come back as data.
inline std::vector<std::string> validate(const IndexTree& tree) {
  std::vector<std::string> out;
  const int d = tree.order();
  {
    std::vector<int> want(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) want[static_cast<std::size_t>(i)] = i + 1;
    if (tree.root().indices != want)
      out.push_back("(0,1): root index set is not {1..d}");
  }
  for (NodeKey k : tree.all_nodes()) {
    const TreeNode& n = tree.node(k);
    if (n.indices.empty()) out.push_back(to_string(k) + ": empty index set");
    for (std::size_t i = 0; i < n.indices.size(); ++i) {
      if (n.indices[i] < 1 || n.indices[i] > d) {
        out.push_back(to_string(k) + ": index out of range");
        break;
      }
      if (i > 0 && n.indices[i] <= n.indices[i - 1]) {
        out.push_back(to_string(k) + ": duplicate index");
        break;
      }
    }
    if (n.child_pos.empty()) continue;
    for (std::size_t c = 1; c < n.child_pos.size(); ++c)
      if (n.child_pos[c] != n.child_pos[c - 1] + 1)
        out.push_back(to_string(k) + ": children not at consecutive positions");
    std::set<int> uni;
    bool disjoint = true;
    int prev_min = 0;
    for (NodeKey ck : tree.children(k)) {
      const auto& ci = tree.node(ck).indices;
      for (int i : ci) {
        if (!uni.insert(i).second) disjoint = false;
      }
      if (!ci.empty()) {
        if (ci.front() < prev_min)
          out.push_back(to_string(k) + ": children not ordered by smallest index");
        prev_min = ci.front();
      }
    }
    if (!disjoint) out.push_back(to_string(k) + ": children are not disjoint");
    std::set<int> mine(n.indices.begin(), n.indices.end());
    if (uni != mine)
      out.push_back(to_string(k) + ": children do not partition the parent index set");
  }
  // cousins follow their parents' order within each level
  for (int l = 1; l <= tree.depth(); ++l) {
    int prev_parent = 0;
    for (int k = 1; k <= tree.level_count(l); ++k) {
      int p = tree.node({l, k}).parent_pos;
      if (p < prev_parent)
        out.push_back(to_string({l, k}) + ": level order does not follow parents' order");
      prev_parent = p;
    }
  }
  return out;
}

// One entry of an extended level: either a real node or a pass-through dummy
// carrying the index set of the leaf it descends from.
struct ExtendedNode {
  bool dummy = false;
  NodeKey origin;            // the real node (for dummies: the originating leaf)
  std::vector<int> indices;  // physical modes carried at this slot
};

// Levels 1..L with dummy placeholders padding every leaf chain down to level L.
inline std::vector<std::vector<ExtendedNode>> extended_levels(const IndexTree& tree) {
  std::vector<std::vector<ExtendedNode>> out;
  const int L = tree.depth();
  if (L == 0) return out;
  std::vector<ExtendedNode> cur;
  for (NodeKey c : tree.children({0, 1}))
    cur.push_back({false, c, tree.node(c).indices});
  out.push_back(cur);
  for (int l = 2; l <= L; ++l) {
    std::vector<ExtendedNode> next;
    for (const ExtendedNode& e : cur) {
      if (e.dummy || tree.is_leaf(e.origin)) {
        next.push_back({true, e.origin, e.indices});
      } else {
        for (NodeKey c : tree.children(e.origin))
          next.push_back({false, c, tree.node(c).indices});
      }
    }
    out.push_back(next);
    cur = std::move(next);
  }
  return out;
}

inline IndexTree tucker_tree(int d) {
  IndexTree::NodeSpec root;
  for (int i = 1; i <= d; ++i) root.indices.push_back(i);
  for (int i = 1; i <= d; ++i) root.children.push_back({{i}, {}});
  return IndexTree::build(root);
}

// Caterpillar: each internal node {1..k} has children {1..k-1} and the leaf {k}.
inline IndexTree tt_tree(int d) {
  IndexTree::NodeSpec spec;
  for (int i = 1; i <= d; ++i) spec.indices.push_back(i);
  IndexTree::NodeSpec* cur = &spec;
  for (int k = d; k >= 2; --k) {
    IndexTree::NodeSpec left;
    for (int i = 1; i < k; ++i) left.indices.push_back(i);
    cur->children.push_back(left);
    cur->children.push_back({{k}, {}});
    cur = &cur->children[0];
  }
  return IndexTree::build(spec);
}

inline IndexTree balanced_binary_tree(int d) {
  struct Builder {
    static IndexTree::NodeSpec make(int lo, int hi) {
      IndexTree::NodeSpec s;
      for (int i = lo; i <= hi; ++i) s.indices.push_back(i);
      if (hi > lo) {
        int mid = (lo + hi) / 2;
        s.children.push_back(make(lo, mid));
        s.children.push_back(make(mid + 1, hi));
      }
      return s;
    }
  };
  return IndexTree::build(Builder::make(1, d));
}

// The six-mode example tree used throughout: {1..6} -> {1,2,3},{4},{5,6};
// {1,2,3} -> {1,2},{3}; {5,6} -> {5},{6}; {1,2} -> {1},{2}.
inline IndexTree toy_tree() {
  using S = IndexTree::NodeSpec;
  S n1{{1}, {}}, n2{{2}, {}}, n3{{3}, {}}, n4{{4}, {}}, n5{{5}, {}}, n6{{6}, {}};
  S n12{{1, 2}, {n1, n2}};
  S n123{{1, 2, 3}, {n12, n3}};
  S n56{{5, 6}, {n5, n6}};
  S root{{1, 2, 3, 4, 5, 6}, {n123, n4, n56}};
  return IndexTree::build(root);
}

namespace detail {

inline nlohmann::json node_to_json(const IndexTree& t, NodeKey k) {
  nlohmann::json j;
  j["indices"] = t.node(k).indices;
  j["children"] = nlohmann::json::array();
  for (NodeKey c : t.children(k)) j["children"].push_back(node_to_json(t, c));
  return j;
}

inline IndexTree::NodeSpec node_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("tree json: node must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "indices" && it.key() != "children")
      throw UsageError("tree json: unknown field '" + it.key() + "'");
  }
  if (!j.contains("indices") || !j["indices"].is_array())
    throw UsageError("tree json: node is missing an 'indices' array");
  if (!j.contains("children") || !j["children"].is_array())
    throw UsageError("tree json: node is missing a 'children' array");
  IndexTree::NodeSpec s;
  for (const auto& v : j["indices"]) {
    if (!v.is_number_integer()) throw UsageError("tree json: indices must be integers");
    s.indices.push_back(v.get<int>());
  }
  for (const auto& c : j["children"]) s.children.push_back(node_from_json(c));
  return s;
}

}  // namespace detail

inline nlohmann::json tree_to_json(const IndexTree& t) {
  nlohmann::json j;
  j["d"] = t.order();
  j["root"] = detail::node_to_json(t, {0, 1});
  return j;
}

inline IndexTree tree_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("tree json: root must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "d" && it.key() != "root")
      throw UsageError("tree json: unknown field '" + it.key() + "'");
  }
  if (!j.contains("d") || !j["d"].is_number_integer())
    throw UsageError("tree json: missing integer field 'd'");
  if (!j.contains("root")) throw UsageError("tree json: missing field 'root'");
  IndexTree t = IndexTree::build(detail::node_from_json(j["root"]));
  if (t.order() != j["d"].get<int>())
    throw UsageError("tree json: 'd' does not match the root index set");
  return t;
}

}  // namespace ttn
