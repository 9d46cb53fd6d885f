#pragma once

// Label hierarchy with a vertical partition of the leaves.
//
// A vertical is a subtree rooted at a node flagged `is_vertical_root`; every
// leaf sits under exactly one vertical root. Student models see leaves only,
// grouped contiguously by vertical (see ClassLayout).

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kc/error.hpp"
#include "kc/tensor.hpp"

namespace kc {

using LabelId = std::uint32_t;

struct LabelNode {
  LabelId id = 0;
  std::string name;
  std::optional<LabelId> parent;
  bool is_vertical_root = false;

  bool operator==(const LabelNode&) const = default;
};

struct SmearedLabel {
  LabelId leaf = 0;
  std::vector<LabelId> positives;  // leaf first, then ancestors upward
};

enum class SmearScope {
  kToRoot,          // leaf and every ancestor up to the root
  kWithinVertical,  // stop at the owning vertical root (teacher label space)
};

class LabelTaxonomy {
 public:
  LabelTaxonomy() = default;

  explicit LabelTaxonomy(std::vector<LabelNode> nodes) {
    std::sort(nodes.begin(), nodes.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (i && nodes[i].id == nodes[i - 1].id) {
        throw ValidationError("taxonomy: duplicate label id " +
                              std::to_string(nodes[i].id));
      }
      index_[nodes[i].id] = i;
    }
    nodes_ = std::move(nodes);
    children_.assign(nodes_.size(), {});
    std::optional<LabelId> root;
    for (const auto& n : nodes_) {
      if (!n.parent) {
        if (root) {
          throw ValidationError("taxonomy: multiple roots (" +
                                std::to_string(*root) + ", " +
                                std::to_string(n.id) + ")");
        }
        root = n.id;
        continue;
      }
      if (!index_.count(*n.parent)) {
        throw ValidationError("taxonomy: label " + std::to_string(n.id) +
                              " has unknown parent " +
                              std::to_string(*n.parent));
      }
      children_[index_.at(*n.parent)].push_back(n.id);
    }
    if (!root) throw ValidationError("taxonomy: no root");
    root_ = *root;
    // Any cycle would leave nodes unreachable from the root.
    std::size_t reached = 0;
    std::vector<LabelId> stack{root_};
    while (!stack.empty()) {
      const LabelId id = stack.back();
      stack.pop_back();
      ++reached;
      for (LabelId c : children_[index_.at(id)]) stack.push_back(c);
    }
    if (reached != nodes_.size()) {
      throw ValidationError("taxonomy: parent links contain a cycle");
    }
    for (const auto& n : nodes_) {
      if (n.is_vertical_root) verticals_.push_back(n.id);
    }
    for (LabelId v : verticals_) {
      for (LabelId a : ancestors(v)) {
        if (node(a).is_vertical_root) {
          throw ValidationError("taxonomy: vertical root " + std::to_string(v) +
                                " is nested under vertical root " +
                                std::to_string(a));
        }
      }
    }
    for (const auto& n : nodes_) {
      if (!children_[index_.at(n.id)].empty()) continue;
      leaves_.push_back(n.id);
      const auto v = find_vertical(n.id);
      if (!v) {
        throw ValidationError("taxonomy: leaf " + std::to_string(n.id) +
                              " is not under any vertical root");
      }
      vertical_leaves_[*v].push_back(n.id);
    }
    for (LabelId v : verticals_) {
      if (!vertical_leaves_.count(v)) {
        throw ValidationError("taxonomy: vertical " + std::to_string(v) +
                              " has no leaves");
      }
    }
  }

  const std::vector<LabelNode>& nodes() const { return nodes_; }
  LabelId root() const { return root_; }
  bool contains(LabelId id) const { return index_.count(id) > 0; }

  const LabelNode& node(LabelId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
      throw LookupError("taxonomy: unknown label id " + std::to_string(id));
    }
    return nodes_[it->second];
  }

  const std::vector<LabelId>& children(LabelId id) const {
    node(id);
    return children_[index_.at(id)];
  }

  bool is_leaf(LabelId id) const { return children(id).empty(); }

  // Strict ancestors, nearest first.
  std::vector<LabelId> ancestors(LabelId id) const {
    std::vector<LabelId> out;
    auto p = node(id).parent;
    while (p) {
      out.push_back(*p);
      p = node(*p).parent;
    }
    return out;
  }

  // Sorted by id.
  const std::vector<LabelId>& vertical_roots() const { return verticals_; }
  const std::vector<LabelId>& leaves() const { return leaves_; }
  const std::vector<LabelId>& leaves_of(LabelId vertical) const {
    auto it = vertical_leaves_.find(vertical);
    if (it == vertical_leaves_.end()) {
      throw LookupError("taxonomy: " + std::to_string(vertical) +
                        " is not a vertical root");
    }
    return it->second;
  }

  // Every node of the vertical's subtree (root included), sorted by id.
  std::vector<LabelId> subtree(LabelId vertical) const {
    leaves_of(vertical);
    std::vector<LabelId> out;
    std::vector<LabelId> stack{vertical};
    while (!stack.empty()) {
      const LabelId id = stack.back();
      stack.pop_back();
      out.push_back(id);
      for (LabelId c : children_[index_.at(id)]) stack.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::size_t num_classes() const { return leaves_.size(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> out;
    for (LabelId v : verticals_) out.push_back(vertical_leaves_.at(v).size());
    return out;
  }

  std::optional<LabelId> find_vertical(LabelId id) const {
    if (node(id).is_vertical_root) return id;
    for (LabelId a : ancestors(id))
      if (node(a).is_vertical_root) return a;
    return std::nullopt;
  }

 private:
  std::vector<LabelNode> nodes_;
  std::map<LabelId, std::size_t> index_;
  std::vector<std::vector<LabelId>> children_;
  LabelId root_ = 0;
  std::vector<LabelId> verticals_;
  std::vector<LabelId> leaves_;
  std::map<LabelId, std::vector<LabelId>> vertical_leaves_;
};

// Propagates a leaf's positive to its ancestors.
inline SmearedLabel smear(const LabelTaxonomy& tax, LabelId leaf,
                          SmearScope scope = SmearScope::kToRoot) {
  if (!tax.is_leaf(leaf)) {
    throw ContractError("smear: label " + std::to_string(leaf) +
                        " is not a leaf");
  }
  SmearedLabel out{leaf, {leaf}};
  if (scope == SmearScope::kWithinVertical && tax.node(leaf).is_vertical_root)
    return out;
  for (LabelId a : tax.ancestors(leaf)) {
    out.positives.push_back(a);
    if (scope == SmearScope::kWithinVertical && tax.node(a).is_vertical_root)
      break;
  }
  return out;
}

// Maps a label to the root of the vertical that owns it.
inline LabelId f_map(const LabelTaxonomy& tax, LabelId label) {
  const auto v = tax.find_vertical(label);
  if (!v) {
    throw NoVerticalError("f_map: label " + std::to_string(label) +
                          " lies above every vertical root");
  }
  return *v;
}

// Column order used by every student model: verticals by ascending root
// id, classes by ascending label id inside each vertical.
struct ClassLayout {
  std::vector<LabelId> verticals;
  std::vector<LabelId> column_label;        // column -> leaf id
  std::vector<std::size_t> column_vertical;  // column -> vertical index
  std::vector<Segment> segments;             // vertical index -> columns
  std::map<LabelId, std::size_t> label_column;

  std::size_t num_classes() const { return column_label.size(); }
  std::size_t column_of(LabelId label) const {
    auto it = label_column.find(label);
    if (it == label_column.end()) {
      throw LookupError("layout: label " + std::to_string(label) +
                        " is not a class");
    }
    return it->second;
  }
  std::size_t vertical_index(LabelId vertical) const {
    auto it = std::find(verticals.begin(), verticals.end(), vertical);
    if (it == verticals.end()) {
      throw LookupError("layout: " + std::to_string(vertical) +
                        " is not a vertical");
    }
    return static_cast<std::size_t>(it - verticals.begin());
  }
  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> out;
    for (const auto& s : segments) out.push_back(s.size());
    return out;
  }
};

inline ClassLayout class_layout(const LabelTaxonomy& tax) {
  ClassLayout out;
  out.verticals = tax.vertical_roots();
  for (std::size_t v = 0; v < out.verticals.size(); ++v) {
    const std::size_t begin = out.column_label.size();
    for (LabelId leaf : tax.leaves_of(out.verticals[v])) {
      out.label_column[leaf] = out.column_label.size();
      out.column_label.push_back(leaf);
      out.column_vertical.push_back(v);
    }
    out.segments.push_back({begin, out.column_label.size()});
  }
  return out;
}

// One JSON object per line:
//   {"id":3,"name":"dog","parent_id":2,"is_vertical_root":false}
inline void write_taxonomy(std::ostream& os, const LabelTaxonomy& tax) {
  for (const auto& n : tax.nodes()) {
    nlohmann::ordered_json j;
    j["id"] = n.id;
    j["name"] = n.name;
    j["parent_id"] = n.parent ? nlohmann::ordered_json(*n.parent)
                              : nlohmann::ordered_json(nullptr);
    j["is_vertical_root"] = n.is_vertical_root;
    os << j.dump() << '\n';
  }
}

inline LabelTaxonomy read_taxonomy(std::istream& is) {
  std::vector<LabelNode> nodes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabelNode n;
      n.id = j.at("id").get<LabelId>();
      n.name = j.at("name").get<std::string>();
      if (!j.at("parent_id").is_null()) n.parent = j["parent_id"].get<LabelId>();
      n.is_vertical_root = j.at("is_vertical_root").get<bool>();
      nodes.push_back(std::move(n));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("taxonomy line " + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  return LabelTaxonomy(std::move(nodes));
}

}  // namespace kc
