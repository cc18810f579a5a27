#pragma once

// The bijection between TOP trees and dependency parses over a NodeSet.

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "topdep/top_tree.hpp"
#include "topdep/vocabulary.hpp"

namespace topdep {

struct ParseTree {
  NodeSet nodes;
  std::vector<NodeId> parent;  // parent[root] == kNoParent

  std::vector<NodeId> children(NodeId id) const;

  friend bool operator==(const ParseTree&, const ParseTree&) = default;
};

/// Observed parent per node; kNoParent where the example gives no edge.
struct SupervisionMask {
  std::vector<NodeId> observed;

  std::size_t observed_count() const;
  bool is_observed(NodeId child) const { return observed[static_cast<std::size_t>(child)] != kNoParent; }

  friend bool operator==(const SupervisionMask&, const SupervisionMask&) = default;
};

/// Describes the first violated parse invariant, if any: arborescence rooted
/// at Root, one non-Unused Root child, Unused under Root without
/// grandchildren, and no token parents.
std::optional<std::string> find_parse_violation(const NodeSet& nodes,
                                                const std::vector<NodeId>& parent);

/// Throws InvalidParse on any violation.
void validate(const ParseTree& parse);

/// Symbol occurrences take replicas in pre-order; every replica left over
/// hangs under Unused.
ParseTree top_to_parse(const TopTree& tree, const NodeSet& nodes);

/// Drops the Unused subtree and orders siblings by the first token of their
/// yield.
TopTree parse_to_top(const ParseTree& parse);

SupervisionMask extract_mask(const PartialTree& partial, const NodeSet& nodes);

/// Edges (child, parent) of the mask in child order.
std::vector<std::pair<NodeId, NodeId>> observed_edges(const SupervisionMask& mask);

/// Text format: "# tokens=<n> vocab_hash=<hex>" then "child<TAB>parent" per
/// non-Root node.
void write_parse(std::ostream& out, const ParseTree& parse);
ParseTree read_parse(std::istream& in, const NodeSet& nodes);

}  // namespace topdep
