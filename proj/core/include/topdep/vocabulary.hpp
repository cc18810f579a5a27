#pragma once

// Output-symbol vocabulary with per-symbol replica budgets, and the node set
// N(x) a parse ranges over for one query.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "topdep/top_tree.hpp"

namespace topdep {

using NodeId = std::int32_t;
inline constexpr NodeId kNoParent = -1;

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Symbols sorted lexicographically by name. `max_occurrences[i]` is the
  /// largest count of symbol i inside one training tree.
  Vocabulary(std::vector<SymbolLabel> symbols, std::vector<int> max_occurrences);

  std::size_t size() const { return symbols_.size(); }
  const std::vector<SymbolLabel>& symbols() const { return symbols_; }
  const SymbolLabel& symbol(std::size_t id) const { return symbols_[id]; }
  int max_occurrences(std::size_t id) const { return max_occurrences_[id]; }

  std::optional<std::size_t> find(std::string_view name) const;

  /// Replica count for a symbol: k + 2 unless overridden.
  int replicas(std::size_t id) const;
  std::size_t total_replicas() const;

  /// Fixes the replica count of one symbol (experiments only).
  void set_replica_override(std::string_view name, int replicas);

  /// Hex FNV-1a digest of the persisted text.
  std::string hash() const;

  /// One line per symbol: "NAME<TAB>k", plus "<TAB>replicas" when overridden.
  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<SymbolLabel> symbols_;
  std::vector<int> max_occurrences_;
  std::vector<int> replica_override_;  // 0 = use k + 2
};

/// Accumulates per-tree symbol counts. Terminal-only targets count one
/// occurrence per fragment; other modes count every symbol node.
class VocabularyBuilder {
 public:
  void add(const TopNode& tree);
  void add(const TopTree& tree) { add(tree.root); }
  void add(const PartialTree& partial);

  /// Throws EmptyCorpus when nothing was added.
  Vocabulary build() const;

 private:
  std::map<std::string, int> max_count_;
  std::size_t trees_ = 0;
};

Vocabulary build_vocabulary(std::span<const TopTree> corpus);

enum class NodeKind : std::uint8_t { Token, Symbol, Root, Unused };

struct Node {
  NodeKind kind = NodeKind::Token;
  std::size_t position = 0;  // Token
  std::size_t symbol = 0;    // Symbol: vocabulary id
  int replica = 0;           // Symbol: 1-based replica index

  friend bool operator==(const Node&, const Node&) = default;
};

/// Nodes in a fixed order: tokens by position, then symbol replicas
/// (vocabulary order, then replica index), then Root, then Unused.
class NodeSet {
 public:
  NodeSet() = default;
  NodeSet(std::vector<std::string> tokens, const Vocabulary& vocab);

  /// Explicit inventory: (label, replica count) in vocabulary order.
  NodeSet(std::vector<std::string> tokens,
          std::vector<std::pair<SymbolLabel, int>> inventory, std::string vocab_hash);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const std::vector<Node>& nodes() const { return nodes_; }

  std::size_t token_count() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  NodeId root() const { return static_cast<NodeId>(nodes_.size()) - 2; }
  NodeId unused() const { return static_cast<NodeId>(nodes_.size()) - 1; }
  bool is_token(NodeId id) const { return node(id).kind == NodeKind::Token; }
  bool is_symbol(NodeId id) const { return node(id).kind == NodeKind::Symbol; }

  std::size_t symbol_count() const { return labels_.size(); }
  const SymbolLabel& label(std::size_t symbol) const { return labels_[symbol]; }
  int replicas(std::size_t symbol) const { return replicas_[symbol]; }
  NodeId symbol_node(std::size_t symbol, int replica) const;
  std::optional<std::size_t> find_symbol(std::string_view name) const;
  const std::string& vocab_hash() const { return vocab_hash_; }

  /// Stable display name: "tok:<pos>", "<LABEL>#<replica>", "ROOT", "UNUSED".
  std::string name(NodeId id) const;

  friend bool operator==(const NodeSet&, const NodeSet&) = default;

 private:
  void build_nodes();

  std::vector<std::string> tokens_;
  std::vector<SymbolLabel> labels_;
  std::vector<int> replicas_;
  std::vector<NodeId> first_replica_;
  std::vector<Node> nodes_;
  std::string vocab_hash_;
};

NodeSet build_node_set(const std::vector<std::string>& query_tokens, const Vocabulary& vocab);

}  // namespace topdep
