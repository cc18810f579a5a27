#pragma once

// TOP meaning representations: intents and slots nesting over query tokens.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace topdep {

enum class SymbolKind : std::uint8_t { Intent, Slot };

struct SymbolLabel {
  SymbolKind kind = SymbolKind::Intent;
  std::string name;

  /// Classifies by prefix ("IN:" or "SL:"); anything else throws BadLabel.
  static SymbolLabel from_name(std::string_view name);

  bool is_intent() const { return kind == SymbolKind::Intent; }

  friend bool operator==(const SymbolLabel&, const SymbolLabel&) = default;
  friend auto operator<=>(const SymbolLabel& a, const SymbolLabel& b) {
    return a.name <=> b.name;
  }
};

struct TokenRef {
  std::size_t position = 0;
  std::string text;

  friend bool operator==(const TokenRef&, const TokenRef&) = default;
};

struct TopNode {
  std::variant<SymbolLabel, TokenRef> label;
  std::vector<TopNode> children;

  static TopNode symbol(SymbolLabel label, std::vector<TopNode> children = {});
  static TopNode symbol(std::string_view name, std::vector<TopNode> children = {});
  static TopNode token(std::size_t position, std::string text);

  bool is_token() const { return std::holds_alternative<TokenRef>(label); }
  const SymbolLabel& symbol_label() const { return std::get<SymbolLabel>(label); }
  const TokenRef& token_ref() const { return std::get<TokenRef>(label); }

  friend bool operator==(const TopNode&, const TopNode&) = default;
};

struct TopTree {
  TopNode root;

  friend bool operator==(const TopTree&, const TopTree&) = default;
};

/// Parses the bracketed layout, e.g. "[IN:X hi [SL:Y there ] ]". Leaf words
/// must match `tokens` one-for-one. Whitespace between items is normalized.
TopTree parse_top(std::string_view serialized, const std::vector<std::string>& tokens);

/// Parses one bracketed node without checking leaves against a query or the
/// root kind. Leaves take positions 0, 1, ... in reading order.
TopNode parse_top_node(std::string_view serialized);

std::string serialize_top(const TopTree& tree);
std::string serialize_top(const TopNode& node);

/// Identical labels, child order and token positions.
bool exact_match(const TopTree& predicted, const TopTree& gold);

/// Token leaves in tree order.
std::vector<TokenRef> leaf_tokens(const TopNode& node);
std::vector<std::string> leaf_texts(const TopTree& tree);

/// Throws when a tree violates the TOP invariants: intent root, alternating
/// intent/slot nesting, childless tokens, and positions 0..n-1 left to right.
void validate(const TopTree& tree);

/// Number of intent/slot nodes in the tree.
std::size_t symbol_count(const TopNode& node);

enum class SupervisionMode : std::uint8_t { Full, TerminalOnly, NonterminalOnly };

std::string_view to_string(SupervisionMode mode);
SupervisionMode supervision_mode_from_string(std::string_view text);

/// A training target with some labels withheld.
///
/// Full and NonterminalOnly carry exactly one fragment (the whole tree, the
/// latter with every token removed). TerminalOnly carries one depth-2
/// fragment per symbol occurrence that directly owns tokens.
struct PartialTree {
  SupervisionMode mode = SupervisionMode::Full;
  std::vector<TopNode> fragments;
  /// TerminalOnly: 1-based replica index of each fragment's symbol. When
  /// empty, fragments of the same label are indexed in listing order.
  std::vector<int> replicas;

  static PartialTree full(TopTree tree);

  TopTree tree() const;

  friend bool operator==(const PartialTree&, const PartialTree&) = default;
};

/// Keeps each symbol occurrence that directly owns tokens together with
/// those tokens, listed in pre-order of `tree`. Each fragment records the
/// pre-order rank of its occurrence among symbols of the same label.
PartialTree project_terminal_only(const TopTree& tree);

/// Deletes every token node.
PartialTree project_nonterminal_only(const TopTree& tree);

void validate(const PartialTree& partial, std::size_t token_count);

}  // namespace topdep
