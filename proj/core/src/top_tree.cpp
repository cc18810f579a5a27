#include "topdep/top_tree.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <utility>

#include "topdep/error.hpp"

namespace topdep {

namespace {

std::vector<std::string_view> split_ws(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' ||
                               text[i] == '\r')) {
      ++i;
    }
    std::size_t start = i;
    while (i < text.size() && !(text[i] == ' ' || text[i] == '\t' || text[i] == '\n' ||
                                text[i] == '\r')) {
      ++i;
    }
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

class BracketReader {
 public:
  explicit BracketReader(std::string_view text) : items_(split_ws(text)) {}

  TopNode read_root() {
    if (items_.empty()) fail(ErrorCode::UnbalancedBrackets, "empty tree");
    TopNode root = read_symbol();
    if (pos_ != items_.size()) {
      fail(ErrorCode::UnbalancedBrackets,
           "trailing content after root: '" + std::string(items_[pos_]) + "'");
    }
    return root;
  }

 private:
  TopNode read_symbol() {
    std::string_view open = items_[pos_];
    if (open.empty() || open.front() != '[') {
      fail(ErrorCode::UnbalancedBrackets, "expected '[' but found '" + std::string(open) + "'");
    }
    ++pos_;
    std::string_view name = open.substr(1);
    if (name.empty()) {
      if (pos_ >= items_.size()) fail(ErrorCode::UnbalancedBrackets, "missing label after '['");
      name = items_[pos_++];
    }
    TopNode node = TopNode::symbol(SymbolLabel::from_name(name));
    while (true) {
      if (pos_ >= items_.size()) {
        fail(ErrorCode::UnbalancedBrackets, "unclosed '[" + std::string(name) + "'");
      }
      std::string_view item = items_[pos_];
      if (item == "]") {
        ++pos_;
        return node;
      }
      if (item.front() == '[') {
        node.children.push_back(read_symbol());
      } else if (item.front() == ']') {
        fail(ErrorCode::UnbalancedBrackets, "malformed closing item '" + std::string(item) + "'");
      } else {
        node.children.push_back(TopNode::token(next_position_++, std::string(item)));
        ++pos_;
      }
    }
  }

  std::vector<std::string_view> items_;
  std::size_t pos_ = 0;
  std::size_t next_position_ = 0;
};

void collect_leaves(const TopNode& node, std::vector<TokenRef>& out) {
  if (node.is_token()) {
    out.push_back(node.token_ref());
    return;
  }
  for (const auto& child : node.children) collect_leaves(child, out);
}

void append_serialized(const TopNode& node, std::string& out) {
  if (node.is_token()) {
    out += node.token_ref().text;
    return;
  }
  out += '[';
  out += node.symbol_label().name;
  for (const auto& child : node.children) {
    out += ' ';
    append_serialized(child, out);
  }
  out += " ]";
}

void check_nesting(const TopNode& node) {
  if (node.is_token()) {
    if (!node.children.empty()) fail(ErrorCode::IllegalNesting, "token with children");
    return;
  }
  const bool intent = node.symbol_label().is_intent();
  for (const auto& child : node.children) {
    if (!child.is_token() && child.symbol_label().is_intent() == intent) {
      fail(ErrorCode::IllegalNesting, child.symbol_label().name + " directly under " +
                                          node.symbol_label().name);
    }
    check_nesting(child);
  }
}

void strip_tokens(const TopNode& in, TopNode& out) {
  out.label = in.label;
  for (const auto& child : in.children) {
    if (child.is_token()) continue;
    out.children.emplace_back();
    strip_tokens(child, out.children.back());
  }
}

void collect_terminal_fragments(const TopNode& node, PartialTree& out,
                                std::map<std::string, int>& seen) {
  if (node.is_token()) return;
  const int replica = ++seen[node.symbol_label().name];
  TopNode fragment = TopNode::symbol(node.symbol_label());
  for (const auto& child : node.children) {
    if (child.is_token()) fragment.children.push_back(child);
  }
  if (!fragment.children.empty()) {
    out.fragments.push_back(std::move(fragment));
    out.replicas.push_back(replica);
  }
  for (const auto& child : node.children) collect_terminal_fragments(child, out, seen);
}

}  // namespace

SymbolLabel SymbolLabel::from_name(std::string_view name) {
  if (name.starts_with("IN:") && name.size() > 3) return {SymbolKind::Intent, std::string(name)};
  if (name.starts_with("SL:") && name.size() > 3) return {SymbolKind::Slot, std::string(name)};
  fail(ErrorCode::BadLabel, "label must start with IN: or SL: ('" + std::string(name) + "')");
}

TopNode TopNode::symbol(SymbolLabel label, std::vector<TopNode> children) {
  return TopNode{std::move(label), std::move(children)};
}

TopNode TopNode::symbol(std::string_view name, std::vector<TopNode> children) {
  return symbol(SymbolLabel::from_name(name), std::move(children));
}

TopNode TopNode::token(std::size_t position, std::string text) {
  return TopNode{TokenRef{position, std::move(text)}, {}};
}

TopNode parse_top_node(std::string_view serialized) {
  return BracketReader(serialized).read_root();
}

TopTree parse_top(std::string_view serialized, const std::vector<std::string>& tokens) {
  TopTree tree{parse_top_node(serialized)};
  std::vector<TokenRef> leaves = leaf_tokens(tree.root);
  if (leaves.size() != tokens.size()) {
    fail(ErrorCode::TokenMismatch, "tree has " + std::to_string(leaves.size()) +
                                       " leaves but query has " + std::to_string(tokens.size()) +
                                       " tokens");
  }
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i].text != tokens[i]) {
      fail(ErrorCode::TokenMismatch, "leaf " + std::to_string(i) + " is '" + leaves[i].text +
                                         "' but token is '" + tokens[i] + "'");
    }
  }
  validate(tree);
  return tree;
}

std::string serialize_top(const TopNode& node) {
  std::string out;
  append_serialized(node, out);
  return out;
}

std::string serialize_top(const TopTree& tree) { return serialize_top(tree.root); }

bool exact_match(const TopTree& predicted, const TopTree& gold) { return predicted == gold; }

std::vector<TokenRef> leaf_tokens(const TopNode& node) {
  std::vector<TokenRef> out;
  collect_leaves(node, out);
  return out;
}

std::vector<std::string> leaf_texts(const TopTree& tree) {
  std::vector<std::string> out;
  for (auto& leaf : leaf_tokens(tree.root)) out.push_back(std::move(leaf.text));
  return out;
}

void validate(const TopTree& tree) {
  if (tree.root.is_token() || !tree.root.symbol_label().is_intent()) {
    fail(ErrorCode::IllegalNesting, "root must be an intent");
  }
  check_nesting(tree.root);
  std::vector<TokenRef> leaves = leaf_tokens(tree.root);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i].position != i) {
      fail(ErrorCode::TokenMismatch, "token positions must read 0..n-1 left to right");
    }
  }
}

std::size_t symbol_count(const TopNode& node) {
  if (node.is_token()) return 0;
  std::size_t n = 1;
  for (const auto& child : node.children) n += symbol_count(child);
  return n;
}

std::string_view to_string(SupervisionMode mode) {
  switch (mode) {
    case SupervisionMode::Full: return "FULL";
    case SupervisionMode::TerminalOnly: return "TERM";
    case SupervisionMode::NonterminalOnly: return "NONTERM";
  }
  return "FULL";
}

SupervisionMode supervision_mode_from_string(std::string_view text) {
  if (text == "FULL") return SupervisionMode::Full;
  if (text == "TERM") return SupervisionMode::TerminalOnly;
  if (text == "NONTERM") return SupervisionMode::NonterminalOnly;
  fail(ErrorCode::BadFormat, "unknown supervision mode '" + std::string(text) + "'");
}

PartialTree PartialTree::full(TopTree tree) {
  PartialTree p;
  p.mode = SupervisionMode::Full;
  p.fragments.push_back(std::move(tree.root));
  return p;
}

TopTree PartialTree::tree() const {
  if (mode == SupervisionMode::TerminalOnly || fragments.size() != 1) {
    fail(ErrorCode::BadFormat, "partial tree does not hold a single tree");
  }
  return TopTree{fragments.front()};
}

PartialTree project_terminal_only(const TopTree& tree) {
  PartialTree p;
  p.mode = SupervisionMode::TerminalOnly;
  std::map<std::string, int> seen;
  collect_terminal_fragments(tree.root, p, seen);
  return p;
}

PartialTree project_nonterminal_only(const TopTree& tree) {
  PartialTree p;
  p.mode = SupervisionMode::NonterminalOnly;
  p.fragments.emplace_back();
  strip_tokens(tree.root, p.fragments.back());
  return p;
}

void validate(const PartialTree& partial, std::size_t token_count) {
  switch (partial.mode) {
    case SupervisionMode::Full: {
      TopTree t = partial.tree();
      validate(t);
      if (leaf_tokens(t.root).size() != token_count) {
        fail(ErrorCode::TokenMismatch, "full tree does not cover the query");
      }
      return;
    }
    case SupervisionMode::NonterminalOnly: {
      TopTree t = partial.tree();
      validate(t);
      if (!leaf_tokens(t.root).empty()) {
        fail(ErrorCode::BadFormat, "nonterminal-only tree contains tokens");
      }
      return;
    }
    case SupervisionMode::TerminalOnly: {
      std::vector<bool> seen(token_count, false);
      for (const auto& fragment : partial.fragments) {
        if (fragment.is_token() || fragment.children.empty()) {
          fail(ErrorCode::BadFormat, "terminal-only fragment must be a symbol over tokens");
        }
        std::size_t last = 0;
        bool first = true;
        for (const auto& child : fragment.children) {
          if (!child.is_token()) {
            fail(ErrorCode::BadFormat, "terminal-only fragment must have depth 2");
          }
          std::size_t pos = child.token_ref().position;
          if (pos >= token_count || seen[pos] || (!first && pos <= last)) {
            fail(ErrorCode::TokenMismatch, "terminal-only fragments overlap or are out of order");
          }
          seen[pos] = true;
          last = pos;
          first = false;
        }
      }
      if (partial.replicas.empty()) return;
      if (partial.replicas.size() != partial.fragments.size()) {
        fail(ErrorCode::BadFormat, "terminal-only replica list differs from fragment count");
      }
      std::set<std::pair<std::string, int>> taken;
      for (std::size_t f = 0; f < partial.fragments.size(); ++f) {
        const int r = partial.replicas[f];
        if (r < 1 || !taken.emplace(partial.fragments[f].symbol_label().name, r).second) {
          fail(ErrorCode::BadFormat, "terminal-only replica indices must be positive and distinct");
        }
      }
      return;
    }
  }
}

}  // namespace topdep
