#include "topdep/mapping.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "topdep/error.hpp"

namespace topdep {

namespace {

constexpr std::size_t kNoYield = std::numeric_limits<std::size_t>::max();

std::size_t idx(NodeId id) { return static_cast<std::size_t>(id); }

// Writes symbol (and optionally token) parents of `tree` into `parent`,
// consuming replicas in pre-order.
class Assigner {
 public:
  Assigner(const NodeSet& nodes, std::vector<NodeId>& parent)
      : nodes_(nodes), parent_(parent), used_(nodes.symbol_count(), 0) {}

  NodeId place(const TopNode& node, NodeId parent, bool with_tokens) {
    if (node.is_token()) {
      if (!with_tokens) return kNoParent;
      std::size_t pos = node.token_ref().position;
      if (pos >= nodes_.token_count()) {
        fail(ErrorCode::TokenMismatch, "token position " + std::to_string(pos) +
                                           " outside the query");
      }
      parent_[pos] = parent;
      return static_cast<NodeId>(pos);
    }
    NodeId self = take_replica(node.symbol_label());
    parent_[idx(self)] = parent;
    for (const auto& child : node.children) place(child, self, with_tokens);
    return self;
  }

  NodeId take_replica(const SymbolLabel& label) {
    return replica(label, used_[symbol_of(label)] + 1);
  }

  NodeId replica(const SymbolLabel& label, int index) {
    std::size_t symbol = symbol_of(label);
    used_[symbol] = std::max(used_[symbol], index);
    if (index > nodes_.replicas(symbol)) {
      fail(ErrorCode::ReplicaBudgetExceeded,
           label.name + " occurs more than " + std::to_string(nodes_.replicas(symbol)) +
               " times");
    }
    return nodes_.symbol_node(symbol, index);
  }

  std::size_t symbol_of(const SymbolLabel& label) const {
    auto symbol = nodes_.find_symbol(label.name);
    if (!symbol) fail(ErrorCode::UnknownSymbol, label.name + " is not in the vocabulary");
    return *symbol;
  }

  void park_unused() {
    for (std::size_t s = 0; s < nodes_.symbol_count(); ++s) {
      for (int r = used_[s] + 1; r <= nodes_.replicas(s); ++r) {
        parent_[idx(nodes_.symbol_node(s, r))] = nodes_.unused();
      }
    }
    parent_[idx(nodes_.unused())] = nodes_.root();
  }

 private:
  const NodeSet& nodes_;
  std::vector<NodeId>& parent_;
  std::vector<int> used_;
};

struct Builder {
  const ParseTree& parse;
  std::vector<std::vector<NodeId>> children;
  std::vector<std::size_t> first_token;

  explicit Builder(const ParseTree& p) : parse(p), children(p.nodes.size()),
                                         first_token(p.nodes.size(), kNoYield) {
    for (std::size_t c = 0; c < p.parent.size(); ++c) {
      if (p.parent[c] != kNoParent) children[idx(p.parent[c])].push_back(static_cast<NodeId>(c));
    }
  }

  std::size_t yield_start(NodeId id) {
    std::size_t& cached = first_token[idx(id)];
    if (cached != kNoYield) return cached;
    if (parse.nodes.is_token(id)) return cached = parse.nodes.node(id).position;
    std::size_t best = kNoYield;
    for (NodeId c : children[idx(id)]) best = std::min(best, yield_start(c));
    return cached = best;
  }

  TopNode build(NodeId id) {
    const NodeSet& nodes = parse.nodes;
    const Node& n = nodes.node(id);
    if (n.kind == NodeKind::Token) {
      return TopNode::token(n.position, nodes.tokens()[n.position]);
    }
    std::vector<NodeId> kids = children[idx(id)];
    for (NodeId c : kids) {
      if (yield_start(c) == kNoYield) {
        fail(ErrorCode::UnanchoredSubtree, nodes.name(c) + " has no tokens beneath it");
      }
    }
    std::stable_sort(kids.begin(), kids.end(),
                     [&](NodeId a, NodeId b) { return yield_start(a) < yield_start(b); });
    TopNode out = TopNode::symbol(nodes.label(n.symbol));
    for (NodeId c : kids) out.children.push_back(build(c));
    return out;
  }
};

}  // namespace

std::vector<NodeId> ParseTree::children(NodeId id) const {
  std::vector<NodeId> out;
  for (std::size_t c = 0; c < parent.size(); ++c) {
    if (parent[c] == id) out.push_back(static_cast<NodeId>(c));
  }
  return out;
}

std::size_t SupervisionMask::observed_count() const {
  return static_cast<std::size_t>(
      std::count_if(observed.begin(), observed.end(), [](NodeId p) { return p != kNoParent; }));
}

std::optional<std::string> find_parse_violation(const NodeSet& nodes,
                                                const std::vector<NodeId>& parent) {
  const std::size_t n = nodes.size();
  if (parent.size() != n) return "parent map size differs from node set";
  const NodeId root = nodes.root();
  const NodeId unused = nodes.unused();
  if (parent[idx(root)] != kNoParent) return "Root has a parent";
  std::vector<int> child_count(n, 0);
  for (std::size_t c = 0; c < n; ++c) {
    if (static_cast<NodeId>(c) == root) continue;
    NodeId p = parent[c];
    if (p < 0 || idx(p) >= n) return nodes.name(static_cast<NodeId>(c)) + " has no parent";
    if (idx(p) == c) return nodes.name(p) + " is its own parent";
    if (nodes.is_token(p)) return "token " + nodes.name(p) + " is a parent";
    ++child_count[idx(p)];
  }
  if (parent[idx(unused)] != root) return "Unused is not a child of Root";
  int root_children = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (parent[c] == root && static_cast<NodeId>(c) != unused) ++root_children;
    if (parent[c] == unused && child_count[c] > 0) {
      return "Unused subtree is deeper than 2 at " + nodes.name(static_cast<NodeId>(c));
    }
  }
  if (root_children != 1) {
    return "Root has " + std::to_string(root_children) + " non-Unused children";
  }
  // 0 = unvisited, 1 = on current path, 2 = reaches Root
  std::vector<std::uint8_t> state(n, 0);
  state[idx(root)] = 2;
  std::vector<NodeId> path;
  for (std::size_t start = 0; start < n; ++start) {
    NodeId v = static_cast<NodeId>(start);
    path.clear();
    while (state[idx(v)] == 0) {
      state[idx(v)] = 1;
      path.push_back(v);
      v = parent[idx(v)];
    }
    if (state[idx(v)] == 1) return "cycle through " + nodes.name(v);
    for (NodeId u : path) state[idx(u)] = 2;
  }
  return std::nullopt;
}

void validate(const ParseTree& parse) {
  if (auto why = find_parse_violation(parse.nodes, parse.parent)) {
    fail(ErrorCode::InvalidParse, *why);
  }
}

ParseTree top_to_parse(const TopTree& tree, const NodeSet& nodes) {
  validate(tree);
  ParseTree parse{nodes, std::vector<NodeId>(nodes.size(), kNoParent)};
  Assigner assign(nodes, parse.parent);
  assign.place(tree.root, nodes.root(), true);
  assign.park_unused();
  for (std::size_t t = 0; t < nodes.token_count(); ++t) {
    if (parse.parent[t] == kNoParent) {
      fail(ErrorCode::TokenMismatch, "query token " + std::to_string(t) + " is not in the tree");
    }
  }
  return parse;
}

TopTree parse_to_top(const ParseTree& parse) {
  validate(parse);
  const NodeSet& nodes = parse.nodes;
  NodeId top = kNoParent;
  for (std::size_t c = 0; c < parse.parent.size(); ++c) {
    if (parse.parent[c] == nodes.root() && static_cast<NodeId>(c) != nodes.unused()) {
      top = static_cast<NodeId>(c);
    }
  }
  for (std::size_t t = 0; t < nodes.token_count(); ++t) {
    if (parse.parent[t] == nodes.unused()) {
      fail(ErrorCode::InvalidParse, "token " + std::to_string(t) + " is attached to Unused");
    }
  }
  if (nodes.is_token(top)) fail(ErrorCode::IllegalNesting, "root must be an intent");
  Builder builder(parse);
  if (builder.yield_start(top) == kNoYield && nodes.token_count() > 0) {
    fail(ErrorCode::UnanchoredSubtree, "tree has no tokens");
  }
  TopTree tree{builder.build(top)};
  std::vector<TokenRef> leaves = leaf_tokens(tree.root);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i].position != i) {
      fail(ErrorCode::NonProjective, "sibling yields interleave; leaves are out of order");
    }
  }
  validate(tree);
  return tree;
}

SupervisionMask extract_mask(const PartialTree& partial, const NodeSet& nodes) {
  SupervisionMask mask{std::vector<NodeId>(nodes.size(), kNoParent)};
  switch (partial.mode) {
    case SupervisionMode::Full: {
      mask.observed = top_to_parse(partial.tree(), nodes).parent;
      break;
    }
    case SupervisionMode::NonterminalOnly: {
      TopTree tree = partial.tree();
      validate(tree);
      Assigner assign(nodes, mask.observed);
      assign.place(tree.root, nodes.root(), false);
      assign.park_unused();
      break;
    }
    case SupervisionMode::TerminalOnly: {
      validate(partial, nodes.token_count());
      std::vector<NodeId> scratch(nodes.size(), kNoParent);
      Assigner assign(nodes, scratch);
      for (std::size_t f = 0; f < partial.fragments.size(); ++f) {
        const TopNode& fragment = partial.fragments[f];
        NodeId owner = partial.replicas.empty()
                           ? assign.take_replica(fragment.symbol_label())
                           : assign.replica(fragment.symbol_label(), partial.replicas[f]);
        for (const auto& leaf : fragment.children) {
          mask.observed[leaf.token_ref().position] = owner;
        }
      }
      break;
    }
  }
  return mask;
}

std::vector<std::pair<NodeId, NodeId>> observed_edges(const SupervisionMask& mask) {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (std::size_t c = 0; c < mask.observed.size(); ++c) {
    if (mask.observed[c] != kNoParent) out.emplace_back(static_cast<NodeId>(c), mask.observed[c]);
  }
  return out;
}

void write_parse(std::ostream& out, const ParseTree& parse) {
  out << "# tokens=" << parse.nodes.token_count() << " vocab_hash=" << parse.nodes.vocab_hash()
      << '\n';
  for (std::size_t c = 0; c < parse.parent.size(); ++c) {
    if (static_cast<NodeId>(c) == parse.nodes.root()) continue;
    out << c << '\t' << parse.parent[c] << '\n';
  }
}

ParseTree read_parse(std::istream& in, const NodeSet& nodes) {
  std::string header;
  if (!std::getline(in, header)) fail(ErrorCode::BadFormat, "empty parse file");
  std::istringstream hs(header);
  std::string hash_field, token_field, marker;
  hs >> marker >> token_field >> hash_field;
  if (marker != "#" || !token_field.starts_with("tokens=") ||
      !hash_field.starts_with("vocab_hash=")) {
    fail(ErrorCode::BadFormat, "bad parse header '" + header + "'");
  }
  if (token_field.substr(7) != std::to_string(nodes.token_count())) {
    fail(ErrorCode::BadFormat, "parse token count differs from query");
  }
  if (hash_field.substr(11) != nodes.vocab_hash()) {
    fail(ErrorCode::VocabMismatch, "parse was written against another vocabulary");
  }
  ParseTree parse{nodes, std::vector<NodeId>(nodes.size(), kNoParent)};
  long child = 0, parent = 0;
  while (in >> child >> parent) {
    if (child < 0 || static_cast<std::size_t>(child) >= nodes.size()) {
      fail(ErrorCode::BadFormat, "node id out of range");
    }
    parse.parent[static_cast<std::size_t>(child)] = static_cast<NodeId>(parent);
  }
  return parse;
}

}  // namespace topdep
