#include "topdep/vocabulary.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "topdep/error.hpp"

namespace topdep {

namespace {

void count_symbols(const TopNode& node, std::map<std::string, int>& counts) {
  if (node.is_token()) return;
  ++counts[node.symbol_label().name];
  for (const auto& child : node.children) count_symbols(child, counts);
}

int parse_int(std::string_view text, std::string_view what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::BadFormat, "bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<SymbolLabel> symbols, std::vector<int> max_occurrences)
    : symbols_(std::move(symbols)),
      max_occurrences_(std::move(max_occurrences)),
      replica_override_(symbols_.size(), 0) {
  if (symbols_.size() != max_occurrences_.size()) {
    fail(ErrorCode::BadFormat, "symbol and count lists differ in length");
  }
  if (!std::is_sorted(symbols_.begin(), symbols_.end()) ||
      std::adjacent_find(symbols_.begin(), symbols_.end()) != symbols_.end()) {
    fail(ErrorCode::BadFormat, "vocabulary symbols must be unique and sorted by name");
  }
  for (int k : max_occurrences_) {
    if (k < 1) fail(ErrorCode::BadFormat, "max occurrence count must be >= 1");
  }
}

std::optional<std::size_t> Vocabulary::find(std::string_view name) const {
  auto it = std::lower_bound(symbols_.begin(), symbols_.end(), name,
                             [](const SymbolLabel& s, std::string_view n) { return s.name < n; });
  if (it == symbols_.end() || it->name != name) return std::nullopt;
  return static_cast<std::size_t>(it - symbols_.begin());
}

int Vocabulary::replicas(std::size_t id) const {
  return replica_override_[id] > 0 ? replica_override_[id] : max_occurrences_[id] + 2;
}

std::size_t Vocabulary::total_replicas() const {
  std::size_t total = 0;
  for (std::size_t i = 0; i < size(); ++i) total += static_cast<std::size_t>(replicas(i));
  return total;
}

void Vocabulary::set_replica_override(std::string_view name, int replicas) {
  auto id = find(name);
  if (!id) fail(ErrorCode::UnknownSymbol, std::string(name));
  if (replicas < 1) fail(ErrorCode::BadFormat, "replica override must be >= 1");
  replica_override_[*id] = replicas;
}

std::string Vocabulary::hash() const {
  std::ostringstream text;
  write(text);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text.str()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void Vocabulary::write(std::ostream& out) const {
  for (std::size_t i = 0; i < size(); ++i) {
    out << symbols_[i].name << '\t' << max_occurrences_[i];
    if (replica_override_[i] > 0) out << '\t' << replica_override_[i];
    out << '\n';
  }
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::vector<SymbolLabel> symbols;
  std::vector<int> counts;
  std::vector<std::pair<std::string, int>> overrides;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::string_view view(line);
    std::size_t tab = view.find('\t');
    if (tab == std::string_view::npos) fail(ErrorCode::BadFormat, "vocabulary line without TAB");
    std::string_view name = view.substr(0, tab);
    std::string_view rest = view.substr(tab + 1);
    std::size_t tab2 = rest.find('\t');
    symbols.push_back(SymbolLabel::from_name(name));
    counts.push_back(parse_int(rest.substr(0, tab2), "count"));
    if (tab2 != std::string_view::npos) {
      overrides.emplace_back(std::string(name), parse_int(rest.substr(tab2 + 1), "replicas"));
    }
  }
  Vocabulary vocab(std::move(symbols), std::move(counts));
  for (const auto& [name, n] : overrides) vocab.set_replica_override(name, n);
  return vocab;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  write(out);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  return read(in);
}

void VocabularyBuilder::add(const TopNode& tree) {
  std::map<std::string, int> counts;
  count_symbols(tree, counts);
  for (const auto& [name, n] : counts) {
    int& best = max_count_[name];
    best = std::max(best, n);
  }
  ++trees_;
}

void VocabularyBuilder::add(const PartialTree& partial) {
  if (partial.mode != SupervisionMode::TerminalOnly) {
    add(partial.tree().root);
    return;
  }
  std::map<std::string, int> counts;
  for (std::size_t f = 0; f < partial.fragments.size(); ++f) {
    int& n = counts[partial.fragments[f].symbol_label().name];
    n = partial.replicas.empty() ? n + 1 : std::max(n, partial.replicas[f]);
  }
  for (const auto& [name, n] : counts) {
    int& best = max_count_[name];
    best = std::max(best, n);
  }
  ++trees_;
}

Vocabulary VocabularyBuilder::build() const {
  if (trees_ == 0) fail(ErrorCode::EmptyCorpus, "no training trees");
  std::vector<SymbolLabel> symbols;
  std::vector<int> counts;
  for (const auto& [name, n] : max_count_) {
    symbols.push_back(SymbolLabel::from_name(name));
    counts.push_back(n);
  }
  return Vocabulary(std::move(symbols), std::move(counts));
}

Vocabulary build_vocabulary(std::span<const TopTree> corpus) {
  VocabularyBuilder builder;
  for (const auto& tree : corpus) builder.add(tree);
  return builder.build();
}

NodeSet::NodeSet(std::vector<std::string> tokens, const Vocabulary& vocab)
    : tokens_(std::move(tokens)), vocab_hash_(vocab.hash()) {
  labels_ = vocab.symbols();
  for (std::size_t i = 0; i < vocab.size(); ++i) replicas_.push_back(vocab.replicas(i));
  build_nodes();
}

NodeSet::NodeSet(std::vector<std::string> tokens,
                 std::vector<std::pair<SymbolLabel, int>> inventory, std::string vocab_hash)
    : tokens_(std::move(tokens)), vocab_hash_(std::move(vocab_hash)) {
  for (auto& [label, n] : inventory) {
    if (n < 1) fail(ErrorCode::BadFormat, "symbol needs at least one replica");
    labels_.push_back(std::move(label));
    replicas_.push_back(n);
  }
  build_nodes();
}

void NodeSet::build_nodes() {
  nodes_.clear();
  first_replica_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    nodes_.push_back(Node{NodeKind::Token, i, 0, 0});
  }
  for (std::size_t s = 0; s < labels_.size(); ++s) {
    first_replica_.push_back(static_cast<NodeId>(nodes_.size()));
    for (int r = 1; r <= replicas_[s]; ++r) nodes_.push_back(Node{NodeKind::Symbol, 0, s, r});
  }
  nodes_.push_back(Node{NodeKind::Root, 0, 0, 0});
  nodes_.push_back(Node{NodeKind::Unused, 0, 0, 0});
}

NodeId NodeSet::symbol_node(std::size_t symbol, int replica) const {
  if (symbol >= labels_.size() || replica < 1 || replica > replicas_[symbol]) {
    fail(ErrorCode::ReplicaBudgetExceeded,
         (symbol < labels_.size() ? labels_[symbol].name : std::string("?")) + " replica " +
             std::to_string(replica));
  }
  return first_replica_[symbol] + replica - 1;
}

std::optional<std::size_t> NodeSet::find_symbol(std::string_view name) const {
  for (std::size_t s = 0; s < labels_.size(); ++s) {
    if (labels_[s].name == name) return s;
  }
  return std::nullopt;
}

std::string NodeSet::name(NodeId id) const {
  const Node& n = node(id);
  switch (n.kind) {
    case NodeKind::Token: return "tok:" + std::to_string(n.position);
    case NodeKind::Symbol: return labels_[n.symbol].name + "#" + std::to_string(n.replica);
    case NodeKind::Root: return "ROOT";
    case NodeKind::Unused: return "UNUSED";
  }
  return "?";
}

NodeSet build_node_set(const std::vector<std::string>& query_tokens, const Vocabulary& vocab) {
  return NodeSet(query_tokens, vocab);
}

}  // namespace topdep
