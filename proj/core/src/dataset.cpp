#include "topdep/dataset.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>

namespace topdep {

namespace {

std::vector<std::string_view> split_on(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t at = text.find(sep, start);
    if (at == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, at - start));
    start = at + 1;
  }
}

struct RawFragment {
  std::string body;
  std::optional<std::vector<std::size_t>> positions;
  std::optional<int> replica;
};

std::vector<std::size_t> parse_positions(std::string_view text) {
  std::vector<std::size_t> out;
  for (std::string_view part : split_on(text, ',')) {
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (ec != std::errc() || ptr != part.data() + part.size()) {
      fail(ErrorCode::BadFormat, "bad fragment position list '" + std::string(text) + "'");
    }
    out.push_back(value);
  }
  return out;
}

std::vector<RawFragment> split_fragments(std::string_view text) {
  std::vector<RawFragment> out;
  RawFragment current;
  int depth = 0;
  auto flush = [&] {
    if (!current.body.empty()) out.push_back(std::move(current));
    current = RawFragment{};
  };
  for (std::string_view item : split_tokens(text)) {
    if (depth == 0 && item == "|") {
      flush();
      continue;
    }
    if (item.front() == '[') {
      ++depth;
    } else if (item.front() == ']') {
      --depth;
      if (item.size() > 1) {
        std::string_view suffix = item.substr(1);
        if ((suffix.front() != '@' && suffix.front() != '#') || depth != 0) {
          fail(ErrorCode::BadFormat, "unexpected item '" + std::string(item) + "'");
        }
        std::size_t hash = suffix.find('#');
        if (hash != std::string_view::npos) {
          std::vector<std::size_t> r = parse_positions(suffix.substr(hash + 1));
          if (r.size() != 1 || r[0] < 1) {
            fail(ErrorCode::BadFormat, "bad replica index in '" + std::string(item) + "'");
          }
          current.replica = static_cast<int>(r[0]);
          suffix = suffix.substr(0, hash);
        }
        if (!suffix.empty()) current.positions = parse_positions(suffix.substr(1));
        item = item.substr(0, 1);
      }
    }
    if (!current.body.empty()) current.body += ' ';
    current.body += item;
  }
  flush();
  return out;
}

bool resolve_positions(const std::vector<std::vector<std::string>>& words,
                       const std::vector<std::string>& tokens, std::size_t fragment,
                       std::size_t leaf, std::vector<bool>& used,
                       std::vector<std::vector<std::size_t>>& out) {
  if (fragment == words.size()) return true;
  if (leaf == words[fragment].size()) {
    return resolve_positions(words, tokens, fragment + 1, 0, used, out);
  }
  std::size_t start = leaf == 0 ? 0 : out[fragment][leaf - 1] + 1;
  for (std::size_t pos = start; pos < tokens.size(); ++pos) {
    if (used[pos] || tokens[pos] != words[fragment][leaf]) continue;
    used[pos] = true;
    out[fragment][leaf] = pos;
    if (resolve_positions(words, tokens, fragment, leaf + 1, used, out)) return true;
    used[pos] = false;
  }
  return false;
}

std::string normalize_ws(std::string_view text) { return join_tokens(split_tokens(text)); }

}  // namespace

std::vector<std::string> split_tokens(std::string_view tokenized) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < tokenized.size()) {
    while (i < tokenized.size() && (tokenized[i] == ' ' || tokenized[i] == '\r')) ++i;
    std::size_t start = i;
    while (i < tokenized.size() && tokenized[i] != ' ' && tokenized[i] != '\r') ++i;
    if (i > start) out.emplace_back(tokenized.substr(start, i - start));
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string serialize_partial(const PartialTree& partial) {
  if (partial.mode != SupervisionMode::TerminalOnly) return serialize_top(partial.tree());
  std::string out;
  for (std::size_t f = 0; f < partial.fragments.size(); ++f) {
    const TopNode& fragment = partial.fragments[f];
    if (f) out += " | ";
    out += serialize_top(fragment);
    out += '@';
    for (std::size_t i = 0; i < fragment.children.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(fragment.children[i].token_ref().position);
    }
    if (!partial.replicas.empty()) out += '#' + std::to_string(partial.replicas[f]);
  }
  return out;
}

PartialTree parse_partial(SupervisionMode mode, std::string_view text,
                          const std::vector<std::string>& tokens) {
  PartialTree partial;
  partial.mode = mode;
  if (mode == SupervisionMode::Full) {
    partial.fragments.push_back(parse_top(text, tokens).root);
    return partial;
  }
  if (mode == SupervisionMode::NonterminalOnly) {
    partial.fragments.push_back(parse_top(text, {}).root);
    return partial;
  }

  std::vector<RawFragment> raw = split_fragments(text);
  std::vector<std::vector<std::string>> words;
  bool explicit_positions = !raw.empty();
  for (const auto& fragment : raw) {
    partial.fragments.push_back(parse_top_node(fragment.body));
    std::vector<std::string> leaves;
    for (auto& leaf : leaf_tokens(partial.fragments.back())) leaves.push_back(leaf.text);
    words.push_back(std::move(leaves));
    explicit_positions = explicit_positions && fragment.positions.has_value();
    if (fragment.replica) partial.replicas.push_back(*fragment.replica);
  }
  if (!partial.replicas.empty() && partial.replicas.size() != raw.size()) {
    fail(ErrorCode::BadFormat, "replica indices must be given for every fragment or none");
  }

  std::vector<std::vector<std::size_t>> positions(words.size());
  if (explicit_positions) {
    for (std::size_t f = 0; f < raw.size(); ++f) positions[f] = *raw[f].positions;
  } else {
    for (std::size_t f = 0; f < words.size(); ++f) positions[f].resize(words[f].size());
    std::vector<bool> used(tokens.size(), false);
    if (!resolve_positions(words, tokens, 0, 0, used, positions)) {
      fail(ErrorCode::TokenMismatch, "terminal-only fragments do not fit the query");
    }
  }

  for (std::size_t f = 0; f < partial.fragments.size(); ++f) {
    TopNode& fragment = partial.fragments[f];
    if (positions[f].size() != fragment.children.size()) {
      fail(ErrorCode::BadFormat, "position list length differs from fragment leaves");
    }
    for (std::size_t i = 0; i < fragment.children.size(); ++i) {
      TopNode& child = fragment.children[i];
      if (!child.is_token()) fail(ErrorCode::BadFormat, "terminal-only fragment must have depth 2");
      std::size_t pos = positions[f][i];
      if (pos >= tokens.size() || tokens[pos] != child.token_ref().text) {
        fail(ErrorCode::TokenMismatch, "fragment leaf '" + child.token_ref().text +
                                           "' does not match query position " +
                                           std::to_string(pos));
      }
      child = TopNode::token(pos, tokens[pos]);
    }
  }
  validate(partial, tokens.size());
  return partial;
}

Example parse_example(std::string_view line, std::size_t line_number) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> cols = split_on(line, '\t');
  SupervisionMode mode = SupervisionMode::Full;
  if (cols.size() == 4) {
    mode = supervision_mode_from_string(cols[0]);
    cols.erase(cols.begin());
  } else if (cols.size() != 3) {
    fail(ErrorCode::BadFormat, "expected 3 or 4 tab-separated columns, got " +
                                   std::to_string(cols.size()));
  }
  Example ex;
  ex.line = line_number;
  ex.raw = std::string(cols[0]);
  ex.tokens = split_tokens(cols[1]);
  ex.target = parse_partial(mode, cols[2], ex.tokens);
  if (mode != SupervisionMode::TerminalOnly &&
      serialize_partial(ex.target) != normalize_ws(cols[2])) {
    fail(ErrorCode::BadFormat, "tree does not round-trip through the serializer");
  }
  return ex;
}

Dataset read_dataset(std::istream& in, bool strict) {
  Dataset data;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line == "\r") continue;
    try {
      data.examples.push_back(parse_example(line, number));
    } catch (const Error& e) {
      if (strict) {
        throw Error(e.code(), "line " + std::to_string(number) + ": " + e.detail());
      }
      data.issues.push_back({number, e.code(), e.detail()});
    }
  }
  return data;
}

Dataset read_dataset_file(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  return read_dataset(in, strict);
}

void write_example(std::ostream& out, const Example& example, bool with_mode) {
  if (with_mode) out << to_string(example.target.mode) << '\t';
  out << example.raw << '\t' << join_tokens(example.tokens) << '\t'
      << serialize_partial(example.target) << '\n';
}

}  // namespace topdep
