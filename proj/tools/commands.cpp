#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "topdep/checkpoint.hpp"
#include "topdep/dataset.hpp"
#include "topdep/error.hpp"
#include "topdep/mapping.hpp"
#include "topdep/model.hpp"

namespace topdep::cli {

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::Io, "cannot write " + path);
  return f;
}

// Buffers output for `path`, or forwards to `fallback` when the path is empty.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : path_(path), fallback_(fallback) {}
  std::ostream& stream() { return buffer_; }
  void commit() {
    if (path_.empty()) {
      fallback_ << buffer_.str();
    } else {
      std::ofstream f = open_output(path_);
      f << buffer_.str();
    }
  }

 private:
  std::string path_;
  std::ostream& fallback_;
  std::ostringstream buffer_;
};

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string rate(std::size_t k, std::size_t n) {
  return n == 0 ? "n/a" : fixed4(static_cast<double>(k) / static_cast<double>(n));
}

void require_full(const Example& ex, const char* command) {
  if (ex.target.mode != SupervisionMode::Full) {
    fail(ErrorCode::BadFormat, std::string(command) + " needs fully annotated rows; line " +
                                   std::to_string(ex.line) + " is " +
                                   std::string(to_string(ex.target.mode)));
  }
}

struct Decoded {
  Prediction prediction;
  std::optional<TopTree> tree;
  std::optional<ErrorCode> error;
  DecodeDiagnostics diagnostics;
};

Decoded decode_matrix(const ScoreMatrix& scores, std::size_t line, const DecodeOptions& options,
                      bool oracle) {
  Decoded d;
  d.prediction.line = line;
  try {
    DecodeResult r = oracle ? oracle_decode(scores) : decode(scores, options);
    d.diagnostics = r.diagnostics;
    d.prediction.total_score = r.total_score;
    d.prediction.repairs = r.diagnostics.unused_depth_repairs;
    d.prediction.root_candidates = r.diagnostics.root_candidates;
    d.tree = parse_to_top(r.parse);
    d.prediction.tree = serialize_top(*d.tree);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::TooLarge) throw;
    d.error = e.code();
    d.tree.reset();
    d.prediction.tree = "!" + std::string(to_string(e.code()));
  }
  return d;
}

// Tokens of every input row: a dataset row, or a bare tokenized query.
struct Query {
  std::size_t line = 0;
  std::vector<std::string> tokens;
};

std::vector<Query> read_queries(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::vector<Query> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.find('\t') == std::string::npos) {
      out.push_back({n, split_tokens(line)});
    } else {
      out.push_back({n, parse_example(line, n).tokens});
    }
  }
  return out;
}

ScoreMatrix gold_matrix(const TopTree& gold, const NodeSet& nodes) {
  ParseTree parse = top_to_parse(gold, nodes);
  ScoreMatrix s(nodes);
  for (std::size_t c = 0; c < parse.parent.size(); ++c) {
    if (parse.parent[c] != kNoParent) s.set(parse.parent[c], static_cast<NodeId>(c), 1.0);
  }
  return s;
}

Vocabulary vocabulary_of(const Dataset& d) {
  VocabularyBuilder b;
  for (const auto& ex : d.examples) b.add(ex.target);
  return b.build();
}

std::size_t symbol_depth(const TopNode& n) {
  if (n.is_token()) return 0;
  std::size_t deepest = 0;
  for (const auto& c : n.children) deepest = std::max(deepest, symbol_depth(c));
  return deepest + 1;
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

std::array<int, 3> parse_percentages(const std::string& text) {
  std::array<int, 3> p{};
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    std::size_t slash = text.find('/', start);
    if ((i < 2) != (slash != std::string::npos)) {
      fail(ErrorCode::BadPercentages, "expected S/T/N, got '" + text + "'");
    }
    std::string part = text.substr(start, i < 2 ? slash - start : std::string::npos);
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), p[static_cast<std::size_t>(i)]);
    if (ec != std::errc() || ptr != part.data() + part.size() || part.empty() ||
        p[static_cast<std::size_t>(i)] < 0) {
      fail(ErrorCode::BadPercentages, "expected S/T/N, got '" + text + "'");
    }
    start = slash + 1;
  }
  if (p[0] + p[1] + p[2] != 100) {
    fail(ErrorCode::BadPercentages, "percentages must sum to 100, got '" + text + "'");
  }
  return p;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<int, 3>& percent) {
  std::array<std::size_t, 3> sizes{};
  std::size_t used = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    sizes[i] = n * static_cast<std::size_t>(percent[i]) / 100;
    used += sizes[i];
  }
  const auto largest = static_cast<std::size_t>(
      std::max_element(percent.begin(), percent.end()) - percent.begin());
  sizes[largest] += n - used;
  return sizes;
}

DecodeOptions DecodeSettings::options() const {
  DecodeOptions o;
  o.unused_order = descending_unused ? UnusedOrder::Descending : UnusedOrder::Ascending;
  o.all_root_candidates = all_root_candidates;
  return o;
}

ConvertTarget convert_target_from_string(const std::string& name) {
  static const std::map<std::string, ConvertTarget> names{
      {"full", ConvertTarget::Full}, {"term", ConvertTarget::Term},
      {"nonterm", ConvertTarget::Nonterm}, {"vocab", ConvertTarget::Vocab},
      {"mask", ConvertTarget::Mask}, {"parse", ConvertTarget::Parse}};
  auto it = names.find(name);
  if (it == names.end()) fail(ErrorCode::BadFormat, "unknown conversion target " + name);
  return it->second;
}

void write_prediction(std::ostream& out, const Prediction& p) {
  out << p.line << '\t' << p.tree << '\t' << format_number(p.total_score) << '\t' << p.repairs
      << '\t' << p.root_candidates << '\n';
}

std::vector<Prediction> read_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      f.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 5) fail(ErrorCode::BadFormat, "prediction rows have 5 columns");
    try {
      out.push_back({std::stoul(f[0]), f[1], std::stod(f[2]), std::stoi(f[3]), std::stoi(f[4])});
    } catch (const std::logic_error&) {
      fail(ErrorCode::BadFormat, "bad prediction row: " + line);
    }
  }
  return out;
}

void cmd_split(const SplitOptions& o, std::ostream& out) {
  const std::array<int, 3> percent = parse_percentages(o.percentages);
  Dataset d = read_dataset_file(o.input);
  for (const auto& ex : d.examples) require_full(ex, "split");

  const std::size_t n = d.examples.size();
  const std::array<std::size_t, 3> sizes = split_sizes(n, percent);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 engine(o.seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[engine() % i]);
  std::vector<int> bucket(n, 2);
  for (std::size_t k = 0; k < n; ++k) {
    bucket[order[k]] = k < sizes[0] ? 0 : k < sizes[0] + sizes[1] ? 1 : 2;
  }

  const char* names[3] = {".full.tsv", ".term.tsv", ".nonterm.tsv"};
  std::ofstream files[3] = {open_output(o.prefix + names[0]), open_output(o.prefix + names[1]),
                            open_output(o.prefix + names[2])};
  for (std::size_t i = 0; i < n; ++i) {
    Example ex = d.examples[i];
    const TopTree tree = ex.target.tree();
    if (bucket[i] == 1) ex.target = project_terminal_only(tree);
    if (bucket[i] == 2) ex.target = project_nonterminal_only(tree);
    write_example(files[bucket[i]], ex, true);
  }
  out << "examples: " << n << "\nfull: " << sizes[0] << "\nterm: " << sizes[1]
      << "\nnonterm: " << sizes[2] << "\n";
}

void cmd_train(const TrainOptions& o, std::ostream& out) {
  std::vector<TrainExample> corpus;
  VocabularyBuilder builder;
  for (const auto& path : o.data) {
    Dataset d = read_dataset_file(path);
    for (auto& ex : d.examples) {
      builder.add(ex.target);
      corpus.push_back({std::move(ex.tokens), std::move(ex.target)});
    }
  }
  if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "no training examples");
  const Vocabulary vocab = o.vocab.empty() ? builder.build() : Vocabulary::load(o.vocab);
  TrainResult r = train(corpus, vocab, o.config);
  save_checkpoint(o.model, r.model);
  if (!o.trace.empty()) {
    std::ofstream f = open_output(o.trace);
    write_loss_trace(f, r.trace);
  }
  const std::size_t tail = std::max<std::size_t>(1, r.trace.size() / 10);
  double final_loss = 0.0;
  for (std::size_t i = r.trace.size() - tail; i < r.trace.size(); ++i) final_loss += r.trace[i].loss;
  final_loss /= static_cast<double>(tail);
  out << "examples: " << corpus.size() << "\nsymbols: " << vocab.size()
      << "\nparameters: " << parameter_count(r.model.params) << "\nsteps: " << r.trace.size()
      << "\nfinal_loss: " << fixed4(final_loss) << "\n";
}

void cmd_decode(const DecodeCommandOptions& o, std::ostream& out) {
  Sink sink(o.output, out);
  const DecodeOptions options = o.decode.options();
  if (!o.scores.empty()) {
    std::size_t line = 0;
    for (const auto& path : o.scores) {
      write_prediction(sink.stream(),
                       decode_matrix(load_score_matrix(path), ++line, options, o.oracle).prediction);
    }
  } else {
    if (o.model.empty() || o.input.empty()) {
      fail(ErrorCode::BadFormat, "decode needs --model and --input, or --scores");
    }
    const Model model = load_checkpoint(o.model);
    for (const auto& q : read_queries(o.input)) {
      const ScoreMatrix s = score(model, build_node_set(q.tokens, model.vocab));
      write_prediction(sink.stream(), decode_matrix(s, q.line, options, o.oracle).prediction);
    }
  }
  sink.commit();
}

void cmd_eval(const EvalOptions& o, std::ostream& out) {
  Dataset d = read_dataset_file(o.input);
  std::optional<Model> model;
  std::optional<Vocabulary> vocab;
  if (!o.vocab.empty()) vocab = Vocabulary::load(o.vocab);
  if (!o.gold_scores) {
    model = load_checkpoint(o.model);
    if (vocab && vocab->hash() != model->vocab.hash()) {
      fail(ErrorCode::VocabMismatch, "vocabulary " + vocab->hash() + " does not match checkpoint " +
                                         model->vocab.hash());
    }
    vocab = model->vocab;
  } else if (!vocab) {
    vocab = vocabulary_of(d);
  }

  std::optional<std::ofstream> dump;
  if (!o.dump.empty()) dump = open_output(o.dump);
  const DecodeOptions options = o.decode.options();
  std::size_t evaluated = 0, exact = 0, repaired = 0, multi_root = 0, fallback = 0, skipped = 0;
  std::map<std::string, std::size_t> errors;
  for (const auto& ex : d.examples) {
    if (ex.target.mode != SupervisionMode::Full) {
      ++skipped;
      continue;
    }
    const TopTree gold = ex.target.tree();
    const NodeSet nodes = build_node_set(ex.tokens, *vocab);
    Decoded r;
    if (o.gold_scores) {
      try {
        r = decode_matrix(gold_matrix(gold, nodes), ex.line, options, false);
      } catch (const Error& e) {
        r.prediction = {ex.line, "!" + std::string(to_string(e.code())), 0.0, 0, 0};
        r.error = e.code();
      }
    } else {
      r = decode_matrix(score(*model, nodes), ex.line, options, false);
    }
    if (dump) write_prediction(*dump, r.prediction);
    ++evaluated;
    repaired += r.diagnostics.unused_depth_repairs > 0 ? 1 : 0;
    multi_root += r.diagnostics.root_candidates > 1 ? 1 : 0;
    fallback += r.diagnostics.root_fallback ? 1 : 0;
    if (r.error) {
      ++errors["invalid." + std::string(to_string(*r.error))];
    } else if (exact_match(*r.tree, gold)) {
      ++exact;
    } else if (r.tree->root.symbol_label() != gold.root.symbol_label()) {
      ++errors["wrong_root_intent"];
    } else {
      ++errors["wrong_structure"];
    }
  }
  out << "examples: " << d.examples.size() << "\nevaluated: " << evaluated
      << "\nskipped_partial: " << skipped << "\nexact_match: " << rate(exact, evaluated)
      << "\nrepair_rate: " << rate(repaired, evaluated) << "\nmulti_root_rate: " << rate(multi_root, evaluated)
      << "\nroot_fallback_rate: " << rate(fallback, evaluated) << "\n";
  for (const auto& [name, count] : errors) out << "errors." << name << ": " << count << "\n";
}

void cmd_oracle_audit(const AuditOptions& o, std::ostream& out) {
  std::vector<ScoreMatrix> instances;
  if (!o.scores.empty()) {
    for (const auto& path : o.scores) instances.push_back(load_score_matrix(path));
  } else if (!o.model.empty() && !o.input.empty()) {
    const Model model = load_checkpoint(o.model);
    for (const auto& q : read_queries(o.input)) {
      instances.push_back(score(model, build_node_set(q.tokens, model.vocab)));
    }
  } else if (!o.input.empty() || !o.model.empty()) {
    fail(ErrorCode::BadFormat, "oracle-audit needs --model with --input, or --scores");
  }

  const DecodeOptions options = o.decode.options();
  OracleOptions bound;
  bound.max_nodes = o.bound;
  std::size_t skipped = 0, audited = 0, exact = 0, clean = 0, clean_gap = 0, above = 0;
  double gap_sum = 0.0, gap_max = 0.0;
  bool have_witness = false;
  for (const auto& s : instances) {
    if (s.nodes().size() - 1 > o.bound) {
      ++skipped;
      continue;
    }
    DecodeResult approx = decode(s, options);
    DecodeResult best = oracle_decode(s, bound);
    ++audited;
    const double gap = best.total_score - approx.total_score;
    const double tol = 1e-9 * std::max(1.0, std::abs(best.total_score));
    const bool is_clean =
        approx.diagnostics.unused_depth_repairs == 0 && approx.diagnostics.root_candidates == 1;
    clean += is_clean ? 1 : 0;
    if (gap < -tol) ++above;
    if (std::abs(gap) <= tol) {
      ++exact;
      continue;
    }
    gap_sum += gap;
    gap_max = std::max(gap_max, gap);
    clean_gap += is_clean ? 1 : 0;
    if (!o.witness.empty() && !have_witness && gap > tol) {
      save_score_matrix(o.witness, s);
      have_witness = true;
    }
  }
  out << "instances: " << instances.size() << "\nskipped_too_large: " << skipped
      << "\naudited: " << audited << "\nexact: " << exact << "\nexact_fraction: " << rate(exact, audited)
      << "\nmean_gap: " << (audited == exact ? "n/a" : fixed4(gap_sum / static_cast<double>(audited - exact)))
      << "\nmax_gap: " << fixed4(gap_max) << "\nclean_instances: " << clean
      << "\nclean_with_gap: " << clean_gap << "\ndecode_above_oracle: " << above << "\n";
}

void cmd_stats(const StatsOptions& o, std::ostream& out) {
  Dataset d = read_dataset_file(o.input, false);
  std::map<std::string, std::size_t> modes;
  std::size_t tokens = 0, max_tokens = 0, depth = 0;
  for (const auto& ex : d.examples) {
    ++modes[std::string(to_string(ex.target.mode))];
    tokens += ex.tokens.size();
    max_tokens = std::max(max_tokens, ex.tokens.size());
    if (ex.target.mode != SupervisionMode::TerminalOnly) depth = std::max(depth, symbol_depth(ex.target.tree().root));
  }
  out << "examples: " << d.examples.size() << "\nissues: " << d.issues.size() << "\n";
  for (const auto& [mode, count] : modes) out << "mode." << mode << ": " << count << "\n";
  if (d.examples.empty()) return;
  const Vocabulary vocab = vocabulary_of(d);
  int max_k = 0;
  std::size_t nodes = 0;
  for (std::size_t s = 0; s < vocab.size(); ++s) max_k = std::max(max_k, vocab.max_occurrences(s));
  for (const auto& ex : d.examples) nodes += ex.tokens.size() + vocab.total_replicas() + 2;
  const double n = static_cast<double>(d.examples.size());
  out << "tokens_mean: " << fixed4(static_cast<double>(tokens) / n) << "\ntokens_max: " << max_tokens
      << "\nsymbols: " << vocab.size() << "\nmax_occurrence: " << max_k
      << "\nreplicas: " << vocab.total_replicas() << "\nnodes_mean: " << fixed4(static_cast<double>(nodes) / n)
      << "\nmax_symbol_depth: " << depth << "\n";
}

void cmd_convert(const ConvertOptions& o, std::ostream& out) {
  Dataset d = read_dataset_file(o.input);
  Sink sink(o.output, out);
  std::ostream& s = sink.stream();
  auto vocab = [&] { return o.vocab.empty() ? vocabulary_of(d) : Vocabulary::load(o.vocab); };
  switch (o.to) {
    case ConvertTarget::Full:
    case ConvertTarget::Term:
    case ConvertTarget::Nonterm: {
      const SupervisionMode mode = o.to == ConvertTarget::Full   ? SupervisionMode::Full
                                   : o.to == ConvertTarget::Term ? SupervisionMode::TerminalOnly
                                                                 : SupervisionMode::NonterminalOnly;
      for (Example ex : d.examples) {
        if (ex.target.mode != mode) {
          require_full(ex, "convert");
          const TopTree tree = ex.target.tree();
          ex.target = mode == SupervisionMode::TerminalOnly ? project_terminal_only(tree)
                                                           : project_nonterminal_only(tree);
        }
        write_example(s, ex, mode != SupervisionMode::Full);
      }
      break;
    }
    case ConvertTarget::Vocab:
      vocab().write(s);
      break;
    case ConvertTarget::Mask:
    case ConvertTarget::Parse: {
      const Vocabulary v = vocab();
      for (const auto& ex : d.examples) {
        const NodeSet nodes = build_node_set(ex.tokens, v);
        std::vector<std::pair<NodeId, NodeId>> edges;
        if (o.to == ConvertTarget::Mask) {
          edges = observed_edges(extract_mask(ex.target, nodes));
        } else {
          require_full(ex, "convert --to parse");
          ParseTree p = top_to_parse(ex.target.tree(), nodes);
          for (std::size_t c = 0; c < p.parent.size(); ++c) {
            if (p.parent[c] != kNoParent) edges.emplace_back(static_cast<NodeId>(c), p.parent[c]);
          }
        }
        for (auto [c, p] : edges) s << ex.line << '\t' << nodes.name(c) << '\t' << nodes.name(p) << '\n';
      }
      break;
    }
  }
  sink.commit();
}

}  // namespace topdep::cli
