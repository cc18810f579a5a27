#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <ostream>

#include "commands.hpp"
#include "topdep/error.hpp"

namespace topdep::cli {

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Expands "--config FILE" into "--key=value" arguments placed ahead of the
// command-line flags, so explicit flags win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::vector<std::string> injected;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(n) + ": expected key=value");
    }
    injected.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
  }
  const auto at = !args.empty() && args[0].rfind('-', 0) != 0 ? args.begin() + 1 : args.begin();
  args.insert(at, injected.begin(), injected.end());
  return args;
}

void add_decode_flags(CLI::App* app, DecodeSettings& s, std::string& order) {
  app->add_option("--unused-order", order, "Order for repairing Unused children")
      ->check(CLI::IsMember({"asc", "desc"}));
  app->add_flag("--all-root-candidates", s.all_root_candidates,
                "Try every symbol node as Root's child");
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dependency-style parsing of intent/slot trees"};
  app.name("topdep");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  SplitOptions split;
  auto* split_cmd = app.add_subcommand("split", "Partition a corpus into full/terminal/nonterminal files");
  split_cmd->add_option("--input", split.input, "Dataset file")->required();
  split_cmd->add_option("--prefix", split.prefix, "Output path prefix")->required();
  split_cmd->add_option("--split", split.percentages, "Percentages S/T/N");
  split_cmd->add_option("--seed", split.seed, "Shuffle seed");

  TrainOptions train;
  std::string optimizer = std::string(to_string(train.config.optimizer));
  auto* train_cmd = app.add_subcommand("train", "Train the edge scorer");
  train_cmd->add_option("--data", train.data, "Dataset files")
      ->required()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  train_cmd->add_option("--vocab", train.vocab, "Fixed vocabulary file");
  train_cmd->add_option("--model", train.model, "Checkpoint to write")->required();
  train_cmd->add_option("--trace", train.trace, "Loss trace CSV to write");
  auto& tc = train.config;
  train_cmd->add_option("--steps", tc.steps);
  train_cmd->add_option("--lr", tc.learning_rate);
  train_cmd->add_option("--warmup", tc.warmup_steps);
  train_cmd->add_option("--batch-size", tc.batch_size);
  train_cmd->add_option("--seed", tc.seed);
  train_cmd->add_option("--optimizer", optimizer)->check(CLI::IsMember({"adam", "sgd"}));
  train_cmd->add_option("--clip-norm", tc.clip_norm);
  train_cmd->add_option("--word-dropout", tc.word_dropout);
  train_cmd->add_option("--dim", tc.model.dim);
  train_cmd->add_option("--layers", tc.model.layers);
  train_cmd->add_option("--heads", tc.model.heads);
  train_cmd->add_option("--ffn", tc.model.ffn);
  train_cmd->add_option("--biaffine", tc.model.biaffine);
  train_cmd->add_option("--max-positions", tc.model.max_positions);
  train_cmd->add_option("--dropout", tc.model.dropout);

  DecodeCommandOptions dec;
  std::string dec_order = "asc";
  auto* decode_cmd = app.add_subcommand("decode", "Decode queries or score matrices into trees");
  decode_cmd->add_option("--model", dec.model, "Checkpoint");
  decode_cmd->add_option("--input", dec.input, "Dataset or one tokenized query per line");
  decode_cmd->add_option("--scores", dec.scores, "Score-matrix JSON files")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  decode_cmd->add_option("--output", dec.output, "Prediction dump (default: stdout)");
  decode_cmd->add_flag("--oracle", dec.oracle, "Use the exhaustive decoder");
  add_decode_flags(decode_cmd, dec.decode, dec_order);

  EvalOptions ev;
  std::string ev_order = "asc";
  auto* eval_cmd = app.add_subcommand("eval", "Exact-match evaluation");
  eval_cmd->add_option("--model", ev.model, "Checkpoint");
  eval_cmd->add_option("--input", ev.input, "Dataset file")->required();
  eval_cmd->add_option("--vocab", ev.vocab, "Vocabulary expected to match the checkpoint");
  eval_cmd->add_option("--dump", ev.dump, "Prediction dump to write");
  eval_cmd->add_flag("--gold-scores", ev.gold_scores, "Score gold edges instead of running a model");
  add_decode_flags(eval_cmd, ev.decode, ev_order);

  AuditOptions audit;
  std::string audit_order = "asc";
  auto* audit_cmd = app.add_subcommand("oracle-audit", "Compare decode against the exhaustive oracle");
  audit_cmd->add_option("--model", audit.model, "Checkpoint");
  audit_cmd->add_option("--input", audit.input, "Dataset or query file");
  audit_cmd->add_option("--scores", audit.scores, "Score-matrix JSON files")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  audit_cmd->add_option("--bound", audit.bound, "Largest non-Root node count to audit");
  audit_cmd->add_option("--witness", audit.witness, "Write the first instance with a gap here");
  add_decode_flags(audit_cmd, audit.decode, audit_order);

  StatsOptions stats;
  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics");
  stats_cmd->add_option("--input", stats.input, "Dataset file")->required();

  ConvertOptions conv;
  std::string target;
  auto* convert_cmd = app.add_subcommand("convert", "Project trees or export masks, parses and vocabularies");
  convert_cmd->add_option("--input", conv.input, "Dataset file")->required();
  convert_cmd->add_option("--to", target, "full | term | nonterm | vocab | mask | parse")
      ->required()
      ->check(CLI::IsMember({"full", "term", "nonterm", "vocab", "mask", "parse"}));
  convert_cmd->add_option("--output", conv.output, "Output file (default: stdout)");
  convert_cmd->add_option("--vocab", conv.vocab, "Vocabulary for mask/parse node names");

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*split_cmd) {
      cmd_split(split, out);
    } else if (*train_cmd) {
      tc.optimizer = optimizer_from_string(optimizer);
      cmd_train(train, out);
    } else if (*decode_cmd) {
      dec.decode.descending_unused = dec_order == "desc";
      cmd_decode(dec, out);
    } else if (*eval_cmd) {
      ev.decode.descending_unused = ev_order == "desc";
      cmd_eval(ev, out);
    } else if (*audit_cmd) {
      audit.decode.descending_unused = audit_order == "desc";
      cmd_oracle_audit(audit, out);
    } else if (*stats_cmd) {
      cmd_stats(stats, out);
    } else if (*convert_cmd) {
      conv.to = convert_target_from_string(target);
      cmd_convert(conv, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (classify(e.code())) {
      case ErrorClass::Usage: return kExitUsage;
      case ErrorClass::Numeric: return kExitNumeric;
      case ErrorClass::Data: return kExitData;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace topdep::cli
