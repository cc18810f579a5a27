#pragma once

// Subcommand implementations behind the topdep executable. Each command
// writes its report to `out`; failures surface as topdep::Error.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "topdep/decoder.hpp"
#include "topdep/trainer.hpp"

namespace topdep::cli {

/// Bucket sizes for an S/T/N split: floor division, with the remainder given
/// to the largest bucket (the first one on ties).
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<int, 3>& percent);

/// Parses "S/T/N"; throws BadPercentages unless three non-negative integers
/// sum to 100.
std::array<int, 3> parse_percentages(const std::string& text);

struct SplitOptions {
  std::string input;
  std::string prefix;  // writes <prefix>.full.tsv, <prefix>.term.tsv, <prefix>.nonterm.tsv
  std::string percentages = "100/0/0";
  std::uint64_t seed = 1;
};

struct TrainOptions {
  std::vector<std::string> data;
  std::string vocab;  // optional fixed vocabulary
  std::string model;
  std::string trace;
  TrainConfig config;
};

struct DecodeSettings {
  bool descending_unused = false;
  bool all_root_candidates = false;

  DecodeOptions options() const;
};

struct DecodeCommandOptions {
  std::string model;
  std::string input;                // dataset file, decoded with the model
  std::vector<std::string> scores;  // score-matrix JSON files, decoded directly
  std::string output;               // prediction dump; stdout when empty
  bool oracle = false;
  DecodeSettings decode;
};

struct EvalOptions {
  std::string model;
  std::string input;
  std::string vocab;  // checked against the checkpoint when given
  std::string dump;
  bool gold_scores = false;  // score gold edges 1, everything else 0
  DecodeSettings decode;
};

struct AuditOptions {
  std::string model;
  std::string input;
  std::vector<std::string> scores;
  std::size_t bound = 10;
  std::string witness;  // first instance with a gap, as score-matrix JSON
  DecodeSettings decode;
};

struct StatsOptions {
  std::string input;
};

enum class ConvertTarget { Full, Term, Nonterm, Vocab, Mask, Parse };

ConvertTarget convert_target_from_string(const std::string& name);

struct ConvertOptions {
  std::string input;
  std::string output;  // stdout when empty
  std::string vocab;   // node inventory for mask/parse; built from the input otherwise
  ConvertTarget to = ConvertTarget::Full;
};

void cmd_split(const SplitOptions& o, std::ostream& out);
void cmd_train(const TrainOptions& o, std::ostream& out);
void cmd_decode(const DecodeCommandOptions& o, std::ostream& out);
void cmd_eval(const EvalOptions& o, std::ostream& out);
void cmd_oracle_audit(const AuditOptions& o, std::ostream& out);
void cmd_stats(const StatsOptions& o, std::ostream& out);
void cmd_convert(const ConvertOptions& o, std::ostream& out);

/// One prediction-dump row: line, tree (or "!<ErrorCode>"), total score,
/// repairs, root candidates.
struct Prediction {
  std::size_t line = 0;
  std::string tree;
  double total_score = 0.0;
  int repairs = 0;
  int root_candidates = 0;
};

void write_prediction(std::ostream& out, const Prediction& p);
std::vector<Prediction> read_predictions(std::istream& in);

/// Shortest round-trip decimal form.
std::string format_number(double value);

}  // namespace topdep::cli
