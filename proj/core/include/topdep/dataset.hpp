#pragma once

// TSV corpora: "raw<TAB>tokenized<TAB>tree", optionally prefixed by a
// supervision-mode column (FULL | TERM | NONTERM).

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "topdep/error.hpp"
#include "topdep/top_tree.hpp"

namespace topdep {

struct Example {
  std::size_t line = 0;  // 1-based line number in the source file
  std::string raw;
  std::vector<std::string> tokens;
  PartialTree target;
};

struct LineIssue {
  std::size_t line = 0;
  ErrorCode code = ErrorCode::BadFormat;
  std::string message;
};

struct Dataset {
  std::vector<Example> examples;
  std::vector<LineIssue> issues;
};

std::vector<std::string> split_tokens(std::string_view tokenized);
std::string join_tokens(const std::vector<std::string>& tokens);

/// Terminal-only rows list fragments separated by " | ". Each fragment is
/// followed by "@p1,p2,..." naming the query positions of its leaves; when the
/// suffix is missing, positions are resolved to the leftmost consistent
/// assignment. An optional "#r" after the positions gives the fragment's
/// replica index, e.g. "[SL:DATE_TIME this weekend ]@3,4#2".
std::string serialize_partial(const PartialTree& partial);
PartialTree parse_partial(SupervisionMode mode, std::string_view text,
                          const std::vector<std::string>& tokens);

Example parse_example(std::string_view line, std::size_t line_number);

/// Reads every line. In strict mode the first bad line throws; otherwise it is
/// recorded in `issues` and skipped. Lines whose tree does not re-serialize to
/// the same (whitespace-normalized) text are reported, never repaired.
Dataset read_dataset(std::istream& in, bool strict = true);
Dataset read_dataset_file(const std::string& path, bool strict = true);

void write_example(std::ostream& out, const Example& example, bool with_mode);

}  // namespace topdep
