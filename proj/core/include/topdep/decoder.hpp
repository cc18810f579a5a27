#pragma once

// Constrained maximum-arborescence decoding over a ScoreMatrix.
//
// Pipeline: best parents -> Unused preprocessing (greedy depth-2 repair, then
// freeze) -> root resolution (one CLE run per Root-child candidate). Both
// steps are approximations; oracle_decode enumerates valid trees exactly for
// small node sets so the gap can be measured.

#include <cstddef>
#include <span>
#include <vector>

#include "topdep/mapping.hpp"
#include "topdep/score_matrix.hpp"

namespace topdep {

using ParentMap = std::vector<NodeId>;

enum class UnusedOrder { Ascending, Descending };

struct DecodeOptions {
  /// Order in which violating children of Unused are repaired.
  UnusedOrder unused_order = UnusedOrder::Ascending;
  /// Try every non-token node as Root's child, not only those whose best
  /// parent is Root.
  bool all_root_candidates = false;
};

struct DecodeDiagnostics {
  int unused_depth_repairs = 0;
  int root_candidates = 0;
  bool root_fallback = false;

  friend bool operator==(const DecodeDiagnostics&, const DecodeDiagnostics&) = default;
};

struct DecodeResult {
  ParseTree parse;
  double total_score = 0.0;
  DecodeDiagnostics diagnostics;
};

/// Highest-scoring parent of every node (kNoParent for Root); ties go to the
/// lowest index. Unused is always placed under Root.
ParentMap best_parents(const ScoreMatrix& scores);

/// Maximum arborescence over `active`, rooted at `root_child`, using only
/// edges between active nodes.
ParentMap cle(const ScoreMatrix& scores, NodeId root_child, std::span<const NodeId> active);

struct UnusedPreprocessing {
  ParentMap best_parent;       // updated best parents
  std::vector<bool> frozen;    // Unused and its children after repair
  int repairs = 0;
};

/// While some child `a` of Unused has children, either moves `a` to its next
/// best parent or moves every child of `a` to theirs, whichever loses less
/// score. The resulting depth-2 Unused subtree is frozen.
UnusedPreprocessing preprocess_unused(const ScoreMatrix& scores, ParentMap best_parent,
                                      const DecodeOptions& options = {});

DecodeResult resolve_root(const ScoreMatrix& scores, const UnusedPreprocessing& unused,
                          const DecodeOptions& options = {});

DecodeResult decode(const ScoreMatrix& scores, const DecodeOptions& options = {});

struct OracleOptions {
  std::size_t max_nodes = 10;  // non-Root nodes
};

/// Exhaustive search over every parent map satisfying the parse invariants.
/// Throws TooLarge above `max_nodes`.
DecodeResult oracle_decode(const ScoreMatrix& scores, const OracleOptions& options = {});

}  // namespace topdep
