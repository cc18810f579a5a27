#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <limits>
#include <string>

#include "topdep/vocabulary.hpp"

namespace topdep {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Dense parent x child edge scores over a NodeSet. Edges out of tokens, into
/// Root, and self-edges are pinned to kNegInf.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;

  /// Zero on every allowed edge.
  explicit ScoreMatrix(NodeSet nodes);

  /// Takes `scores(parent, child)`; forbidden entries are overwritten.
  ScoreMatrix(NodeSet nodes, Eigen::MatrixXd scores);

  const NodeSet& nodes() const { return nodes_; }
  NodeId size() const { return static_cast<NodeId>(nodes_.size()); }

  double operator()(NodeId parent, NodeId child) const { return scores_(parent, child); }

  /// Writes an allowed edge; writes to forbidden edges are ignored.
  void set(NodeId parent, NodeId child, double score);

  bool allowed(NodeId parent, NodeId child) const;

  const Eigen::MatrixXd& dense() const { return scores_; }

  friend bool operator==(const ScoreMatrix& a, const ScoreMatrix& b) {
    return a.nodes_ == b.nodes_ && a.scores_ == b.scores_;
  }

 private:
  void enforce_forbidden();

  NodeSet nodes_;
  Eigen::MatrixXd scores_;
};

/// Sum of scores along a parent map, skipping Root.
double tree_score(const ScoreMatrix& scores, const std::vector<NodeId>& parent);

/// JSON object {tokens, vocab_hash, nodes, scores}; scores are row-major
/// (parent-major) with null for kNegInf.
std::string to_json(const ScoreMatrix& scores);
ScoreMatrix score_matrix_from_json(const std::string& text);

void save_score_matrix(const std::string& path, const ScoreMatrix& scores);
ScoreMatrix load_score_matrix(const std::string& path);

}  // namespace topdep
