#include <algorithm>
#include <optional>
#include <string>

#include "topdep/decoder.hpp"
#include "topdep/error.hpp"

namespace topdep {

namespace {

std::size_t idx(NodeId id) { return static_cast<std::size_t>(id); }

class OracleSearch {
 public:
  OracleSearch(const ScoreMatrix& scores) : scores_(scores), nodes_(scores.nodes()) {
    const NodeId root = nodes_.root();
    const NodeId unused = nodes_.unused();
    for (NodeId v = 0; v < scores.size(); ++v) {
      if (v == root || v == unused) continue;
      order_.push_back(v);
      std::vector<NodeId> opts;
      for (NodeId p = 0; p < scores.size(); ++p) {
        if (p != v && scores(p, v) != kNegInf) opts.push_back(p);
      }
      std::stable_sort(opts.begin(), opts.end(),
                       [&](NodeId a, NodeId b) { return scores(a, v) > scores(b, v); });
      options_.push_back(std::move(opts));
    }
    remaining_best_.assign(order_.size() + 1, 0.0);
    for (std::size_t i = order_.size(); i-- > 0;) {
      double top = options_[i].empty() ? kNegInf : scores(options_[i].front(), order_[i]);
      remaining_best_[i] = remaining_best_[i + 1] + top;
    }
    parent_.assign(nodes_.size(), kNoParent);
    children_.assign(nodes_.size(), 0);
    parent_[static_cast<std::size_t>(unused)] = root;
    children_[static_cast<std::size_t>(root)] = 0;
  }

  std::optional<ParentMap> run(double& best_score) {
    best_score_ = kNegInf;
    search(0, scores_(nodes_.root(), nodes_.unused()));
    best_score = best_score_;
    return best_;
  }

 private:
  void search(std::size_t i, double score) {
    if (best_ && score + remaining_best_[i] <= best_score_) return;
    if (i == order_.size()) {
      if (root_children_ == 1 && score > best_score_) {
        best_score_ = score;
        best_ = parent_;
      }
      return;
    }
    const NodeId v = order_[i];
    const NodeId root = nodes_.root();
    const NodeId unused = nodes_.unused();
    for (NodeId p : options_[i]) {
      if (p == root && root_children_ == 1) continue;
      if (p == unused && children_[idx(v)] > 0) continue;
      if (p != root && p != unused && parent_[idx(p)] == unused) continue;
      if (closes_cycle(v, p)) continue;
      parent_[idx(v)] = p;
      ++children_[idx(p)];
      if (p == root) ++root_children_;
      search(i + 1, score + scores_(p, v));
      if (p == root) --root_children_;
      --children_[idx(p)];
      parent_[idx(v)] = kNoParent;
    }
  }

  bool closes_cycle(NodeId v, NodeId p) const {
    for (NodeId u = p; u != kNoParent; u = parent_[idx(u)]) {
      if (u == v) return true;
    }
    return false;
  }

  const ScoreMatrix& scores_;
  const NodeSet& nodes_;
  std::vector<NodeId> order_;
  std::vector<std::vector<NodeId>> options_;
  std::vector<double> remaining_best_;
  ParentMap parent_;
  std::vector<int> children_;
  int root_children_ = 0;
  double best_score_ = kNegInf;
  std::optional<ParentMap> best_;
};

}  // namespace

DecodeResult oracle_decode(const ScoreMatrix& scores, const OracleOptions& options) {
  const NodeSet& nodes = scores.nodes();
  if (nodes.size() - 1 > options.max_nodes) {
    fail(ErrorCode::TooLarge, std::to_string(nodes.size() - 1) + " non-Root nodes exceed the bound of " +
                                  std::to_string(options.max_nodes));
  }
  if (scores(nodes.root(), nodes.unused()) == kNegInf) {
    fail(ErrorCode::InfeasibleGraph, "Root -> Unused edge is forbidden");
  }
  double best_score = kNegInf;
  std::optional<ParentMap> best = OracleSearch(scores).run(best_score);
  if (!best) fail(ErrorCode::InfeasibleGraph, "no valid parse exists");
  return DecodeResult{ParseTree{nodes, std::move(*best)}, best_score, {}};
}

}  // namespace topdep
