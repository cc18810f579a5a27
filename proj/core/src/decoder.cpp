#include "topdep/decoder.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <string>

#include "topdep/arborescence.hpp"
#include "topdep/error.hpp"

namespace topdep {

namespace {

constexpr double kInfCost = std::numeric_limits<double>::infinity();

std::size_t idx(NodeId id) { return static_cast<std::size_t>(id); }

// Highest finite-score parent of `child` other than `excluded`.
std::optional<NodeId> next_best(const Eigen::MatrixXd& w, NodeId child, NodeId excluded) {
  std::optional<NodeId> best;
  double top = kNegInf;
  for (NodeId p = 0; p < static_cast<NodeId>(w.rows()); ++p) {
    if (p == excluded || p == child) continue;
    if (w(p, child) > top) {
      top = w(p, child);
      best = p;
    }
  }
  return best;
}

std::vector<int> child_counts(const ParentMap& parent) {
  std::vector<int> counts(parent.size(), 0);
  for (NodeId p : parent) {
    if (p != kNoParent) ++counts[idx(p)];
  }
  return counts;
}

struct Candidate {
  ParentMap parent;
  double score = kNegInf;
};

std::optional<Candidate> try_root_child(const ScoreMatrix& scores, NodeId root_child,
                                        std::span<const NodeId> active,
                                        const UnusedPreprocessing& unused) {
  const NodeSet& nodes = scores.nodes();
  if (scores(nodes.root(), root_child) == kNegInf) return std::nullopt;
  Candidate out;
  try {
    out.parent = cle(scores, root_child, active);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InfeasibleGraph) return std::nullopt;
    throw;
  }
  out.parent[idx(root_child)] = nodes.root();
  out.parent[idx(nodes.unused())] = nodes.root();
  for (std::size_t v = 0; v < unused.frozen.size(); ++v) {
    if (unused.frozen[v] && static_cast<NodeId>(v) != nodes.unused()) {
      out.parent[v] = nodes.unused();
    }
  }
  out.score = tree_score(scores, out.parent);
  return out;
}

}  // namespace

ParentMap best_parents(const ScoreMatrix& scores) {
  const NodeSet& nodes = scores.nodes();
  const Eigen::MatrixXd& w = scores.dense();
  ParentMap best(nodes.size(), kNoParent);
  for (NodeId c = 0; c < scores.size(); ++c) {
    if (c == nodes.root()) continue;
    if (c == nodes.unused()) {
      if (w(nodes.root(), c) == kNegInf) {
        fail(ErrorCode::InfeasibleGraph, "Root -> Unused edge is forbidden");
      }
      best[idx(c)] = nodes.root();
      continue;
    }
    auto p = next_best(w, c, kNoParent);
    if (!p) fail(ErrorCode::InfeasibleGraph, nodes.name(c) + " has no admissible parent");
    best[idx(c)] = *p;
  }
  return best;
}

ParentMap cle(const ScoreMatrix& scores, NodeId root_child, std::span<const NodeId> active) {
  const auto m = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd sub(m, m);
  int local_root = -1;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (active[static_cast<std::size_t>(i)] == root_child) local_root = static_cast<int>(i);
    for (Eigen::Index j = 0; j < m; ++j) {
      sub(i, j) = scores(active[static_cast<std::size_t>(i)], active[static_cast<std::size_t>(j)]);
    }
  }
  if (local_root < 0) fail(ErrorCode::InvalidParse, "root child is not an active node");
  std::vector<int> local = max_arborescence(sub, local_root);
  ParentMap parent(scores.nodes().size(), kNoParent);
  for (Eigen::Index i = 0; i < m; ++i) {
    int p = local[static_cast<std::size_t>(i)];
    if (p >= 0) parent[idx(active[static_cast<std::size_t>(i)])] = active[static_cast<std::size_t>(p)];
  }
  return parent;
}

UnusedPreprocessing preprocess_unused(const ScoreMatrix& scores, ParentMap best_parent,
                                      const DecodeOptions& options) {
  const NodeSet& nodes = scores.nodes();
  const NodeId unused = nodes.unused();
  const auto n = static_cast<NodeId>(nodes.size());
  Eigen::MatrixXd w = scores.dense();
  UnusedPreprocessing out;

  while (true) {
    std::vector<int> counts = child_counts(best_parent);
    NodeId target = kNoParent;
    for (NodeId step = 0; step < n; ++step) {
      NodeId a = options.unused_order == UnusedOrder::Ascending ? step : n - 1 - step;
      if (best_parent[idx(a)] == unused && counts[idx(a)] > 0) {
        target = a;
        break;
      }
    }
    if (target == kNoParent) break;

    double move_self = kInfCost;
    std::optional<NodeId> self_alt = next_best(w, target, unused);
    if (self_alt) move_self = w(unused, target) - w(*self_alt, target);

    double move_children = 0.0;
    std::vector<std::pair<NodeId, NodeId>> child_moves;
    for (NodeId c = 0; c < n; ++c) {
      if (best_parent[idx(c)] != target) continue;
      std::optional<NodeId> alt = next_best(w, c, target);
      if (!alt) {
        move_children = kInfCost;
        break;
      }
      move_children += w(target, c) - w(*alt, c);
      child_moves.emplace_back(c, *alt);
    }

    if (move_self == kInfCost && move_children == kInfCost) {
      fail(ErrorCode::InfeasibleGraph,
           "cannot repair the Unused subtree at " + nodes.name(target));
    }
    if (move_self <= move_children) {
      w(unused, target) = kNegInf;
      best_parent[idx(target)] = *self_alt;
    } else {
      for (auto [c, alt] : child_moves) {
        w(target, c) = kNegInf;
        best_parent[idx(c)] = alt;
      }
    }
    ++out.repairs;
  }

  out.frozen.assign(nodes.size(), false);
  out.frozen[idx(unused)] = true;
  for (NodeId v = 0; v < n; ++v) {
    if (best_parent[idx(v)] == unused) out.frozen[idx(v)] = true;
  }
  out.best_parent = std::move(best_parent);
  return out;
}

DecodeResult resolve_root(const ScoreMatrix& scores, const UnusedPreprocessing& unused_in,
                          const DecodeOptions& options) {
  const NodeSet& nodes = scores.nodes();
  const NodeId root = nodes.root();
  const NodeId unused = nodes.unused();
  UnusedPreprocessing unused_state = unused_in;
  DecodeDiagnostics diag;

  std::vector<NodeId> active;
  for (NodeId v = 0; v < scores.size(); ++v) {
    if (v != root && !unused_state.frozen[idx(v)]) active.push_back(v);
  }

  if (std::none_of(active.begin(), active.end(), [&](NodeId v) { return nodes.is_symbol(v); })) {
    // Every symbol sits under Unused; release the one that is cheapest to
    // hang from Root instead.
    NodeId release = kNoParent;
    double best_cost = kInfCost;
    for (NodeId v = 0; v < scores.size(); ++v) {
      if (!nodes.is_symbol(v) || !unused_state.frozen[idx(v)] || scores(root, v) == kNegInf) continue;
      double cost = scores(unused, v) - scores(root, v);
      if (cost < best_cost) {
        best_cost = cost;
        release = v;
      }
    }
    if (release != kNoParent) {
      unused_state.frozen[idx(release)] = false;
      unused_state.best_parent[idx(release)] = root;
      active.insert(std::lower_bound(active.begin(), active.end(), release), release);
      diag.root_fallback = true;
    } else if (active.empty()) {
      fail(ErrorCode::InfeasibleGraph, "no node can be Root's child");
    }
  }

  std::vector<NodeId> candidates;
  for (NodeId v : active) {
    bool tops = unused_state.best_parent[idx(v)] == root;
    if (tops || (options.all_root_candidates && !nodes.is_token(v))) candidates.push_back(v);
  }
  diag.root_candidates = static_cast<int>(
      std::count_if(active.begin(), active.end(),
                    [&](NodeId v) { return unused_state.best_parent[idx(v)] == root; }));

  auto pick = [&](const std::vector<NodeId>& pool) {
    std::optional<Candidate> best;
    for (NodeId r : pool) {
      auto c = try_root_child(scores, r, active, unused_state);
      if (c && (!best || c->score > best->score)) best = std::move(c);
    }
    return best;
  };

  std::optional<Candidate> best = pick(candidates);
  if (!best) {
    diag.root_fallback = true;
    std::vector<NodeId> symbols;
    for (NodeId v : active) {
      if (!nodes.is_token(v)) symbols.push_back(v);
    }
    best = pick(symbols);
    if (!best) best = pick(active);
  }
  if (!best) fail(ErrorCode::InfeasibleGraph, "no feasible root child");

  DecodeResult result{ParseTree{nodes, std::move(best->parent)}, best->score, diag};
  return result;
}

DecodeResult decode(const ScoreMatrix& scores, const DecodeOptions& options) {
  UnusedPreprocessing unused = preprocess_unused(scores, best_parents(scores), options);
  DecodeResult result = resolve_root(scores, unused, options);
  result.diagnostics.unused_depth_repairs = unused.repairs;
  return result;
}

}  // namespace topdep
