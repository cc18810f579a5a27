#include "topdep/arborescence.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "topdep/error.hpp"

namespace topdep {

namespace {

constexpr double kMissing = -std::numeric_limits<double>::infinity();

std::vector<int> best_incoming(const Eigen::MatrixXd& w, int root) {
  const int n = static_cast<int>(w.rows());
  std::vector<int> best(n, -1);
  for (int c = 0; c < n; ++c) {
    if (c == root) continue;
    double top = kMissing;
    for (int p = 0; p < n; ++p) {
      if (p != c && w(p, c) > top) {
        top = w(p, c);
        best[c] = p;
      }
    }
    if (best[c] < 0) {
      fail(ErrorCode::InfeasibleGraph, "node " + std::to_string(c) + " has no admissible parent");
    }
  }
  return best;
}

std::vector<int> find_cycle(const std::vector<int>& best, int root) {
  const int n = static_cast<int>(best.size());
  std::vector<int> mark(n, -1);
  for (int start = 0; start < n; ++start) {
    int v = start;
    while (v != root && mark[v] < 0) {
      mark[v] = start;
      v = best[v];
    }
    if (v != root && mark[v] == start) {
      std::vector<int> cycle{v};
      for (int u = best[v]; u != v; u = best[u]) cycle.push_back(u);
      return cycle;
    }
  }
  return {};
}

}  // namespace

std::vector<int> max_arborescence(const Eigen::MatrixXd& weights, int root) {
  const int n = static_cast<int>(weights.rows());
  std::vector<int> best = best_incoming(weights, root);
  std::vector<int> cycle = find_cycle(best, root);
  if (cycle.empty()) return best;

  // Contract the cycle into a single node placed last.
  std::vector<bool> on_cycle(n, false);
  for (int c : cycle) on_cycle[c] = true;
  std::vector<int> to_new(n, -1), to_old;
  for (int v = 0; v < n; ++v) {
    if (!on_cycle[v]) {
      to_new[v] = static_cast<int>(to_old.size());
      to_old.push_back(v);
    }
  }
  const int m = static_cast<int>(to_old.size()) + 1;
  const int merged = m - 1;
  Eigen::MatrixXd contracted = Eigen::MatrixXd::Constant(m, m, kMissing);
  std::vector<int> enters_at(m, -1);  // cycle node entered from outside node u
  std::vector<int> leaves_from(m, -1);  // cycle node that parents outside node v

  for (int u = 0; u < n; ++u) {
    if (on_cycle[u]) continue;
    for (int v = 0; v < n; ++v) {
      if (!on_cycle[v]) contracted(to_new[u], to_new[v]) = weights(u, v);
    }
  }
  for (int c = 0; c < n; ++c) {
    if (!on_cycle[c]) continue;
    const double kept = weights(best[c], c);
    for (int u = 0; u < n; ++u) {
      if (on_cycle[u] || weights(u, c) == kMissing) continue;
      const double gain = weights(u, c) - kept;
      if (gain > contracted(to_new[u], merged)) {
        contracted(to_new[u], merged) = gain;
        enters_at[to_new[u]] = c;
      }
    }
    for (int v = 0; v < n; ++v) {
      if (on_cycle[v] || weights(c, v) == kMissing) continue;
      if (weights(c, v) > contracted(merged, to_new[v])) {
        contracted(merged, to_new[v]) = weights(c, v);
        leaves_from[to_new[v]] = c;
      }
    }
  }

  std::vector<int> inner = max_arborescence(contracted, to_new[root]);

  std::vector<int> parent(n, -1);
  for (int v = 0; v < n; ++v) {
    if (on_cycle[v] || v == root) continue;
    int p = inner[to_new[v]];
    parent[v] = p == merged ? leaves_from[to_new[v]] : to_old[p];
  }
  for (int c : cycle) parent[c] = best[c];
  const int from = inner[merged];
  parent[enters_at[from]] = to_old[from];
  return parent;
}

}  // namespace topdep
