#pragma once

// Chu-Liu-Edmonds maximum spanning arborescence on a dense digraph.

#include <Eigen/Core>
#include <vector>

namespace topdep {

/// `weights(p, c)` is the score of edge p -> c; -inf marks a missing edge.
/// Returns the parent of every node (-1 for `root`) of a maximum-weight
/// arborescence rooted at `root`. Among equal-score parents the lowest index
/// is preferred. Throws InfeasibleGraph when some node cannot be reached.
std::vector<int> max_arborescence(const Eigen::MatrixXd& weights, int root);

}  // namespace topdep
