#include "topdep/score_matrix.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "topdep/error.hpp"

namespace topdep {

using nlohmann::json;

ScoreMatrix::ScoreMatrix(NodeSet nodes)
    : nodes_(std::move(nodes)),
      scores_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nodes_.size()),
                                    static_cast<Eigen::Index>(nodes_.size()))) {
  enforce_forbidden();
}

ScoreMatrix::ScoreMatrix(NodeSet nodes, Eigen::MatrixXd scores)
    : nodes_(std::move(nodes)), scores_(std::move(scores)) {
  const auto n = static_cast<Eigen::Index>(nodes_.size());
  if (scores_.rows() != n || scores_.cols() != n) {
    fail(ErrorCode::BadFormat, "score matrix shape differs from node set size");
  }
  enforce_forbidden();
}

bool ScoreMatrix::allowed(NodeId parent, NodeId child) const {
  return parent != child && child != nodes_.root() && !nodes_.is_token(parent);
}

void ScoreMatrix::set(NodeId parent, NodeId child, double score) {
  if (allowed(parent, child)) scores_(parent, child) = score;
}

void ScoreMatrix::enforce_forbidden() {
  for (NodeId p = 0; p < size(); ++p) {
    for (NodeId c = 0; c < size(); ++c) {
      if (!allowed(p, c)) scores_(p, c) = kNegInf;
    }
  }
}

double tree_score(const ScoreMatrix& scores, const std::vector<NodeId>& parent) {
  double total = 0.0;
  for (std::size_t c = 0; c < parent.size(); ++c) {
    if (parent[c] == kNoParent) continue;
    total += scores(parent[c], static_cast<NodeId>(c));
  }
  return total;
}

std::string to_json(const ScoreMatrix& scores) {
  const NodeSet& nodes = scores.nodes();
  json j;
  j["tokens"] = nodes.tokens();
  j["vocab_hash"] = nodes.vocab_hash();
  json names = json::array();
  for (NodeId i = 0; i < scores.size(); ++i) names.push_back(nodes.name(i));
  j["nodes"] = std::move(names);
  json flat = json::array();
  for (NodeId p = 0; p < scores.size(); ++p) {
    for (NodeId c = 0; c < scores.size(); ++c) {
      double v = scores(p, c);
      if (v == kNegInf) {
        flat.push_back(nullptr);
      } else {
        flat.push_back(v);
      }
    }
  }
  j["scores"] = std::move(flat);
  return j.dump();
}

ScoreMatrix score_matrix_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::BadFormat, std::string("score matrix JSON: ") + e.what());
  }
  try {
    auto tokens = j.at("tokens").get<std::vector<std::string>>();
    auto hash = j.at("vocab_hash").get<std::string>();
    auto names = j.at("nodes").get<std::vector<std::string>>();
    const json& flat = j.at("scores");

    // Rebuild the symbol inventory from "<LABEL>#<replica>" names.
    std::vector<std::pair<SymbolLabel, int>> inventory;
    std::size_t expected = tokens.size();
    for (std::size_t i = 0; i < names.size(); ++i) {
      const std::string& name = names[i];
      if (i < tokens.size()) {
        if (name != "tok:" + std::to_string(i)) fail(ErrorCode::BadFormat, "bad token node " + name);
        continue;
      }
      if (name == "ROOT" || name == "UNUSED") continue;
      std::size_t hash_at = name.rfind('#');
      if (hash_at == std::string::npos) fail(ErrorCode::BadFormat, "bad symbol node " + name);
      std::string label = name.substr(0, hash_at);
      int replica = std::stoi(name.substr(hash_at + 1));
      if (!inventory.empty() && inventory.back().first.name == label) {
        if (replica != inventory.back().second + 1) {
          fail(ErrorCode::BadFormat, "replicas of " + label + " out of order");
        }
        inventory.back().second = replica;
      } else {
        if (replica != 1) fail(ErrorCode::BadFormat, "replicas of " + label + " must start at 1");
        inventory.emplace_back(SymbolLabel::from_name(label), 1);
      }
      ++expected;
    }
    expected += 2;
    if (names.size() != expected || names[expected - 2] != "ROOT" ||
        names[expected - 1] != "UNUSED") {
      fail(ErrorCode::BadFormat, "node list must end with ROOT, UNUSED");
    }
    NodeSet nodes(std::move(tokens), std::move(inventory), std::move(hash));
    const auto n = static_cast<Eigen::Index>(nodes.size());
    if (!flat.is_array() || flat.size() != static_cast<std::size_t>(n * n)) {
      fail(ErrorCode::BadFormat, "scores must hold nodes^2 entries");
    }
    Eigen::MatrixXd dense(n, n);
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index c = 0; c < n; ++c) {
        const json& v = flat[static_cast<std::size_t>(p * n + c)];
        dense(p, c) = v.is_null() ? kNegInf : v.get<double>();
      }
    }
    return ScoreMatrix(std::move(nodes), std::move(dense));
  } catch (const json::exception& e) {
    fail(ErrorCode::BadFormat, std::string("score matrix JSON: ") + e.what());
  } catch (const std::logic_error& e) {
    fail(ErrorCode::BadFormat, std::string("score matrix JSON: ") + e.what());
  }
}

void save_score_matrix(const std::string& path, const ScoreMatrix& scores) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  out << to_json(scores) << '\n';
}

ScoreMatrix load_score_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return score_matrix_from_json(buf.str());
}

}  // namespace topdep
