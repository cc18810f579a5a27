#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "error_code.hpp"
#include "generators.hpp"
#include "topdep/score_matrix.hpp"

namespace topdep {
namespace {

using testing::error_code;

NodeSet small_nodes() {
  Vocabulary v({SymbolLabel::from_name("IN:A"), SymbolLabel::from_name("SL:B")}, {1, 1});
  return build_node_set({"x", "y"}, v);
}

TEST(ScoreMatrix, ForbiddenEntries) {
  NodeSet nodes = small_nodes();
  ScoreMatrix s(nodes, Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(nodes.size()),
                                                 static_cast<Eigen::Index>(nodes.size()), 1.5));
  for (NodeId p = 0; p < s.size(); ++p) {
    for (NodeId c = 0; c < s.size(); ++c) {
      const bool forbidden = p == c || c == nodes.root() || nodes.is_token(p);
      EXPECT_EQ(s.allowed(p, c), !forbidden);
      EXPECT_EQ(s(p, c), forbidden ? kNegInf : 1.5) << p << "," << c;
    }
  }
  s.set(0, 1, 9.0);
  EXPECT_EQ(s(0, 1), kNegInf);
  s.set(nodes.root(), 1, 9.0);
  EXPECT_EQ(s(nodes.root(), 1), 9.0);
}

TEST(ScoreMatrix, ShapeMismatch) {
  EXPECT_EQ(error_code([] { ScoreMatrix(small_nodes(), Eigen::MatrixXd::Zero(3, 3)); }),
            ErrorCode::BadFormat);
}

TEST(ScoreMatrix, JsonLayout) {
  NodeSet nodes = small_nodes();
  ScoreMatrix s(nodes);
  s.set(nodes.root(), 2, 0.25);
  auto j = nlohmann::json::parse(to_json(s));
  EXPECT_EQ(j["tokens"], (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(j["vocab_hash"], nodes.vocab_hash());
  EXPECT_EQ(j["nodes"], (std::vector<std::string>{"tok:0", "tok:1", "IN:A#1", "IN:A#2", "IN:A#3",
                                                 "SL:B#1", "SL:B#2", "SL:B#3", "ROOT", "UNUSED"}));
  const std::size_t n = nodes.size();
  ASSERT_EQ(j["scores"].size(), n * n);
  EXPECT_TRUE(j["scores"][0].is_null());
  EXPECT_EQ(j["scores"][static_cast<std::size_t>(nodes.root()) * n + 2].get<double>(), 0.25);
  EXPECT_TRUE(j["scores"][2 * n + static_cast<std::size_t>(nodes.root())].is_null());
}

TEST(ScoreMatrix, JsonRoundTripIsExact) {
  testing::Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    NodeSet nodes = testing::random_node_set(rng, 5, 3, 3);
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nodes.size()),
                                                  static_cast<Eigen::Index>(nodes.size()));
    for (Eigen::Index p = 0; p < dense.rows(); ++p) {
      for (Eigen::Index c = 0; c < dense.cols(); ++c) {
        dense(p, c) = std::ldexp(testing::uniform_real(rng) - 0.5, testing::uniform_int(rng, -30, 30));
      }
    }
    ScoreMatrix s(nodes, dense);
    ScoreMatrix back = score_matrix_from_json(to_json(s));
    ASSERT_EQ(back, s);
  }
}

TEST(ScoreMatrix, MalformedJson) {
  EXPECT_EQ(error_code([] { score_matrix_from_json("{"); }), ErrorCode::BadFormat);
  EXPECT_EQ(error_code([] { score_matrix_from_json(R"({"tokens":[]})"); }), ErrorCode::BadFormat);
  auto j = nlohmann::json::parse(to_json(ScoreMatrix(small_nodes())));
  j["scores"].erase(0);
  EXPECT_EQ(error_code([&] { score_matrix_from_json(j.dump()); }), ErrorCode::BadFormat);
  j = nlohmann::json::parse(to_json(ScoreMatrix(small_nodes())));
  j["nodes"][3] = "IN:A#3";
  EXPECT_EQ(error_code([&] { score_matrix_from_json(j.dump()); }), ErrorCode::BadFormat);
}

TEST(ScoreMatrix, TreeScoreSkipsRoot) {
  NodeSet nodes = small_nodes();
  ScoreMatrix s(nodes);
  s.set(nodes.root(), 2, 3.0);
  s.set(2, 0, 1.0);
  std::vector<NodeId> parent(nodes.size(), nodes.unused());
  parent[static_cast<std::size_t>(nodes.root())] = kNoParent;
  parent[static_cast<std::size_t>(nodes.unused())] = nodes.root();
  parent[2] = nodes.root();
  parent[0] = 2;
  parent[1] = 2;
  EXPECT_EQ(tree_score(s, parent), 4.0);
}

}  // namespace
}  // namespace topdep
