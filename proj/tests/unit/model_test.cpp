#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "error_code.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "topdep/checkpoint.hpp"
#include "topdep/model.hpp"

namespace topdep {
namespace {

using testing::error_code;

double silu(double z) { return z / (1.0 + std::exp(-z)); }

ModelConfig tiny_config() {
  ModelConfig c;
  c.dim = 4;
  c.layers = 1;
  c.heads = 2;
  c.ffn = 6;
  c.biaffine = 3;
  c.max_positions = 8;
  c.dropout = 0.0;
  return c;
}

struct Instance {
  Model model;
  NodeSet nodes;
  TopTree tree;
};

Instance random_instance(testing::Rng& rng, const ModelConfig& config) {
  testing::TreeShape shape;
  shape.max_depth = 3;
  shape.max_children = 2;
  TopTree t = testing::random_tree(rng, shape);
  Vocabulary v = build_vocabulary(std::vector<TopTree>{t});
  Model m = make_model(config, v, WordIndex({"a", "b", "c"}));
  initialize(m, rng());
  NodeSet nodes = build_node_set(leaf_texts(t), m.vocab);
  return {std::move(m), std::move(nodes), std::move(t)};
}

void randomize_all(Model& m, testing::Rng& rng) {
  for_each_tensor(m.params, [&](const std::string&, Eigen::MatrixXd& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = 0.8 * (testing::uniform_real(rng) - 0.5);
  });
}

TEST(Model, BiaffineHandExample) {
  NodeSet nodes({}, {{SymbolLabel::from_name("IN:A"), 1}}, "0000000000000000");
  Eigen::MatrixXd enc(3, 2);
  enc << 0, 1,  // IN:A#1 as child
      1, 0,     // ROOT as parent
      0, 0;
  BiaffineParams p;
  p.U.resize(2, 2);
  p.U << 0, 2, 0, 0;
  p.u.resize(1, 2);
  p.u << 1, 0;
  ScoreMatrix s = score_edges(enc, p, nodes);
  EXPECT_DOUBLE_EQ(s(nodes.root(), 0), 3.0);
  EXPECT_EQ(s(0, nodes.root()), kNegInf);
  EXPECT_EQ(s(0, 0), kNegInf);
}

TEST(Model, ZeroBiaffineGivesZeroScores) {
  testing::Rng rng(1);
  Instance inst = random_instance(rng, tiny_config());
  inst.model.params.biaffine.U.setZero();
  inst.model.params.biaffine.u.setZero();
  ScoreMatrix s = score(inst.model, inst.nodes);
  for (NodeId p = 0; p < s.size(); ++p) {
    for (NodeId c = 0; c < s.size(); ++c) {
      EXPECT_EQ(s(p, c), s.allowed(p, c) ? 0.0 : kNegInf);
    }
  }
}

TEST(Model, TokenRowsAreForbidden) {
  testing::Rng rng(2);
  Instance inst = random_instance(rng, tiny_config());
  ScoreMatrix s = score(inst.model, inst.nodes);
  for (NodeId t = 0; t < static_cast<NodeId>(inst.nodes.token_count()); ++t) {
    for (NodeId c = 0; c < s.size(); ++c) EXPECT_EQ(s(t, c), kNegInf);
  }
}

TEST(Model, ZeroLayersPassEmbeddingsThrough) {
  testing::Rng rng(3);
  Instance inst = random_instance(rng, tiny_config());
  Model m = make_model(inst.model.config, inst.model.vocab, inst.model.words);
  m.params.encoder.word = inst.model.params.encoder.word;
  m.params.encoder.position = inst.model.params.encoder.position;
  m.params.encoder.node = inst.model.params.encoder.node;
  Eigen::MatrixXd out = encode(m, inst.nodes);
  std::vector<int> ids = word_ids(m, inst.nodes);
  for (NodeId i = 0; i < static_cast<NodeId>(inst.nodes.size()); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    Eigen::RowVectorXd expected =
        inst.nodes.is_token(i)
            ? Eigen::RowVectorXd(m.params.encoder.word.row(ids[static_cast<std::size_t>(i)]) +
                                 m.params.encoder.position.row(row))
            : Eigen::RowVectorXd(m.params.encoder.node.row(ids[static_cast<std::size_t>(i)]));
    EXPECT_TRUE(out.row(row).isApprox(expected, 1e-12)) << inst.nodes.name(i);
  }
}

TEST(Model, OneLayerHandExample) {
  Vocabulary v({SymbolLabel::from_name("IN:A")}, {1});
  v.set_replica_override("IN:A", 1);
  ModelConfig c;
  c.dim = 2;
  c.layers = 1;
  c.heads = 1;
  c.ffn = 2;
  c.biaffine = 0;
  c.max_positions = 4;
  Model m = make_model(c, v, WordIndex());
  m.params.encoder.node.resize(3, 2);
  m.params.encoder.node << 1, 0, 0, 1, 1, 1;
  auto& l = m.params.encoder.layers[0];
  l.ln1_bias << 1, 0;  // uniform attention over LN rows [s,-s], [-s,s], [0,0] plus this bias
  l.wv.setIdentity();
  l.wo.setIdentity();
  l.w1.setIdentity();
  l.w2.setIdentity();
  NodeSet nodes = build_node_set({}, v);
  Eigen::MatrixXd out = encode(m, nodes);

  // After attention each row gains [1, 0]: [2,0], [1,1], [2,1].
  const double s2 = 1.0 / std::sqrt(1.0 + 1e-5);
  const double s1 = 0.5 / std::sqrt(0.25 + 1e-5);
  Eigen::MatrixXd expected(3, 2);
  expected << 2 + silu(s2), silu(-s2), 1, 1, 2 + silu(s1), 1 + silu(-s1);
  EXPECT_TRUE(out.isApprox(expected, 1e-12)) << out;
}

TEST(Model, EncodeMatchesScalarReference) {
  testing::Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    ModelConfig c = tiny_config();
    c.layers = 2;
    Instance inst = random_instance(rng, c);
    randomize_all(inst.model, rng);
    Eigen::MatrixXd fast = encode(inst.model, inst.nodes);
    Eigen::MatrixXd slow = testing::reference_encode(inst.model, inst.nodes);
    ASSERT_LT((fast - slow).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Model, SymbolPermutationPermutesRows) {
  // Swapping which label owns which embedding rows must only relabel outputs.
  Vocabulary v1({SymbolLabel::from_name("IN:P"), SymbolLabel::from_name("IN:Q")}, {1, 2});
  Vocabulary v2({SymbolLabel::from_name("IN:P"), SymbolLabel::from_name("IN:Q")}, {2, 1});
  ModelConfig c = tiny_config();
  Model m1 = make_model(c, v1, WordIndex({"a", "b"}));
  initialize(m1, 9);
  Model m2 = make_model(c, v2, WordIndex({"a", "b"}));
  m2.params = m1.params;
  // m1 rows: P#1..3 (0-2), Q#1..4 (3-6), Root 7, Unused 8.
  // m2 rows: P#1..4 (0-3), Q#1..3 (4-6), Root 7, Unused 8.
  for (int r = 0; r < 4; ++r) m2.params.encoder.node.row(r) = m1.params.encoder.node.row(3 + r);
  for (int r = 0; r < 3; ++r) m2.params.encoder.node.row(4 + r) = m1.params.encoder.node.row(r);

  const std::vector<std::string> tokens{"a", "b", "zzz"};
  NodeSet n1 = build_node_set(tokens, v1);
  NodeSet n2 = build_node_set(tokens, v2);
  Eigen::MatrixXd e1 = encode(m1, n1);
  Eigen::MatrixXd e2 = encode(m2, n2);
  auto row = [](const NodeSet& n, const char* label, int r) {
    return static_cast<Eigen::Index>(n.symbol_node(*n.find_symbol(label), r));
  };
  for (int r = 1; r <= 4; ++r) EXPECT_TRUE(e2.row(row(n2, "IN:P", r)).isApprox(e1.row(row(n1, "IN:Q", r))));
  for (int r = 1; r <= 3; ++r) EXPECT_TRUE(e2.row(row(n2, "IN:Q", r)).isApprox(e1.row(row(n1, "IN:P", r))));
  for (Eigen::Index t = 0; t < 3; ++t) EXPECT_TRUE(e2.row(t).isApprox(e1.row(t)));
}

TEST(Model, UnknownWordsShareRowZero) {
  Model m = make_model(tiny_config(), Vocabulary({SymbolLabel::from_name("IN:A")}, {1}),
                       WordIndex({"b", "a"}));
  EXPECT_EQ(m.words.id("a"), 1);
  EXPECT_EQ(m.words.id("b"), 2);
  EXPECT_EQ(m.words.id("nope"), 0);
  NodeSet other = build_node_set({"a"}, Vocabulary({SymbolLabel::from_name("IN:B")}, {1}));
  EXPECT_EQ(error_code([&] { encode(m, other); }), ErrorCode::VocabMismatch);
}

TEST(Model, UniformScoresLikelihood) {
  testing::Rng rng(6);
  Instance inst = random_instance(rng, tiny_config());
  ScoreMatrix s(inst.nodes);
  SupervisionMask mask = extract_mask(PartialTree::full(inst.tree), inst.nodes);
  double expected = 0.0;
  for (NodeId c = 0; c < s.size(); ++c) {
    if (!mask.is_observed(c)) continue;
    int m = 0;
    for (NodeId p = 0; p < s.size(); ++p) m += s.allowed(p, c) ? 1 : 0;
    expected -= std::log(static_cast<double>(m));
  }
  EXPECT_NEAR(log_likelihood(s, mask), expected, 1e-12);

  NodeSet tokens_only({"x", "y"}, {{SymbolLabel::from_name("IN:A"), 1}}, "0000000000000000");
  ScoreMatrix zero(tokens_only);
  SupervisionMask token_mask{{2, 2, kNoParent, kNoParent, kNoParent}};
  EXPECT_NEAR(log_likelihood(zero, token_mask), -2.0 * std::log(3.0), 1e-15);

  SupervisionMask empty{std::vector<NodeId>(inst.nodes.size(), kNoParent)};
  EXPECT_EQ(log_likelihood(s, empty), 0.0);
}

TEST(Model, LikelihoodMatchesReference) {
  testing::Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    NodeSet nodes = testing::random_node_set(rng, 4, 3, 3);
    ScoreMatrix s = testing::random_scores(rng, nodes, -6, 6);
    SupervisionMask mask{std::vector<NodeId>(nodes.size(), kNoParent)};
    for (NodeId c = 0; c < s.size(); ++c) {
      if (c == nodes.root() || testing::uniform_real(rng) < 0.3) continue;
      std::vector<NodeId> options;
      for (NodeId p = 0; p < s.size(); ++p) {
        if (s.allowed(p, c)) options.push_back(p);
      }
      mask.observed[static_cast<std::size_t>(c)] =
          options[static_cast<std::size_t>(testing::uniform_int(rng, 0, static_cast<int>(options.size()) - 1))];
    }
    ASSERT_NEAR(log_likelihood(s, mask), static_cast<double>(testing::reference_log_likelihood(s, mask)),
                1e-9);
  }
}

TEST(Model, ProbabilitiesSumToOne) {
  testing::Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    Instance inst = random_instance(rng, tiny_config());
    randomize_all(inst.model, rng);
    Eigen::MatrixXd probs = parent_probabilities(score(inst.model, inst.nodes));
    for (NodeId c = 0; c < static_cast<NodeId>(inst.nodes.size()); ++c) {
      const double total = probs.col(c).sum();
      ASSERT_NEAR(total, c == inst.nodes.root() ? 0.0 : 1.0, 1e-9);
    }
  }
}

TEST(Model, MaskMismatch) {
  testing::Rng rng(9);
  Instance inst = random_instance(rng, tiny_config());
  ParseTree parse = top_to_parse(inst.tree, inst.nodes);
  SupervisionMask mask = extract_mask(PartialTree::full(inst.tree), inst.nodes);
  ScoreMatrix s = score(inst.model, inst.nodes);
  EXPECT_DOUBLE_EQ(log_likelihood(s, parse, mask), log_likelihood(s, mask));
  parse.parent[0] = inst.nodes.unused();
  EXPECT_EQ(error_code([&] { log_likelihood(s, parse, mask); }), ErrorCode::MaskMismatch);
}

TEST(Model, UnobservedChildrenDoNotAffectTheLoss) {
  testing::Rng rng(10);
  NodeSet nodes = testing::random_node_set(rng, 3, 2, 2);
  ScoreMatrix s = testing::random_scores(rng, nodes, -5, 5);
  SupervisionMask mask{std::vector<NodeId>(nodes.size(), kNoParent)};
  mask.observed[0] = nodes.root();
  const double base = log_likelihood(s, mask);
  Eigen::MatrixXd moved = s.dense();
  for (Eigen::Index c = 1; c < moved.cols(); ++c) {
    for (Eigen::Index p = 0; p < moved.rows(); ++p) {
      if (moved(p, c) != kNegInf) moved(p, c) += testing::uniform_int(rng, -9, 9);
    }
  }
  EXPECT_EQ(log_likelihood(ScoreMatrix(nodes, moved), mask), base);
}

TEST(Model, GradientsMatchFiniteDifferences) {
  testing::Rng rng(11);
  for (int point = 0; point < 4; ++point) {
    Instance inst = random_instance(rng, tiny_config());
    randomize_all(inst.model, rng);
    PartialTree target = point % 2 == 0 ? PartialTree::full(inst.tree) : project_terminal_only(inst.tree);
    SupervisionMask mask = extract_mask(target, inst.nodes);
    ModelParams grad = zeros_like(inst.model.params);
    masked_loss(inst.model, inst.nodes, mask, &grad);

    std::vector<Eigen::MatrixXd*> tensors;
    std::vector<const Eigen::MatrixXd*> grads;
    for_each_tensor(inst.model.params, [&](const std::string&, Eigen::MatrixXd& t) { tensors.push_back(&t); });
    for_each_tensor(grad, [&](const std::string&, Eigen::MatrixXd& t) { grads.push_back(&t); });
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      Eigen::MatrixXd& t = *tensors[k];
      if (t.size() == 0) continue;
      const Eigen::Index i = testing::uniform_int(rng, 0, static_cast<int>(t.size()) - 1);
      const double saved = t.data()[i];
      const double h = 1e-5;
      t.data()[i] = saved + h;
      const double up = masked_loss(inst.model, inst.nodes, mask);
      t.data()[i] = saved - h;
      const double down = masked_loss(inst.model, inst.nodes, mask);
      t.data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads[k]->data()[i];
      ASSERT_NEAR(analytic, numeric, 1e-6 + 1e-4 * std::abs(numeric)) << "tensor " << k;
    }
  }
}

TEST(Model, CheckpointRoundTrip) {
  testing::Rng rng(12);
  Instance inst = random_instance(rng, tiny_config());
  Vocabulary vocab = inst.model.vocab;
  vocab.set_replica_override(vocab.symbol(0).name, 5);
  inst.model = make_model(inst.model.config, vocab, inst.model.words);
  initialize(inst.model, 3);
  std::stringstream first;
  write_checkpoint(first, inst.model);
  Model back = read_checkpoint(first);
  EXPECT_EQ(back.config, inst.model.config);
  EXPECT_EQ(back.vocab, inst.model.vocab);
  EXPECT_EQ(back.words, inst.model.words);
  std::vector<const Eigen::MatrixXd*> a, b;
  for_each_tensor(inst.model.params, [&](const std::string&, const Eigen::MatrixXd& t) { a.push_back(&t); });
  for_each_tensor(back.params, [&](const std::string&, const Eigen::MatrixXd& t) { b.push_back(&t); });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_EQ(a[k]->rows(), b[k]->rows());
    ASSERT_EQ(a[k]->cols(), b[k]->cols());
    for (Eigen::Index i = 0; i < a[k]->size(); ++i) {
      ASSERT_EQ(static_cast<float>(a[k]->data()[i]), static_cast<float>(b[k]->data()[i]));
    }
  }
  std::stringstream second, third;
  write_checkpoint(second, back);
  write_checkpoint(third, read_checkpoint(second));
  EXPECT_EQ(second.str(), third.str());
}

TEST(Model, CorruptCheckpoints) {
  Model m = make_model(tiny_config(), Vocabulary({SymbolLabel::from_name("IN:A")}, {1}), WordIndex({"a"}));
  std::stringstream out;
  write_checkpoint(out, m);
  const std::string bytes = out.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_EQ(error_code([&] { read_checkpoint(truncated); }), ErrorCode::BadFormat);
  std::stringstream extra(bytes + "x");
  EXPECT_EQ(error_code([&] { read_checkpoint(extra); }), ErrorCode::BadFormat);
  std::stringstream garbage("not a checkpoint\n");
  EXPECT_EQ(error_code([&] { read_checkpoint(garbage); }), ErrorCode::BadFormat);
  EXPECT_EQ(error_code([] { load_checkpoint("/nonexistent/model.ckpt"); }), ErrorCode::Io);
}

}  // namespace
}  // namespace topdep
