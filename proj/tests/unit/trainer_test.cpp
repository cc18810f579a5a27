#include <gtest/gtest.h>

#include <sstream>

#include "error_code.hpp"
#include "grammar.hpp"
#include "topdep/trainer.hpp"

namespace topdep {
namespace {

using testing::error_code;

TrainConfig small_config() {
  TrainConfig c;
  c.model.dim = 16;
  c.model.layers = 1;
  c.model.heads = 2;
  c.model.ffn = 32;
  c.model.biaffine = 16;
  c.model.max_positions = 32;
  c.model.dropout = 0.1;
  c.steps = 60;
  c.warmup_steps = 10;
  c.batch_size = 4;
  c.learning_rate = 0.1;
  return c;
}

struct Corpus {
  std::vector<TrainExample> examples;
  Vocabulary vocab;
};

Corpus grammar_corpus(std::size_t n, std::uint64_t seed) {
  testing::SyntheticGrammar grammar;
  testing::Rng rng(seed);
  Corpus c;
  std::vector<TopTree> trees;
  for (const auto& s : grammar.sample(rng, n)) {
    c.examples.push_back({s.tokens, PartialTree::full(s.tree)});
    trees.push_back(s.tree);
  }
  c.vocab = build_vocabulary(trees);
  return c;
}

double mean_loss(const std::vector<LossPoint>& trace, std::size_t from, std::size_t to) {
  double total = 0.0;
  for (std::size_t i = from; i < to; ++i) total += trace[i].loss;
  return total / static_cast<double>(to - from);
}

TEST(Trainer, Schedule) {
  TrainConfig c;
  c.steps = 100;
  c.warmup_steps = 10;
  EXPECT_DOUBLE_EQ(schedule(c, 0), 0.1);
  EXPECT_DOUBLE_EQ(schedule(c, 9), 1.0);
  EXPECT_GT(schedule(c, 50), schedule(c, 80));
  EXPECT_GT(schedule(c, 99), 0.0);
}

TEST(Trainer, LossDecreases) {
  Corpus corpus = grammar_corpus(40, 1);
  TrainResult r = train(corpus.examples, corpus.vocab, small_config());
  ASSERT_EQ(r.trace.size(), 60u);
  EXPECT_EQ(r.trace.front().step, 1);
  EXPECT_LT(mean_loss(r.trace, 50, 60), 0.5 * mean_loss(r.trace, 0, 10));
}

TEST(Trainer, AdamAlsoLearns) {
  Corpus corpus = grammar_corpus(40, 2);
  TrainConfig c = small_config();
  c.optimizer = Optimizer::Adam;
  c.learning_rate = 3e-3;
  TrainResult r = train(corpus.examples, corpus.vocab, c);
  EXPECT_LT(mean_loss(r.trace, 50, 60), mean_loss(r.trace, 0, 10));
}

TEST(Trainer, SameSeedIsBitIdentical) {
  Corpus corpus = grammar_corpus(20, 3);
  TrainConfig c = small_config();
  c.steps = 15;
  c.word_dropout = 0.1;
  TrainResult a = train(corpus.examples, corpus.vocab, c);
  TrainResult b = train(corpus.examples, corpus.vocab, c);
  std::ostringstream ta, tb;
  write_loss_trace(ta, a.trace);
  write_loss_trace(tb, b.trace);
  EXPECT_EQ(ta.str(), tb.str());
  std::vector<Eigen::MatrixXd> pa, pb;
  for_each_tensor(a.model.params, [&](const std::string&, const Eigen::MatrixXd& t) { pa.push_back(t); });
  for_each_tensor(b.model.params, [&](const std::string&, const Eigen::MatrixXd& t) { pb.push_back(t); });
  EXPECT_EQ(pa, pb);

  c.seed = 2;
  TrainResult other = train(corpus.examples, corpus.vocab, c);
  std::ostringstream to;
  write_loss_trace(to, other.trace);
  EXPECT_NE(to.str(), ta.str());
}

TEST(Trainer, PartialTargetsTrain) {
  testing::SyntheticGrammar grammar;
  testing::Rng rng(4);
  std::vector<TrainExample> examples;
  VocabularyBuilder builder;
  int i = 0;
  for (const auto& s : grammar.sample(rng, 30)) {
    PartialTree p = i % 3 == 0   ? PartialTree::full(s.tree)
                    : i % 3 == 1 ? project_terminal_only(s.tree)
                                 : project_nonterminal_only(s.tree);
    builder.add(s.tree);
    examples.push_back({s.tokens, p});
    ++i;
  }
  TrainConfig c = small_config();
  c.steps = 20;
  TrainResult r = train(examples, builder.build(), c);
  for (const auto& point : r.trace) EXPECT_TRUE(std::isfinite(point.loss));
}

TEST(Trainer, Errors) {
  Corpus corpus = grammar_corpus(10, 5);
  EXPECT_EQ(error_code([&] { train({}, corpus.vocab, small_config()); }), ErrorCode::EmptyCorpus);

  TrainConfig blowup = small_config();
  blowup.optimizer = Optimizer::Sgd;
  blowup.learning_rate = 1e300;
  blowup.clip_norm = 0.0;
  blowup.warmup_steps = 0;
  EXPECT_EQ(error_code([&] { train(corpus.examples, corpus.vocab, blowup); }), ErrorCode::NonFiniteLoss);

  TrainConfig bad = small_config();
  bad.batch_size = 0;
  EXPECT_EQ(error_code([&] { train(corpus.examples, corpus.vocab, bad); }), ErrorCode::BadFormat);
  EXPECT_EQ(error_code([] { optimizer_from_string("rmsprop"); }), ErrorCode::BadFormat);
  EXPECT_EQ(optimizer_from_string(to_string(Optimizer::Sgd)), Optimizer::Sgd);
}

TEST(Trainer, LossTraceCsv) {
  std::ostringstream out;
  write_loss_trace(out, {{1, 2.5}, {2, 0.125}});
  EXPECT_EQ(out.str(), "step,loss\n1,2.5\n2,0.125\n");
}

}  // namespace
}  // namespace topdep
