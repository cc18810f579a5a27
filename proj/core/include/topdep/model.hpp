#pragma once

// Edge-factored scorer: node embeddings, a joint Transformer contextualizer
// over tokens and symbol replicas, and a biaffine edge score.

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "topdep/mapping.hpp"
#include "topdep/score_matrix.hpp"
#include "topdep/vocabulary.hpp"

namespace topdep {

struct ModelConfig {
  int dim = 64;
  int layers = 2;
  int heads = 2;
  int ffn = 128;
  int biaffine = 64;  // 0 scores the encodings directly
  int max_positions = 64;
  double dropout = 0.1;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Word ids for query tokens; id 0 is reserved for unknown words.
class WordIndex {
 public:
  WordIndex() = default;
  explicit WordIndex(std::vector<std::string> words);

  std::size_t size() const { return words_.size() + 1; }
  int id(std::string_view word) const;
  const std::vector<std::string>& words() const { return words_; }

  friend bool operator==(const WordIndex&, const WordIndex&) = default;

 private:
  std::vector<std::string> words_;  // sorted, unique
};

// Biases and vectors are stored as 1 x k matrices so every tensor has one type.
struct LayerParams {
  Eigen::MatrixXd ln1_gain, ln1_bias;
  Eigen::MatrixXd wq, wk, wv, wo;
  Eigen::MatrixXd bq, bk, bv, bo;
  Eigen::MatrixXd ln2_gain, ln2_bias;
  Eigen::MatrixXd w1, b1, w2, b2;
};

struct EncoderParams {
  Eigen::MatrixXd word;      // WordIndex::size() x dim
  Eigen::MatrixXd position;  // max_positions x dim
  Eigen::MatrixXd node;      // one row per symbol replica, then Root, then Unused
  std::vector<LayerParams> layers;
};

struct BiaffineParams {
  Eigen::MatrixXd parent_proj, parent_bias;  // empty when there is no projection
  Eigen::MatrixXd child_proj, child_bias;
  Eigen::MatrixXd U;
  Eigen::MatrixXd u;  // 1 x hidden
};

struct ModelParams {
  EncoderParams encoder;
  BiaffineParams biaffine;
};

/// Calls `f(name, tensor)` for every parameter tensor in a fixed order.
template <class Params, class F>
void for_each_tensor(Params& p, F&& f) {
  f("word", p.encoder.word);
  f("position", p.encoder.position);
  f("node", p.encoder.node);
  for (std::size_t i = 0; i < p.encoder.layers.size(); ++i) {
    auto& l = p.encoder.layers[i];
    const std::string pre = "layer" + std::to_string(i) + ".";
    f(pre + "ln1_gain", l.ln1_gain);
    f(pre + "ln1_bias", l.ln1_bias);
    f(pre + "wq", l.wq);
    f(pre + "wk", l.wk);
    f(pre + "wv", l.wv);
    f(pre + "wo", l.wo);
    f(pre + "bq", l.bq);
    f(pre + "bk", l.bk);
    f(pre + "bv", l.bv);
    f(pre + "bo", l.bo);
    f(pre + "ln2_gain", l.ln2_gain);
    f(pre + "ln2_bias", l.ln2_bias);
    f(pre + "w1", l.w1);
    f(pre + "b1", l.b1);
    f(pre + "w2", l.w2);
    f(pre + "b2", l.b2);
  }
  f("parent_proj", p.biaffine.parent_proj);
  f("parent_bias", p.biaffine.parent_bias);
  f("child_proj", p.biaffine.child_proj);
  f("child_bias", p.biaffine.child_bias);
  f("U", p.biaffine.U);
  f("u", p.biaffine.u);
}

/// Same shapes as `p`, all zeros.
ModelParams zeros_like(const ModelParams& p);
std::size_t parameter_count(const ModelParams& p);

struct Model {
  ModelConfig config;
  Vocabulary vocab;
  WordIndex words;
  ModelParams params;
};

/// Zero-valued parameters with the shapes implied by the config.
Model make_model(const ModelConfig& config, Vocabulary vocab, WordIndex words);

/// Random initialization; layer-norm gains start at 1.
void initialize(Model& model, std::uint64_t seed);

/// Embedding-table row for every node of `nodes` (token rows index `word`).
std::vector<int> word_ids(const Model& model, const NodeSet& nodes);

/// Contextualized encodings, one row per node, with dropout off.
Eigen::MatrixXd encode(const Model& model, const NodeSet& nodes);

/// Raw biaffine scores for every (parent, child) pair, before masking.
Eigen::MatrixXd biaffine_scores(const Eigen::MatrixXd& encodings, const BiaffineParams& params);

ScoreMatrix score_edges(const Eigen::MatrixXd& encodings, const BiaffineParams& params,
                        const NodeSet& nodes);

ScoreMatrix score(const Model& model, const NodeSet& nodes);

/// Column c holds p(parent | c) over allowed parents; the Root column is zero.
Eigen::MatrixXd parent_probabilities(const ScoreMatrix& scores);

/// Sum over observed children of log p(observed parent | child).
double log_likelihood(const ScoreMatrix& scores, const SupervisionMask& mask);

/// As above; throws MaskMismatch if an observed edge is absent from `parse`.
double log_likelihood(const ScoreMatrix& scores, const ParseTree& parse,
                      const SupervisionMask& mask);

/// Counter-based uniform stream so dropout draws do not depend on the
/// standard library's distribution implementations.
class DropoutRng {
 public:
  explicit DropoutRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

/// Negative masked log-likelihood of one example. When `grad` is non-null,
/// adds `weight` times the gradient into it. Dropout is applied when `rng` is
/// non-null.
double masked_loss(const Model& model, const NodeSet& nodes, const SupervisionMask& mask,
                   ModelParams* grad = nullptr, double weight = 1.0, DropoutRng* rng = nullptr);

}  // namespace topdep
