#pragma once

// Masked maximum-likelihood training of the edge scorer.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "topdep/model.hpp"
#include "topdep/top_tree.hpp"

namespace topdep {

enum class Optimizer { Sgd, Adam };

std::string_view to_string(Optimizer optimizer);
Optimizer optimizer_from_string(std::string_view name);

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 0.1;
  int steps = 3000;
  int warmup_steps = 300;
  int batch_size = 16;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::Sgd;
  double clip_norm = 5.0;  // 0 disables clipping
  /// Probability of replacing a training token with the unknown word.
  double word_dropout = 0.0;

  void validate() const;
};

struct TrainExample {
  std::vector<std::string> tokens;
  PartialTree target;
};

struct LossPoint {
  int step = 0;
  double loss = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<LossPoint> trace;
};

/// Learning-rate multiplier: linear warmup to 1, then linear decay to 0.
double schedule(const TrainConfig& config, int step);

/// Throws EmptyCorpus for an empty corpus and NonFiniteLoss when a batch loss
/// is NaN or infinite. Words are indexed from the corpus tokens.
TrainResult train(const std::vector<TrainExample>& corpus, const Vocabulary& vocab,
                  const TrainConfig& config);

/// CSV with header "step,loss".
void write_loss_trace(std::ostream& out, const std::vector<LossPoint>& trace);

}  // namespace topdep
