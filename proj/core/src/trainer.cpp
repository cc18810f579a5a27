#include "topdep/trainer.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "topdep/error.hpp"
#include "topdep/mapping.hpp"

namespace topdep {

using Eigen::MatrixXd;

std::string_view to_string(Optimizer optimizer) {
  return optimizer == Optimizer::Sgd ? "sgd" : "adam";
}

Optimizer optimizer_from_string(std::string_view name) {
  if (name == "sgd") return Optimizer::Sgd;
  if (name == "adam") return Optimizer::Adam;
  fail(ErrorCode::BadFormat, "unknown optimizer " + std::string(name));
}

void TrainConfig::validate() const {
  model.validate();
  if (!(learning_rate > 0.0) || steps < 1 || warmup_steps < 0 || batch_size < 1) {
    fail(ErrorCode::BadFormat, "learning rate, steps and batch size must be positive");
  }
  if (clip_norm < 0.0) fail(ErrorCode::BadFormat, "clip_norm must be non-negative");
  if (!(word_dropout >= 0.0 && word_dropout < 1.0)) {
    fail(ErrorCode::BadFormat, "word_dropout must be in [0, 1)");
  }
}

double schedule(const TrainConfig& config, int step) {
  if (step < config.warmup_steps) {
    return static_cast<double>(step + 1) / static_cast<double>(config.warmup_steps);
  }
  const int decay = config.steps - config.warmup_steps;
  if (decay <= 0) return 1.0;
  return static_cast<double>(config.steps - step) / static_cast<double>(decay);
}

namespace {

// Never produced by split_tokens, so it always maps to the unknown word.
const std::string kDroppedWord = "\x01";

struct Prepared {
  NodeSet nodes;
  SupervisionMask mask;
};

class AdamState {
 public:
  explicit AdamState(const ModelParams& shape) : m_(zeros_like(shape)), v_(zeros_like(shape)) {}

  void step(ModelParams& params, ModelParams& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    std::vector<MatrixXd*> ms, vs, gs;
    for_each_tensor(m_, [&](const std::string&, MatrixXd& t) { ms.push_back(&t); });
    for_each_tensor(v_, [&](const std::string&, MatrixXd& t) { vs.push_back(&t); });
    for_each_tensor(grad, [&](const std::string&, MatrixXd& t) { gs.push_back(&t); });
    std::size_t i = 0;
    for_each_tensor(params, [&](const std::string&, MatrixXd& p) {
      MatrixXd& m = *ms[i];
      MatrixXd& v = *vs[i];
      const MatrixXd& g = *gs[i];
      m = kBeta1 * m + (1.0 - kBeta1) * g;
      v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
      p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
      ++i;
    });
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  ModelParams m_, v_;
  int t_ = 0;
};

double global_norm(ModelParams& grad) {
  double sq = 0.0;
  for_each_tensor(grad, [&](const std::string&, const MatrixXd& t) { sq += t.squaredNorm(); });
  return std::sqrt(sq);
}

}  // namespace

TrainResult train(const std::vector<TrainExample>& corpus, const Vocabulary& vocab,
                  const TrainConfig& config) {
  config.validate();
  if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "training corpus is empty");

  std::vector<std::string> words;
  for (const auto& ex : corpus) words.insert(words.end(), ex.tokens.begin(), ex.tokens.end());
  TrainResult result{make_model(config.model, vocab, WordIndex(std::move(words))), {}};
  Model& model = result.model;
  initialize(model, config.seed);

  std::vector<Prepared> data;
  data.reserve(corpus.size());
  for (const auto& ex : corpus) {
    NodeSet nodes = build_node_set(ex.tokens, vocab);
    SupervisionMask mask = extract_mask(ex.target, nodes);
    data.push_back({std::move(nodes), std::move(mask)});
  }

  DropoutRng order_rng(config.seed * 0x9E3779B97F4A7C15ull + 1);
  DropoutRng dropout_rng(config.seed * 0x9E3779B97F4A7C15ull + 2);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();

  AdamState adam(model.params);
  result.trace.reserve(static_cast<std::size_t>(config.steps));
  for (int step = 0; step < config.steps; ++step) {
    ModelParams grad = zeros_like(model.params);
    const double weight = 1.0 / static_cast<double>(config.batch_size);
    double batch_loss = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) {
          auto j = static_cast<std::size_t>(order_rng.uniform() * static_cast<double>(i));
          std::swap(order[i - 1], order[std::min(j, i - 1)]);
        }
        cursor = 0;
      }
      const Prepared& ex = data[order[cursor++]];
      if (config.word_dropout > 0.0) {
        std::vector<std::string> tokens = ex.nodes.tokens();
        for (auto& t : tokens) {
          if (dropout_rng.uniform() < config.word_dropout) t = kDroppedWord;
        }
        NodeSet noisy = build_node_set(tokens, vocab);
        batch_loss += weight * masked_loss(model, noisy, ex.mask, &grad, weight, &dropout_rng);
      } else {
        batch_loss += weight * masked_loss(model, ex.nodes, ex.mask, &grad, weight, &dropout_rng);
      }
    }
    if (!std::isfinite(batch_loss)) {
      fail(ErrorCode::NonFiniteLoss, "loss is " + std::to_string(batch_loss) + " at step " +
                                         std::to_string(step + 1));
    }
    if (config.clip_norm > 0.0) {
      const double norm = global_norm(grad);
      if (!std::isfinite(norm)) {
        fail(ErrorCode::NonFiniteLoss, "gradient norm is not finite at step " + std::to_string(step + 1));
      }
      if (norm > config.clip_norm) {
        const double s = config.clip_norm / norm;
        for_each_tensor(grad, [&](const std::string&, MatrixXd& t) { t *= s; });
      }
    }
    const double lr = config.learning_rate * schedule(config, step);
    if (config.optimizer == Optimizer::Adam) {
      adam.step(model.params, grad, lr);
    } else {
      std::vector<MatrixXd*> gs;
      for_each_tensor(grad, [&](const std::string&, MatrixXd& t) { gs.push_back(&t); });
      std::size_t i = 0;
      for_each_tensor(model.params, [&](const std::string&, MatrixXd& p) { p -= lr * *gs[i++]; });
    }
    result.trace.push_back({step + 1, batch_loss});
  }
  return result;
}

void write_loss_trace(std::ostream& out, const std::vector<LossPoint>& trace) {
  out << "step,loss\n";
  char buf[64];
  for (const auto& point : trace) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, point.loss);
    out << point.step << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf)) << '\n';
  }
}

}  // namespace topdep
