#include "topdep/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "topdep/error.hpp"

namespace topdep {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void ModelConfig::validate() const {
  if (dim < 1 || layers < 0 || heads < 1 || ffn < 1 || biaffine < 0 || max_positions < 1) {
    fail(ErrorCode::BadFormat, "model dimensions must be positive");
  }
  if (dim % heads != 0) fail(ErrorCode::BadFormat, "dim must be divisible by heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorCode::BadFormat, "dropout must be in [0, 1)");
}

WordIndex::WordIndex(std::vector<std::string> words) : words_(std::move(words)) {
  std::sort(words_.begin(), words_.end());
  words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
}

int WordIndex::id(std::string_view word) const {
  auto it = std::lower_bound(words_.begin(), words_.end(), word);
  if (it == words_.end() || *it != word) return 0;
  return static_cast<int>(it - words_.begin()) + 1;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams out = p;
  for_each_tensor(out, [](const std::string&, MatrixXd& t) { t.setZero(); });
  return out;
}

std::size_t parameter_count(const ModelParams& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&](const std::string&, const MatrixXd& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

Model make_model(const ModelConfig& config, Vocabulary vocab, WordIndex words) {
  config.validate();
  Model m{config, std::move(vocab), std::move(words), {}};
  const int d = config.dim;
  auto& enc = m.params.encoder;
  enc.word = MatrixXd::Zero(static_cast<Eigen::Index>(m.words.size()), d);
  enc.position = MatrixXd::Zero(config.max_positions, d);
  enc.node = MatrixXd::Zero(static_cast<Eigen::Index>(m.vocab.total_replicas() + 2), d);
  enc.layers.resize(static_cast<std::size_t>(config.layers));
  for (auto& l : enc.layers) {
    l.ln1_gain = MatrixXd::Ones(1, d);
    l.ln1_bias = MatrixXd::Zero(1, d);
    l.wq = l.wk = l.wv = l.wo = MatrixXd::Zero(d, d);
    l.bq = l.bk = l.bv = l.bo = MatrixXd::Zero(1, d);
    l.ln2_gain = MatrixXd::Ones(1, d);
    l.ln2_bias = MatrixXd::Zero(1, d);
    l.w1 = MatrixXd::Zero(d, config.ffn);
    l.b1 = MatrixXd::Zero(1, config.ffn);
    l.w2 = MatrixXd::Zero(config.ffn, d);
    l.b2 = MatrixXd::Zero(1, d);
  }
  auto& bi = m.params.biaffine;
  const int h = config.biaffine > 0 ? config.biaffine : d;
  if (config.biaffine > 0) {
    bi.parent_proj = bi.child_proj = MatrixXd::Zero(d, h);
    bi.parent_bias = bi.child_bias = MatrixXd::Zero(1, h);
  }
  bi.U = MatrixXd::Zero(h, h);
  bi.u = MatrixXd::Zero(1, h);
  return m;
}

void initialize(Model& model, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](MatrixXd& t, double stddev) {
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = stddev * normal(engine);
    }
  };
  auto& enc = model.params.encoder;
  fill(enc.word, 1.0);
  fill(enc.position, 0.5);
  fill(enc.node, 1.0);
  for (auto& l : enc.layers) {
    const double s = 1.0 / std::sqrt(static_cast<double>(model.config.dim));
    fill(l.wq, s);
    fill(l.wk, s);
    fill(l.wv, s);
    fill(l.wo, s);
    fill(l.w1, s);
    fill(l.w2, 1.0 / std::sqrt(static_cast<double>(model.config.ffn)));
  }
  auto& bi = model.params.biaffine;
  if (bi.parent_proj.size() > 0) {
    const double s = 1.0 / std::sqrt(static_cast<double>(model.config.dim));
    fill(bi.parent_proj, s);
    fill(bi.child_proj, s);
  }
  fill(bi.U, 1.0 / static_cast<double>(bi.U.rows()));
}

std::vector<int> word_ids(const Model& model, const NodeSet& nodes) {
  if (nodes.vocab_hash() != model.vocab.hash()) {
    fail(ErrorCode::VocabMismatch, "node set vocabulary " + nodes.vocab_hash() +
                                       " differs from model vocabulary " + model.vocab.hash());
  }
  std::vector<int> first(model.vocab.size(), 0);
  int total = 0;
  for (std::size_t s = 0; s < model.vocab.size(); ++s) {
    first[s] = total;
    total += model.vocab.replicas(s);
  }
  std::vector<int> ids(nodes.size());
  for (NodeId i = 0; i < static_cast<NodeId>(nodes.size()); ++i) {
    const Node& n = nodes.node(i);
    switch (n.kind) {
      case NodeKind::Token:
        ids[static_cast<std::size_t>(i)] = model.words.id(nodes.tokens()[n.position]);
        break;
      case NodeKind::Symbol:
        ids[static_cast<std::size_t>(i)] = first[n.symbol] + n.replica - 1;
        break;
      case NodeKind::Root:
        ids[static_cast<std::size_t>(i)] = total;
        break;
      case NodeKind::Unused:
        ids[static_cast<std::size_t>(i)] = total + 1;
        break;
    }
  }
  return ids;
}

namespace {

constexpr double kLayerNormEps = 1e-5;

MatrixXd sigmoid(const MatrixXd& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

MatrixXd silu(const MatrixXd& x) { return (x.array() * sigmoid(x).array()).matrix(); }

MatrixXd silu_grad(const MatrixXd& x) {
  const Eigen::ArrayXXd s = sigmoid(x).array();
  return (s * (1.0 + x.array() * (1.0 - s))).matrix();
}

MatrixXd affine(const MatrixXd& x, const MatrixXd& w, const MatrixXd& b) {
  MatrixXd y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

struct NormCache {
  MatrixXd xhat;
  VectorXd rstd;
};

MatrixXd layer_norm(const MatrixXd& x, const MatrixXd& gain, const MatrixXd& bias, NormCache& c) {
  const VectorXd mean = x.rowwise().mean();
  const MatrixXd centered = x.colwise() - mean;
  const VectorXd var = centered.array().square().rowwise().mean();
  c.rstd = (var.array() + kLayerNormEps).rsqrt();
  c.xhat = centered.array().colwise() * c.rstd.array();
  MatrixXd y = c.xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

MatrixXd layer_norm_backward(const MatrixXd& dy, const MatrixXd& gain, const NormCache& c,
                             MatrixXd& dgain, MatrixXd& dbias) {
  dgain += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  const MatrixXd dxhat = dy.array().rowwise() * gain.row(0).array();
  const VectorXd m1 = dxhat.rowwise().mean();
  const VectorXd m2 = (dxhat.array() * c.xhat.array()).rowwise().mean();
  MatrixXd dx = dxhat.colwise() - m1;
  dx -= (c.xhat.array().colwise() * m2.array()).matrix();
  return dx.array().colwise() * c.rstd.array();
}

MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, DropoutRng& rng) {
  MatrixXd mask(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = rng.uniform() < rate ? 0.0 : keep;
  }
  return mask;
}

struct LayerCache {
  NormCache ln1, ln2;
  MatrixXd a, q, k, v;
  std::vector<MatrixXd> probs;
  MatrixXd concat;
  MatrixXd drop1, drop2;
  MatrixXd b, h1, g;
};

MatrixXd layer_forward(const LayerParams& p, const ModelConfig& cfg, const MatrixXd& x,
                       LayerCache& c, DropoutRng* rng) {
  const int dh = cfg.dim / cfg.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  c.a = layer_norm(x, p.ln1_gain, p.ln1_bias, c.ln1);
  c.q = affine(c.a, p.wq, p.bq);
  c.k = affine(c.a, p.wk, p.bk);
  c.v = affine(c.a, p.wv, p.bv);
  c.concat.resize(x.rows(), cfg.dim);
  c.probs.resize(static_cast<std::size_t>(cfg.heads));
  for (int h = 0; h < cfg.heads; ++h) {
    MatrixXd s = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * scale;
    const VectorXd top = s.rowwise().maxCoeff();
    s = (s.colwise() - top).array().exp().matrix();
    const VectorXd total = s.rowwise().sum();
    s = s.array().colwise() / total.array();
    c.concat.middleCols(h * dh, dh) = s * c.v.middleCols(h * dh, dh);
    c.probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  MatrixXd attn = affine(c.concat, p.wo, p.bo);
  if (rng && cfg.dropout > 0.0) {
    c.drop1 = dropout_mask(attn.rows(), attn.cols(), cfg.dropout, *rng);
    attn.array() *= c.drop1.array();
  } else {
    c.drop1.resize(0, 0);
  }
  MatrixXd x1 = x + attn;
  c.b = layer_norm(x1, p.ln2_gain, p.ln2_bias, c.ln2);
  c.h1 = affine(c.b, p.w1, p.b1);
  c.g = silu(c.h1);
  MatrixXd f = affine(c.g, p.w2, p.b2);
  if (rng && cfg.dropout > 0.0) {
    c.drop2 = dropout_mask(f.rows(), f.cols(), cfg.dropout, *rng);
    f.array() *= c.drop2.array();
  } else {
    c.drop2.resize(0, 0);
  }
  return x1 + f;
}

MatrixXd layer_backward(const LayerParams& p, const ModelConfig& cfg, const LayerCache& c,
                        const MatrixXd& dout, LayerParams& g) {
  const int dh = cfg.dim / cfg.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  MatrixXd df = dout;
  if (c.drop2.size() > 0) df.array() *= c.drop2.array();
  g.w2 += c.g.transpose() * df;
  g.b2 += df.colwise().sum();
  const MatrixXd dh1 = ((df * p.w2.transpose()).array() * silu_grad(c.h1).array()).matrix();
  g.w1 += c.b.transpose() * dh1;
  g.b1 += dh1.colwise().sum();
  MatrixXd dx1 = dout + layer_norm_backward(dh1 * p.w1.transpose(), p.ln2_gain, c.ln2,
                                            g.ln2_gain, g.ln2_bias);

  MatrixXd dattn = dx1;
  if (c.drop1.size() > 0) dattn.array() *= c.drop1.array();
  g.wo += c.concat.transpose() * dattn;
  g.bo += dattn.colwise().sum();
  const MatrixXd dconcat = dattn * p.wo.transpose();

  MatrixXd dq(c.q.rows(), c.q.cols()), dk(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
  for (int h = 0; h < cfg.heads; ++h) {
    const MatrixXd& prob = c.probs[static_cast<std::size_t>(h)];
    const auto dO = dconcat.middleCols(h * dh, dh);
    const MatrixXd dp = dO * c.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh) = prob.transpose() * dO;
    const VectorXd inner = (dp.array() * prob.array()).rowwise().sum();
    const MatrixXd ds = (prob.array() * (dp.colwise() - inner).array()).matrix() * scale;
    dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh);
  }
  g.wq += c.a.transpose() * dq;
  g.wk += c.a.transpose() * dk;
  g.wv += c.a.transpose() * dv;
  g.bq += dq.colwise().sum();
  g.bk += dk.colwise().sum();
  g.bv += dv.colwise().sum();
  const MatrixXd da = dq * p.wq.transpose() + dk * p.wk.transpose() + dv * p.wv.transpose();
  return dx1 + layer_norm_backward(da, p.ln1_gain, c.ln1, g.ln1_gain, g.ln1_bias);
}

struct EncoderRun {
  std::vector<int> ids;
  std::vector<LayerCache> layers;
  MatrixXd output;
};

EncoderRun encoder_forward(const Model& model, const NodeSet& nodes, DropoutRng* rng) {
  EncoderRun run;
  run.ids = word_ids(model, nodes);
  const auto& enc = model.params.encoder;
  const auto n = static_cast<Eigen::Index>(nodes.size());
  MatrixXd x(n, model.config.dim);
  for (NodeId i = 0; i < static_cast<NodeId>(n); ++i) {
    const int id = run.ids[static_cast<std::size_t>(i)];
    if (nodes.is_token(i)) {
      const auto pos = std::min<std::size_t>(nodes.node(i).position,
                                             static_cast<std::size_t>(model.config.max_positions - 1));
      x.row(i) = enc.word.row(id) + enc.position.row(static_cast<Eigen::Index>(pos));
    } else {
      x.row(i) = enc.node.row(id);
    }
  }
  run.layers.resize(enc.layers.size());
  for (std::size_t l = 0; l < enc.layers.size(); ++l) {
    x = layer_forward(enc.layers[l], model.config, x, run.layers[l], rng);
  }
  run.output = std::move(x);
  return run;
}

void encoder_backward(const Model& model, const NodeSet& nodes, const EncoderRun& run,
                      MatrixXd dx, EncoderParams& g) {
  const auto& enc = model.params.encoder;
  for (std::size_t l = enc.layers.size(); l-- > 0;) {
    dx = layer_backward(enc.layers[l], model.config, run.layers[l], dx, g.layers[l]);
  }
  for (NodeId i = 0; i < static_cast<NodeId>(nodes.size()); ++i) {
    const int id = run.ids[static_cast<std::size_t>(i)];
    if (nodes.is_token(i)) {
      const auto pos = std::min<std::size_t>(nodes.node(i).position,
                                             static_cast<std::size_t>(model.config.max_positions - 1));
      g.word.row(id) += dx.row(i);
      g.position.row(static_cast<Eigen::Index>(pos)) += dx.row(i);
    } else {
      g.node.row(id) += dx.row(i);
    }
  }
}

struct BiaffineRun {
  MatrixXd zp, zc, hp, hc;
};

MatrixXd biaffine_forward(const MatrixXd& e, const BiaffineParams& p, BiaffineRun& run) {
  if (p.parent_proj.size() > 0) {
    run.zp = affine(e, p.parent_proj, p.parent_bias);
    run.zc = affine(e, p.child_proj, p.child_bias);
    run.hp = silu(run.zp);
    run.hc = silu(run.zc);
  } else {
    run.hp = e;
    run.hc = e;
  }
  MatrixXd s = run.hp * p.U * run.hc.transpose();
  s.colwise() += run.hp * p.u.row(0).transpose();
  return s;
}

MatrixXd biaffine_backward(const MatrixXd& e, const BiaffineParams& p, const BiaffineRun& run,
                           const MatrixXd& ds, BiaffineParams& g) {
  const VectorXd row_total = ds.rowwise().sum();
  g.U += run.hp.transpose() * ds * run.hc;
  g.u += (run.hp.transpose() * row_total).transpose();
  MatrixXd dhp = ds * run.hc * p.U.transpose() + row_total * p.u.row(0);
  MatrixXd dhc = ds.transpose() * run.hp * p.U;
  if (p.parent_proj.size() == 0) return dhp + dhc;
  const MatrixXd dzp = (dhp.array() * silu_grad(run.zp).array()).matrix();
  const MatrixXd dzc = (dhc.array() * silu_grad(run.zc).array()).matrix();
  g.parent_proj += e.transpose() * dzp;
  g.parent_bias += dzp.colwise().sum();
  g.child_proj += e.transpose() * dzc;
  g.child_bias += dzc.colwise().sum();
  return dzp * p.parent_proj.transpose() + dzc * p.child_proj.transpose();
}

// Log-partition over the allowed parents of `child`.
double log_partition(const ScoreMatrix& scores, NodeId child) {
  double top = kNegInf;
  for (NodeId p = 0; p < scores.size(); ++p) top = std::max(top, scores(p, child));
  if (top == kNegInf) return kNegInf;
  double total = 0.0;
  for (NodeId p = 0; p < scores.size(); ++p) {
    if (scores(p, child) != kNegInf) total += std::exp(scores(p, child) - top);
  }
  return top + std::log(total);
}

}  // namespace

MatrixXd encode(const Model& model, const NodeSet& nodes) {
  return encoder_forward(model, nodes, nullptr).output;
}

MatrixXd biaffine_scores(const MatrixXd& encodings, const BiaffineParams& params) {
  BiaffineRun run;
  return biaffine_forward(encodings, params, run);
}

ScoreMatrix score_edges(const MatrixXd& encodings, const BiaffineParams& params,
                        const NodeSet& nodes) {
  if (encodings.rows() != static_cast<Eigen::Index>(nodes.size())) {
    fail(ErrorCode::BadFormat, "encoding rows differ from node set size");
  }
  return ScoreMatrix(nodes, biaffine_scores(encodings, params));
}

ScoreMatrix score(const Model& model, const NodeSet& nodes) {
  return score_edges(encode(model, nodes), model.params.biaffine, nodes);
}

MatrixXd parent_probabilities(const ScoreMatrix& scores) {
  const auto n = static_cast<Eigen::Index>(scores.size());
  MatrixXd prob = MatrixXd::Zero(n, n);
  for (NodeId c = 0; c < scores.size(); ++c) {
    const double z = log_partition(scores, c);
    if (z == kNegInf) continue;
    for (NodeId p = 0; p < scores.size(); ++p) {
      if (scores(p, c) != kNegInf) prob(p, c) = std::exp(scores(p, c) - z);
    }
  }
  return prob;
}

double log_likelihood(const ScoreMatrix& scores, const SupervisionMask& mask) {
  if (mask.observed.size() != static_cast<std::size_t>(scores.size())) {
    fail(ErrorCode::MaskMismatch, "mask size differs from node set size");
  }
  double total = 0.0;
  for (NodeId c = 0; c < scores.size(); ++c) {
    const NodeId p = mask.observed[static_cast<std::size_t>(c)];
    if (p == kNoParent) continue;
    total += scores(p, c) - log_partition(scores, c);
  }
  return total;
}

double log_likelihood(const ScoreMatrix& scores, const ParseTree& parse,
                      const SupervisionMask& mask) {
  if (parse.parent.size() != mask.observed.size()) {
    fail(ErrorCode::MaskMismatch, "mask size differs from parse size");
  }
  for (std::size_t c = 0; c < mask.observed.size(); ++c) {
    if (mask.observed[c] != kNoParent && mask.observed[c] != parse.parent[c]) {
      fail(ErrorCode::MaskMismatch, "observed edge into " +
                                        parse.nodes.name(static_cast<NodeId>(c)) +
                                        " is not in the parse");
    }
  }
  return log_likelihood(scores, mask);
}

double masked_loss(const Model& model, const NodeSet& nodes, const SupervisionMask& mask,
                   ModelParams* grad, double weight, DropoutRng* rng) {
  if (mask.observed.size() != nodes.size()) {
    fail(ErrorCode::MaskMismatch, "mask size differs from node set size");
  }
  EncoderRun enc = encoder_forward(model, nodes, rng);
  BiaffineRun bi;
  const ScoreMatrix scores(nodes, biaffine_forward(enc.output, model.params.biaffine, bi));
  const auto n = static_cast<Eigen::Index>(nodes.size());
  MatrixXd ds = MatrixXd::Zero(n, n);
  double loss = 0.0;
  for (NodeId c = 0; c < scores.size(); ++c) {
    const NodeId gold = mask.observed[static_cast<std::size_t>(c)];
    if (gold == kNoParent) continue;
    const double z = log_partition(scores, c);
    loss -= scores(gold, c) - z;
    if (!grad) continue;
    for (NodeId p = 0; p < scores.size(); ++p) {
      if (scores(p, c) != kNegInf) ds(p, c) = weight * std::exp(scores(p, c) - z);
    }
    ds(gold, c) -= weight;
  }
  if (grad) {
    MatrixXd de = biaffine_backward(enc.output, model.params.biaffine, bi, ds, grad->biaffine);
    encoder_backward(model, nodes, enc, std::move(de), grad->encoder);
  }
  return loss;
}

}  // namespace topdep
