#include "cmil/models.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "cmil/numeric.hpp"

namespace cmil {

std::string to_string(Order order) {
  return order == Order::prediction ? "prediction" : "embedding";
}

std::string to_string(Pooling pooling) {
  switch (pooling) {
    case Pooling::max: return "max";
    case Pooling::mean: return "mean";
    case Pooling::abmil: return "abmil";
    case Pooling::smooth_mean: return "smooth_mean";
    case Pooling::smooth_max: return "smooth_max";
    case Pooling::logsumexp: return "logsumexp";
    case Pooling::self_attention: return "self_attention";
  }
  return "unknown";
}

Order parse_order(const std::string& name) {
  if (name == "prediction" || name == "prediction-aggregation") return Order::prediction;
  if (name == "embedding" || name == "embedding-aggregation") return Order::embedding;
  throw std::invalid_argument("unknown aggregation order '" + name + "'");
}

Pooling parse_pooling(const std::string& name) {
  for (Pooling p : {Pooling::max, Pooling::mean, Pooling::abmil, Pooling::smooth_mean,
                    Pooling::smooth_max, Pooling::logsumexp, Pooling::self_attention}) {
    if (name == to_string(p)) return p;
  }
  if (name == "smooth+mean") return Pooling::smooth_mean;
  if (name == "smooth+max") return Pooling::smooth_max;
  if (name == "self-attention") return Pooling::self_attention;
  throw std::invalid_argument("unknown pooling '" + name + "'");
}

namespace {

bool is_smooth(Pooling p) { return p == Pooling::smooth_mean || p == Pooling::smooth_max; }

Pooling base_pooling(Pooling p) {
  if (p == Pooling::smooth_mean) return Pooling::mean;
  if (p == Pooling::smooth_max) return Pooling::max;
  return p;
}

[[noreturn]] void bad_spec(const std::string& what) {
  throw std::invalid_argument("ModelSpec: " + what);
}

}  // namespace

void ModelSpec::validate(int num_features) const {
  const Eigen::Index M = num_features;
  if (kernel && (kernel->size() < 1 || kernel->size() % 2 == 0))
    bad_spec("convolution kernel must have odd length");

  if (is_smooth(pooling) != alpha.has_value()) bad_spec("alpha is required iff pooling smooths");
  if (alpha && !(*alpha >= 0.0 && *alpha < 1.0)) bad_spec("alpha must lie in [0, 1)");

  if ((pooling == Pooling::abmil) != abmil.has_value())
    bad_spec("ABMIL parameters are required iff pooling is abmil");
  if (abmil && (abmil->U.rows() < 1 || abmil->U.cols() != M || abmil->u.size() != abmil->U.rows()))
    bad_spec("ABMIL parameter shapes do not match the feature count");

  if ((pooling == Pooling::self_attention) != attention.has_value())
    bad_spec("attention parameters are required iff pooling is self_attention");
  Eigen::Index scorer_dim = M;
  if (attention) {
    if (order != Order::embedding) bad_spec("self_attention needs embedding aggregation");
    const Eigen::Index d = attention->W_Q.rows();
    if (d < 1 || attention->W_Q.cols() != M || attention->W_K.rows() != d ||
        attention->W_K.cols() != M || attention->W_V.rows() != d || attention->W_V.cols() != M ||
        attention->class_token.size() != M)
      bad_spec("attention parameter shapes do not match the feature count");
    scorer_dim = d;
  }
  if (scorer.w.size() != scorer_dim) bad_spec("scorer weight has the wrong length");
  if (!scorer.w.allFinite() || !std::isfinite(scorer.b)) bad_spec("scorer must be finite");
}

Eigen::VectorXd window_kernel(int window) {
  if (window < 1) throw std::invalid_argument("window_kernel: window must be >= 1");
  const int len = window % 2 == 1 ? window : window + 1;
  Eigen::VectorXd k = Eigen::VectorXd::Zero(len);
  k.head(window).setOnes();
  return k;
}

ModelSpec handcrafted_model(const GenParams& params, const PipelineKind& kind,
                            const HandcraftOptions& opts) {
  params.validate();
  if (kind.pooling == Pooling::self_attention && kind.order != Order::embedding)
    throw std::invalid_argument("handcrafted_model: self_attention needs embedding aggregation");
  const double sharpness =
      opts.attention_sharpness.value_or(params.delta / (params.sigma * params.sigma));
  if (!(opts.epsilon > 0.0) || !(sharpness >= 0.0) || !std::isfinite(sharpness))
    throw std::invalid_argument("handcrafted_model: need epsilon > 0 and finite sharpness >= 0");

  const int M = static_cast<int>(params.num_features);
  const int K = static_cast<int>(params.num_discriminative);
  const int R = static_cast<int>(params.window);

  ModelSpec spec;
  spec.name = kind.context ? "handcrafted-context" : "handcrafted";
  spec.order = kind.order;
  spec.pooling = kind.pooling;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(M);
  w.head(K).setOnes();
  double bias = -K * (params.mu + params.delta / 2.0);
  if (kind.context) {
    spec.kernel = window_kernel(R);
    bias *= R;
  }
  spec.scorer = {w, bias};

  if (is_smooth(kind.pooling)) spec.alpha = opts.alpha;

  if (kind.pooling == Pooling::abmil) {
    // tanh(eps * s) ~ eps * s for small eps, so u^T tanh(U h) ~ sharpness * w^T h.
    ABMILParams<double> p;
    p.U = opts.epsilon * w.transpose();
    p.u = Eigen::VectorXd::Constant(1, sharpness / opts.epsilon);
    spec.abmil = std::move(p);
  }

  if (kind.pooling == Pooling::self_attention) {
    // One-dimensional head. Keys and values are the linear score w^T h; the
    // class token's query is `sharpness`, and its own key is pushed far
    // below every instance so it takes no attention mass.
    constexpr double kTokenDepth = 100.0;
    AttnParams<double> p;
    p.class_token = -kTokenDepth * w;
    p.W_K = w.transpose();
    p.W_V = w.transpose();
    p.W_Q = (sharpness / (-kTokenDepth * K)) * w.transpose();
    spec.attention = std::move(p);
    spec.scorer.w = Eigen::VectorXd::Ones(1);
  }
  spec.validate(M);
  return spec;
}

// ---------------------------------------------------------------------------
// Per-bag evaluation

namespace {

Eigen::MatrixXd instance_matrix(const ModelSpec& spec, const Bag& bag) {
  Eigen::MatrixXd x = bag.features.cast<double>();
  if (spec.kernel) return conv_over_instances(x, *spec.kernel);
  return x;
}

// L * v for the chain-graph Laplacian, applied column-wise.
Eigen::MatrixXd chain_laplacian_times(const Eigen::MatrixXd& v) {
  const Eigen::Index S = v.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(S, v.cols());
  for (Eigen::Index j = 0; j + 1 < S; ++j) {
    const Eigen::RowVectorXd diff = v.row(j) - v.row(j + 1);
    out.row(j) += diff;
    out.row(j + 1) -= diff;
  }
  return out;
}

struct BagResult {
  double log_odds = 0.0;
  double loss = 0.0;
};

double bce_from_logit(double t, int label) { return label == 1 ? softplus(-t) : softplus(t); }

// Prediction order. `x` holds instance logits w^T h_j + b. When `grad_x` is
// given it receives dLoss/dx and the alpha derivative is added to
// `grad_alpha`.
BagResult prediction_bag(const ModelSpec& spec, const Eigen::VectorXd& x, int label,
                         Eigen::VectorXd* grad_x, double* grad_alpha) {
  const Eigen::Index S = x.size();
  const bool smoothed = is_smooth(spec.pooling);
  const double alpha = smoothed ? *spec.alpha : 0.0;
  const Eigen::VectorXd l = smoothed ? Eigen::VectorXd(solve_chain_system(alpha, (1.0 - alpha) * x)) : x;

  BagResult r;
  Eigen::VectorXd g;  // dLoss/dl
  if (grad_x) g = Eigen::VectorXd::Zero(S);

  switch (base_pooling(spec.pooling)) {
    case Pooling::max: {
      Eigen::Index top = 0;
      for (Eigen::Index j = 1; j < S; ++j)
        if (l(j) > l(top)) top = j;
      const double t = l(top);
      r.log_odds = t;
      r.loss = bce_from_logit(t, label);
      if (grad_x) g(top) = sigmoid(t) - label;
      break;
    }
    case Pooling::logsumexp: {
      const double t = log_mean_exp(l);
      r.log_odds = t;
      r.loss = bce_from_logit(t, label);
      if (grad_x) g = (sigmoid(t) - label) * softmax(l);
      break;
    }
    case Pooling::mean: {
      const Eigen::ArrayXd log_sig = l.unaryExpr([](double v) { return log_sigmoid(v); }).array();
      const Eigen::ArrayXd log_sig_neg = l.unaryExpr([](double v) { return log_sigmoid(-v); }).array();
      const double log_p = log_mean_exp(log_sig.matrix());
      const double log_q = log_mean_exp(log_sig_neg.matrix());
      r.log_odds = log_p - log_q;
      r.loss = label == 1 ? -log_p : -log_q;
      if (grad_x) {
        // dp/dl_j = sig_j (1 - sig_j) / S.
        const double log_s = std::log(static_cast<double>(S));
        const Eigen::ArrayXd log_dp = log_sig + log_sig_neg - log_s;
        g = label == 1 ? Eigen::VectorXd(-(log_dp - log_p).exp().matrix())
                       : Eigen::VectorXd((log_dp - log_q).exp().matrix());
      }
      break;
    }
    default:
      throw std::invalid_argument("prediction_bag: pooling is not in the linear family");
  }

  if (grad_x) {
    if (smoothed) {
      // l = A^{-1} (1 - alpha) x with A = alpha L + (1 - alpha) I symmetric.
      const Eigen::VectorXd adj = solve_chain_system(alpha, g);
      *grad_x = (1.0 - alpha) * adj;
      const Eigen::VectorXd dl_dalpha_rhs = l - x - chain_laplacian_times(l);
      *grad_alpha += adj.dot(dl_dalpha_rhs);
    } else {
      *grad_x = std::move(g);
    }
  }
  return r;
}

// Embedding order with max / mean / logsumexp (optionally smoothed) pooling.
// Gradients are accumulated into grad_w / grad_b / grad_alpha.
BagResult embedding_bag(const ModelSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& X,
                        int label, Eigen::VectorXd* grad_w, double* grad_b, double* grad_alpha) {
  const bool smoothed = is_smooth(spec.pooling);
  const double alpha = smoothed ? *spec.alpha : 0.0;
  Eigen::MatrixXd g;
  if (smoothed) g = solve_chain_system(alpha, (1.0 - alpha) * X);
  const Eigen::Ref<const Eigen::MatrixXd> h = smoothed ? Eigen::Ref<const Eigen::MatrixXd>(g) : X;

  Eigen::VectorXd z(h.cols());
  std::vector<Eigen::Index> arg;
  switch (base_pooling(spec.pooling)) {
    case Pooling::max:
      arg.resize(static_cast<std::size_t>(h.cols()));
      for (Eigen::Index m = 0; m < h.cols(); ++m) {
        Eigen::Index top = 0;
        for (Eigen::Index j = 1; j < h.rows(); ++j)
          if (h(j, m) > h(top, m)) top = j;
        arg[static_cast<std::size_t>(m)] = top;
        z(m) = h(top, m);
      }
      break;
    case Pooling::mean: z = mean_pool(h); break;
    case Pooling::logsumexp: z = logsumexp_pool(h); break;
    default: throw std::invalid_argument("embedding_bag: pooling is not in the linear family");
  }

  const double t = spec.scorer.w.dot(z) + spec.scorer.b;
  BagResult r{t, bce_from_logit(t, label)};
  if (grad_w) {
    const double d = sigmoid(t) - label;
    *grad_w += d * z;
    *grad_b += d;
    if (spec.pooling == Pooling::smooth_max) {
      // dg/dalpha = A^{-1} (g - h - L g), read at the argmax rows.
      const Eigen::MatrixXd dg = solve_chain_system(alpha, g - X - chain_laplacian_times(g));
      double dz = 0.0;
      for (Eigen::Index m = 0; m < h.cols(); ++m)
        dz += spec.scorer.w(m) * dg(arg[static_cast<std::size_t>(m)], m);
      *grad_alpha += d * dz;
    }
    // smooth_mean: the column means of g equal those of h for every alpha.
  }
  return r;
}

double log_odds_from_mixture(const Eigen::VectorXd& weights, const Eigen::VectorXd& logits) {
  const Eigen::ArrayXd log_w = weights.array().log();
  const Eigen::VectorXd lp = (log_w + logits.unaryExpr([](double v) { return log_sigmoid(v); }).array()).matrix();
  const Eigen::VectorXd lq = (log_w + logits.unaryExpr([](double v) { return log_sigmoid(-v); }).array()).matrix();
  return log_sum_exp(lp) - log_sum_exp(lq);
}

}  // namespace

double forward_log_odds(const ModelSpec& spec, const Bag& bag) {
  spec.validate(bag.num_features());
  const Eigen::MatrixXd X = instance_matrix(spec, bag);
  const auto& sc = spec.scorer;

  if (spec.order == Order::prediction) {
    const Eigen::VectorXd logits = (X * sc.w).array() + sc.b;
    if (spec.pooling == Pooling::abmil)
      return log_odds_from_mixture(abmil_weights(X, *spec.abmil), logits);
    return prediction_bag(spec, logits, bag.label, nullptr, nullptr).log_odds;
  }

  switch (spec.pooling) {
    case Pooling::abmil: return sc.w.dot(abmil_pool(X, *spec.abmil).pooled) + sc.b;
    case Pooling::self_attention:
      return sc.w.dot(self_attention_forward(X, *spec.attention).class_output) + sc.b;
    default: return embedding_bag(spec, X, bag.label, nullptr, nullptr, nullptr).log_odds;
  }
}

Eigen::MatrixXd attention_matrix(const ModelSpec& spec, const Bag& bag) {
  spec.validate(bag.num_features());
  const Eigen::MatrixXd X = instance_matrix(spec, bag);
  switch (spec.pooling) {
    case Pooling::abmil: return abmil_weights(X, *spec.abmil).transpose();
    case Pooling::self_attention: return self_attention_forward(X, *spec.attention).attention;
    default: throw std::invalid_argument("attention_matrix: " + to_string(spec.pooling) + " has no attention");
  }
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  const auto old = out.precision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
  out.precision(old);
}

double forward(const ModelSpec& spec, const Bag& bag) { return sigmoid(forward_log_odds(spec, bag)); }

ScoredSet score_model(const ModelSpec& spec, const Dataset& ds) {
  ScoredSet out;
  out.labels.reserve(ds.size());
  out.scores.reserve(ds.size());
  for (const Bag& bag : ds.bags) {
    out.labels.push_back(bag.label);
    out.scores.push_back(forward_log_odds(spec, bag));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batched loss for the linear family

bool is_trainable(const ModelSpec& spec) {
  switch (spec.pooling) {
    case Pooling::max:
    case Pooling::mean:
    case Pooling::logsumexp:
    case Pooling::smooth_mean:
    case Pooling::smooth_max: return true;
    default: return false;
  }
}

namespace {

void require_trainable(const ModelSpec& spec) {
  if (!is_trainable(spec))
    throw std::invalid_argument("pooling '" + to_string(spec.pooling) +
                                "' is outside the trainable linear family");
}

struct PreparedBatch {
  Eigen::MatrixXd X;  // stacked instance embeddings, kernel applied
  std::vector<Eigen::Index> offsets{0};
  std::vector<int> labels;
  /// Embedding order only: pooled vectors (one row per bag) when pooling
  /// does not depend on trained parameters.
  std::optional<Eigen::MatrixXd> pooled;

  std::size_t size() const { return labels.size(); }
  Eigen::Index rows_of(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

PreparedBatch prepare(const ModelSpec& spec, std::span<const Bag> bags, bool learn_alpha) {
  PreparedBatch batch;
  Eigen::Index total = 0;
  for (const Bag& b : bags) {
    if (b.num_features() != bags.front().num_features())
      throw std::invalid_argument("batch bags disagree on the feature count");
    total += b.num_instances();
  }
  const Eigen::Index M = bags.empty() ? 0 : bags.front().num_features();

  const bool cache = spec.order == Order::embedding &&
                     (spec.pooling != Pooling::smooth_max || !learn_alpha);
  if (cache) {
    batch.pooled = Eigen::MatrixXd(static_cast<Eigen::Index>(bags.size()), M);
  } else {
    batch.X.resize(total, M);
  }

  Eigen::Index row = 0;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const Eigen::MatrixXd x = instance_matrix(spec, bags[i]);
    if (cache) {
      Eigen::MatrixXd h = is_smooth(spec.pooling) ? smooth(x, SmoothConfig{*spec.alpha, {}}) : x;
      switch (base_pooling(spec.pooling)) {
        case Pooling::max: batch.pooled->row(static_cast<Eigen::Index>(i)) = max_pool(h); break;
        case Pooling::mean: batch.pooled->row(static_cast<Eigen::Index>(i)) = mean_pool(h); break;
        default: batch.pooled->row(static_cast<Eigen::Index>(i)) = logsumexp_pool(h); break;
      }
    } else {
      batch.X.middleRows(row, x.rows()) = x;
    }
    row += x.rows();
    batch.offsets.push_back(row);
    batch.labels.push_back(bags[i].label);
  }
  return batch;
}

struct BatchEval {
  double loss = 0.0;
  Gradient grad;
  std::vector<double> log_odds;
};

BatchEval evaluate(const ModelSpec& spec, const PreparedBatch& batch, double weight_decay,
                   bool need_grad) {
  const std::size_t n = batch.size();
  const auto& w = spec.scorer.w;
  const double b = spec.scorer.b;

  BatchEval out;
  out.log_odds.resize(n);
  Eigen::VectorXd grad_w = Eigen::VectorXd::Zero(w.size());
  double grad_b = 0.0;
  double grad_alpha = 0.0;
  bool alpha_known = is_smooth(spec.pooling);
  double loss_sum = 0.0;

  if (batch.pooled) {
    const Eigen::VectorXd t = (*batch.pooled * w).array() + b;
    Eigen::VectorXd d(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      out.log_odds[i] = t(k);
      loss_sum += bce_from_logit(t(k), batch.labels[i]);
      d(k) = sigmoid(t(k)) - batch.labels[i];
    }
    if (need_grad) {
      grad_w = batch.pooled->transpose() * d;
      grad_b = d.sum();
    }
    // Cached smooth_max does not track the alpha derivative.
    alpha_known = spec.pooling == Pooling::smooth_mean;
  } else if (spec.order == Order::prediction) {
    const Eigen::VectorXd x_all = (batch.X * w).array() + b;
    Eigen::VectorXd gx_all;
    if (need_grad) gx_all.resize(x_all.size());
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Index first = batch.offsets[i];
      const Eigen::Index len = batch.rows_of(i);
      const Eigen::VectorXd x = x_all.segment(first, len);
      Eigen::VectorXd gx;
      const BagResult r = prediction_bag(spec, x, batch.labels[i], need_grad ? &gx : nullptr,
                                         need_grad ? &grad_alpha : nullptr);
      out.log_odds[i] = r.log_odds;
      loss_sum += r.loss;
      if (need_grad) gx_all.segment(first, len) = gx;
    }
    if (need_grad) {
      grad_w = batch.X.transpose() * gx_all;
      grad_b = gx_all.sum();
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const BagResult r = embedding_bag(spec, batch.X.middleRows(batch.offsets[i], batch.rows_of(i)),
                                        batch.labels[i], need_grad ? &grad_w : nullptr, &grad_b,
                                        &grad_alpha);
      out.log_odds[i] = r.log_odds;
      loss_sum += r.loss;
    }
  }

  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  out.loss = loss_sum * inv_n + 0.5 * weight_decay * w.squaredNorm();
  if (need_grad) {
    out.grad.w = grad_w * inv_n + weight_decay * w;
    out.grad.b = grad_b * inv_n;
    if (alpha_known) out.grad.alpha = grad_alpha * inv_n;
  }
  return out;
}

TrainResult train_prepared(const ModelSpec& init, const PreparedBatch& train_batch,
                           const PreparedBatch& val_batch, const TrainConfig& cfg) {
  ModelSpec spec = init;
  auto val_auroc = [&](const ModelSpec& s) {
    ScoredSet scored{val_batch.labels, evaluate(s, val_batch, 0.0, false).log_odds};
    return auroc(scored);
  };

  TrainResult result;
  result.model = spec;
  result.best_val_auroc = val_auroc(spec);
  result.best_epoch = 0;
  result.log.push_back({0, evaluate(spec, train_batch, cfg.weight_decay, false).loss,
                        result.best_val_auroc});

  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const BatchEval step = evaluate(spec, train_batch, cfg.weight_decay, true);
    if (!std::isfinite(step.loss) || !step.grad.w.allFinite()) break;
    spec.scorer.w -= cfg.learning_rate * step.grad.w;
    spec.scorer.b -= cfg.learning_rate * step.grad.b;
    if (spec.alpha && cfg.learn_alpha && step.grad.alpha) {
      spec.alpha = std::clamp(*spec.alpha - cfg.learning_rate * *step.grad.alpha, 0.0, 1.0 - 1e-6);
    }

    const double auc = val_auroc(spec);
    result.log.push_back({epoch, step.loss, auc});
    result.epochs_run = epoch;
    if (auc > result.best_val_auroc) {
      result.best_val_auroc = auc;
      result.best_epoch = epoch;
      result.model = spec;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

void check_train_inputs(const ModelSpec& init, const Dataset& train_set, const Dataset& val_set,
                        const TrainConfig& cfg) {
  require_trainable(init);
  if (train_set.bags.empty()) throw std::invalid_argument("train: empty training set");
  if (val_set.bags.empty()) throw std::invalid_argument("train: empty validation set");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be > 0");
  if (!(cfg.weight_decay >= 0.0)) throw std::invalid_argument("train: weight decay must be >= 0");
  if (cfg.max_epochs < 0 || cfg.patience < 1) throw std::invalid_argument("train: bad epoch limits");
  init.validate(train_set.bags.front().num_features());
}

}  // namespace

LossAndGrad loss_and_grad(const ModelSpec& spec, std::span<const Bag> batch, double weight_decay) {
  require_trainable(spec);
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  spec.validate(batch.front().num_features());
  const PreparedBatch prepared = prepare(spec, batch, /*learn_alpha=*/true);
  BatchEval e = evaluate(spec, prepared, weight_decay, true);
  return {e.loss, std::move(e.grad)};
}

TrainResult train(const ModelSpec& init, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg) {
  check_train_inputs(init, train_set, val_set, cfg);
  const PreparedBatch tr = prepare(init, train_set.bags, cfg.learn_alpha);
  const PreparedBatch va = prepare(init, val_set.bags, cfg.learn_alpha);
  return train_prepared(init, tr, va, cfg);
}

ModelSpec init_trainable(const GenParams& params, const PipelineKind& kind, std::uint64_t seed) {
  params.validate();
  ModelSpec spec;
  spec.name = kind.context ? "trained-context" : "trained";
  spec.order = kind.order;
  spec.pooling = kind.pooling;
  require_trainable(spec);
  const int M = static_cast<int>(params.num_features);
  std::mt19937_64 rng(mix64(seed));
  std::normal_distribution<double> init(0.0, 0.01);
  spec.scorer.w = Eigen::VectorXd::NullaryExpr(M, [&] { return init(rng); });
  spec.scorer.b = 0.0;
  if (is_smooth(kind.pooling)) spec.alpha = 0.5;
  if (kind.context) spec.kernel = window_kernel(static_cast<int>(params.window));
  spec.validate(M);
  return spec;
}

GridSearchResult grid_search(const ModelSpec& init, const Dataset& train_set,
                             const Dataset& val_set, const std::vector<double>& learning_rates,
                             const std::vector<double>& weight_decays, const TrainConfig& base,
                             unsigned jobs) {
  if (learning_rates.empty() || weight_decays.empty())
    throw std::invalid_argument("grid_search: empty grid");
  check_train_inputs(init, train_set, val_set, base);
  for (double lr : learning_rates)
    if (!(lr > 0.0)) throw std::invalid_argument("grid_search: learning rates must be > 0");
  for (double wd : weight_decays)
    if (!(wd >= 0.0)) throw std::invalid_argument("grid_search: weight decays must be >= 0");

  const PreparedBatch tr = prepare(init, train_set.bags, base.learn_alpha);
  const PreparedBatch va = prepare(init, val_set.bags, base.learn_alpha);

  GridSearchResult out;
  for (double lr : learning_rates)
    for (double wd : weight_decays) out.runs.push_back({lr, wd, {}});

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < out.runs.size(); k = next++) {
      TrainConfig cfg = base;
      cfg.learning_rate = out.runs[k].learning_rate;
      cfg.weight_decay = out.runs[k].weight_decay;
      out.runs[k].result = train_prepared(init, tr, va, cfg);
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(out.runs.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t k = 1; k < out.runs.size(); ++k)
    if (out.runs[k].result.best_val_auroc > out.runs[out.best].result.best_val_auroc) out.best = k;
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

using json = nlohmann::ordered_json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols)
      throw std::invalid_argument("model json: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string model_to_json(const ModelSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["order"] = to_string(spec.order);
  j["pooling"] = to_string(spec.pooling);
  j["w"] = vector_to_json(spec.scorer.w);
  j["b"] = spec.scorer.b;
  if (spec.alpha) j["alpha"] = *spec.alpha;
  if (spec.kernel) j["kernel"] = vector_to_json(*spec.kernel);
  if (spec.abmil) j["abmil"] = {{"U", matrix_to_json(spec.abmil->U)}, {"u", vector_to_json(spec.abmil->u)}};
  if (spec.attention) {
    j["attention"] = {{"W_Q", matrix_to_json(spec.attention->W_Q)},
                      {"W_K", matrix_to_json(spec.attention->W_K)},
                      {"W_V", matrix_to_json(spec.attention->W_V)},
                      {"class_token", vector_to_json(spec.attention->class_token)}};
  }
  return j.dump(2);
}

ModelSpec model_from_json(const std::string& text) {
  const json j = json::parse(text);
  ModelSpec spec;
  spec.name = j.value("name", std::string{});
  spec.order = parse_order(j.at("order").get<std::string>());
  spec.pooling = parse_pooling(j.at("pooling").get<std::string>());
  spec.scorer.w = vector_from_json(j.at("w"));
  spec.scorer.b = j.at("b").get<double>();
  if (j.contains("alpha")) spec.alpha = j["alpha"].get<double>();
  if (j.contains("kernel")) spec.kernel = vector_from_json(j["kernel"]);
  if (j.contains("abmil")) {
    spec.abmil = ABMILParams<double>{matrix_from_json(j["abmil"].at("U")),
                                     vector_from_json(j["abmil"].at("u"))};
  }
  if (j.contains("attention")) {
    const json& a = j["attention"];
    spec.attention = AttnParams<double>{matrix_from_json(a.at("W_Q")), matrix_from_json(a.at("W_K")),
                                        matrix_from_json(a.at("W_V")),
                                        vector_from_json(a.at("class_token"))};
  }
  const Eigen::Index M = spec.attention ? spec.attention->W_Q.cols() : spec.scorer.w.size();
  spec.validate(static_cast<int>(M));
  return spec;
}

void write_training_log_csv(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,train_loss,val_auroc\n";
  const auto old = out.precision(17);
  for (const auto& e : log) out << e.epoch << ',' << e.train_loss << ',' << e.val_auroc << '\n';
  out.precision(old);
}

}  // namespace cmil
