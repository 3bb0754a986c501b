#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nfm/checkpoint.hpp"
#include "nfm/data.hpp"
#include "nfm/fm.hpp"
#include "nfm/metrics.hpp"
#include "nfm/nfm.hpp"
#include "nfm/random.hpp"

namespace nfm {

// Hyperparameters for one training run (both FM and NFM read from this).
struct TrainConfig {
  double learning_rate = 0.02;
  Index batch_size = 128;
  int max_epochs = 100;
  int early_stop_patience = 4;          // consecutive epochs of rising valid RMSE
  std::vector<double> dropout_ratios;   // pooling layer + one per hidden layer; empty = no dropout
  double l2_embedding = 0.0;            // weight on ||V||^2
  bool bn_enabled = false;
  Activation activation = Activation::relu;
  Index factors = 64;
  std::vector<Index> layer_dims;
  Pooling pooling = Pooling::bi_interaction;
  std::uint64_t seed = 1;
  std::string pretrain;                 // optional FM checkpoint path (NFM only)
  double adagrad_epsilon = 1e-8;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;
  bool verbose = false;                 // progress lines on stderr
};

struct EpochReport {
  int epoch = 0;  // 1-based
  double train_rmse = 0;
  double valid_rmse = 0;
  double wall_seconds = 0;
};

// CSV rows: epoch,train_rmse,valid_rmse,seconds
inline void write_epoch_csv(std::ostream& out, const std::vector<EpochReport>& reports) {
  out << "epoch,train_rmse,valid_rmse,seconds\n";
  char line[128];
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.3f\n", r.epoch, r.train_rmse, r.valid_rmse,
                  r.wall_seconds);
    out << line;
  }
}

class TrainError : public std::runtime_error {
 public:
  TrainError(int epoch, std::size_t batch, const std::string& what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                           ": " + what) {}
};

// Stops after `patience` consecutive strictly-rising validation epochs,
// each compared to its predecessor.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw std::invalid_argument("early-stop patience must be >= 1");
  }

  // Returns true when training should halt after this epoch.
  bool observe(double valid_rmse) {
    ++epoch_;
    if (valid_rmse < best_) {
      best_ = valid_rmse;
      best_epoch_ = epoch_;
    }
    rises_ = (valid_rmse > last_) ? rises_ + 1 : 0;
    last_ = valid_rmse;
    return rises_ >= patience_;
  }

  int best_epoch() const { return best_epoch_; }
  double best_rmse() const { return best_; }

 private:
  int patience_;
  int epoch_ = 0;
  int rises_ = 0;
  double last_ = std::numeric_limits<double>::infinity();
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
};

template <class Scalar>
Scalar squared_loss(const std::vector<Scalar>& predictions, const std::vector<Scalar>& targets) {
  if (predictions.empty() || predictions.size() != targets.size()) {
    throw std::invalid_argument("squared_loss: inputs must be non-empty and equal length");
  }
  Scalar sum = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (!std::isfinite(static_cast<double>(predictions[i])) ||
        !std::isfinite(static_cast<double>(targets[i]))) {
      throw std::invalid_argument("squared_loss: non-finite input");
    }
    const Scalar r = predictions[i] - targets[i];
    sum += r * r;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Adagrad
// ---------------------------------------------------------------------------

template <class Scalar>
struct FmAdagradState {
  Scalar bias = 0;
  Vector<Scalar> linear;
  Matrix<Scalar> embeddings;
};

template <class Scalar>
FmAdagradState<Scalar> make_adagrad_state(const FmParams<Scalar>& m) {
  return {Scalar(0), Vector<Scalar>::Zero(m.num_features()),
          Matrix<Scalar>::Zero(m.num_features(), m.num_factors())};
}

template <class Scalar>
struct NfmAdagradState {
  FmAdagradState<Scalar> fm;
  std::vector<LayerGrad<Scalar>> hidden;
  Vector<Scalar> prediction;
  std::vector<BnGrad<Scalar>> bn;
};

template <class Scalar>
NfmAdagradState<Scalar> make_adagrad_state(const NfmParams<Scalar>& p) {
  NfmAdagradState<Scalar> s;
  s.fm = make_adagrad_state(p.fm);
  for (const auto& layer : p.hidden) {
    s.hidden.push_back({Matrix<Scalar>::Zero(layer.weight.rows(), layer.weight.cols()),
                        Vector<Scalar>::Zero(layer.bias.size())});
  }
  s.prediction = Vector<Scalar>::Zero(p.prediction.size());
  if (p.bn_enabled) {
    for (const auto& bn : p.bn) {
      s.bn.push_back({Vector<Scalar>::Zero(bn.dim()), Vector<Scalar>::Zero(bn.dim())});
    }
  }
  return s;
}

namespace detail {

template <class Scalar, class P, class G, class S>
void adagrad_apply(P&& param, const G& grad, S&& state, Scalar lr, Scalar eps) {
  state.array() += grad.array().square();
  param.array() -= lr * grad.array() / (state.array().sqrt() + eps);
}

template <class Scalar>
void adagrad_apply_scalar(Scalar& param, Scalar grad, Scalar& state, Scalar lr, Scalar eps) {
  state += grad * grad;
  param -= lr * grad / (std::sqrt(state) + eps);
}

}  // namespace detail

// One Adagrad update from an accumulated (batch) gradient. Embedding-row
// gradients are augmented with the 2*lambda*v weight-decay term; parameters
// not present in the sparse gradient are untouched.
template <class Scalar>
void adagrad_step(FmParams<Scalar>& m, const FmGradients<Scalar>& g, FmAdagradState<Scalar>& state,
                  Scalar lr, Scalar l2_embedding, Scalar eps = Scalar(1e-8)) {
  if (state.linear.size() != m.num_features() || state.embeddings.cols() != m.num_factors()) {
    throw std::invalid_argument("adagrad_step: state does not match parameter shapes");
  }
  detail::adagrad_apply_scalar(m.bias, g.bias, state.bias, lr, eps);
  for (std::size_t i = 0; i < g.active.size(); ++i) {
    const Index idx = g.active[i];
    if (idx < 0 || idx >= m.num_features()) {
      throw std::invalid_argument("adagrad_step: gradient index out of range");
    }
    detail::adagrad_apply_scalar(m.linear[idx], g.linear[static_cast<Index>(i)],
                                 state.linear[idx], lr, eps);
    const auto row_grad = (g.embeddings.row(static_cast<Index>(i)) +
                           Scalar(2) * l2_embedding * m.embeddings.row(idx))
                              .eval();
    detail::adagrad_apply<Scalar>(m.embeddings.row(idx), row_grad, state.embeddings.row(idx), lr,
                                  eps);
  }
}

template <class Scalar>
void adagrad_step(NfmParams<Scalar>& p, const NfmGradients<Scalar>& g,
                  NfmAdagradState<Scalar>& state, Scalar lr, Scalar l2_embedding,
                  Scalar eps = Scalar(1e-8)) {
  if (g.hidden.size() != p.hidden.size() || state.hidden.size() != p.hidden.size()) {
    throw std::invalid_argument("adagrad_step: layer count mismatch");
  }
  adagrad_step(p.fm, g.fm, state.fm, lr, l2_embedding, eps);
  for (std::size_t l = 0; l < p.hidden.size(); ++l) {
    if (g.hidden[l].weight.rows() != p.hidden[l].weight.rows() ||
        g.hidden[l].weight.cols() != p.hidden[l].weight.cols()) {
      throw std::invalid_argument("adagrad_step: layer gradient shape mismatch");
    }
    detail::adagrad_apply<Scalar>(p.hidden[l].weight, g.hidden[l].weight, state.hidden[l].weight,
                                  lr, eps);
    detail::adagrad_apply<Scalar>(p.hidden[l].bias, g.hidden[l].bias, state.hidden[l].bias, lr,
                                  eps);
  }
  if (g.prediction.size() != p.prediction.size()) {
    throw std::invalid_argument("adagrad_step: prediction gradient shape mismatch");
  }
  detail::adagrad_apply<Scalar>(p.prediction, g.prediction, state.prediction, lr, eps);
  if (p.bn_enabled) {
    if (g.bn.size() != p.bn.size()) {
      throw std::invalid_argument("adagrad_step: batch-norm gradient count mismatch");
    }
    for (std::size_t s = 0; s < p.bn.size(); ++s) {
      detail::adagrad_apply<Scalar>(p.bn[s].gamma, g.bn[s].gamma, state.bn[s].gamma, lr, eps);
      detail::adagrad_apply<Scalar>(p.bn[s].beta, g.bn[s].beta, state.bn[s].beta, lr, eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Batch gradient accumulation (sum over the batch, sparse in the FM part)
// ---------------------------------------------------------------------------

namespace detail {

template <class Scalar>
class SparseGradAccumulator {
 public:
  SparseGradAccumulator(Index num_features, Index num_factors)
      : linear_(Vector<Scalar>::Zero(num_features)),
        embeddings_(Matrix<Scalar>::Zero(num_features, num_factors)),
        touched_flag_(static_cast<std::size_t>(num_features), 0) {}

  void add(const FmGradients<Scalar>& g, Scalar weight) {
    bias_ += weight * g.bias;
    for (std::size_t i = 0; i < g.active.size(); ++i) {
      const Index idx = g.active[i];
      if (!touched_flag_[static_cast<std::size_t>(idx)]) {
        touched_flag_[static_cast<std::size_t>(idx)] = 1;
        touched_.push_back(idx);
      }
      linear_[idx] += weight * g.linear[static_cast<Index>(i)];
      embeddings_.row(idx) += weight * g.embeddings.row(static_cast<Index>(i));
    }
  }

  // Drains the accumulated sum into a sparse gradient and resets.
  FmGradients<Scalar> take() {
    std::sort(touched_.begin(), touched_.end());
    FmGradients<Scalar> g;
    g.bias = bias_;
    g.active = touched_;
    g.linear.resize(static_cast<Index>(touched_.size()));
    g.embeddings.resize(static_cast<Index>(touched_.size()), embeddings_.cols());
    for (std::size_t i = 0; i < touched_.size(); ++i) {
      const Index idx = touched_[i];
      g.linear[static_cast<Index>(i)] = linear_[idx];
      g.embeddings.row(static_cast<Index>(i)) = embeddings_.row(idx);
      linear_[idx] = 0;
      embeddings_.row(idx).setZero();
      touched_flag_[static_cast<std::size_t>(idx)] = 0;
    }
    touched_.clear();
    bias_ = 0;
    return g;
  }

 private:
  Scalar bias_ = 0;
  Vector<Scalar> linear_;
  Matrix<Scalar> embeddings_;
  std::vector<Index> touched_;
  std::vector<char> touched_flag_;
};

inline void validate_config(const TrainConfig& c) {
  if (!(c.learning_rate > 0 && c.learning_rate <= 1)) {
    throw std::invalid_argument("learning_rate must lie in (0, 1]");
  }
  if (c.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (c.max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (c.early_stop_patience < 1) throw std::invalid_argument("early_stop_patience must be >= 1");
  if (c.factors < 1) throw std::invalid_argument("factors must be >= 1");
  if (c.l2_embedding < 0) throw std::invalid_argument("l2_embedding must be >= 0");
  if (c.adagrad_epsilon <= 0) throw std::invalid_argument("adagrad_epsilon must be > 0");
  if (!(c.bn_momentum > 0 && c.bn_momentum < 1)) {
    throw std::invalid_argument("bn_momentum must lie in (0, 1)");
  }
  if (c.bn_epsilon <= 0) throw std::invalid_argument("bn_epsilon must be > 0");
  for (double r : c.dropout_ratios) {
    if (!(r >= 0 && r < 1)) throw std::invalid_argument("dropout ratios must lie in [0, 1)");
  }
}

template <class Scalar>
void check_shared_features(const Dataset<Scalar>& train, const Dataset<Scalar>& valid) {
  if (train.num_features != valid.num_features) {
    throw std::invalid_argument("train and validation sets disagree on num_features");
  }
  if (train.instances.empty() || valid.instances.empty()) {
    throw std::invalid_argument("train and validation sets must be non-empty");
  }
}

constexpr std::uint64_t kShuffleStream = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

// ---------------------------------------------------------------------------
// FM training: mini-batch Adagrad on squared loss with L2 on embeddings only.
// Returns the parameters of the best-validation epoch.
// ---------------------------------------------------------------------------

template <class Scalar>
std::pair<FmParams<Scalar>, std::vector<EpochReport>> fm_train(const Dataset<Scalar>& train,
                                                               const Dataset<Scalar>& valid,
                                                               const TrainConfig& config) {
  detail::validate_config(config);
  detail::check_shared_features(train, valid);
  if (!config.pretrain.empty()) {
    throw std::invalid_argument("fm_train: pretraining applies to NFM only");
  }

  FmParams<Scalar> params = make_fm<Scalar>(train.num_features, config.factors, config.seed);
  FmAdagradState<Scalar> state = make_adagrad_state(params);
  detail::SparseGradAccumulator<Scalar> accum(train.num_features, config.factors);

  Rng rng(config.seed ^ detail::kShuffleStream);
  std::vector<std::size_t> order(train.instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<EpochReport> reports;
  EarlyStopping stopper(config.early_stop_patience);
  FmParams<Scalar> best = params;
  double best_rmse = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    const std::size_t num_batches =
        (order.size() + static_cast<std::size_t>(config.batch_size) - 1) /
        static_cast<std::size_t>(config.batch_size);
    for (std::size_t b = 0; b < num_batches; ++b) {
      const std::size_t lo = b * static_cast<std::size_t>(config.batch_size);
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(config.batch_size));
      Scalar batch_loss = 0;
      for (std::size_t i = lo; i < hi; ++i) {
        const auto& x = train.instances[order[i]];
        const auto [score, grads] = fm_score_and_gradients(params, x);
        const Scalar residual = score - x.target;
        batch_loss += residual * residual;
        accum.add(grads, Scalar(2) * residual);
      }
      if (!std::isfinite(static_cast<double>(batch_loss))) {
        throw TrainError(epoch, b, "non-finite loss");
      }
      adagrad_step(params, accum.take(), state, static_cast<Scalar>(config.learning_rate),
                   static_cast<Scalar>(config.l2_embedding),
                   static_cast<Scalar>(config.adagrad_epsilon));
    }

    EpochReport report;
    report.epoch = epoch;
    report.train_rmse = evaluate_rmse(params, train);
    report.valid_rmse = evaluate_rmse(params, valid);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    reports.push_back(report);
    if (config.verbose) {
      std::fprintf(stderr, "[fm] epoch %d train %.4f valid %.4f (%.1fs)\n", epoch,
                   report.train_rmse, report.valid_rmse, report.wall_seconds);
    }

    if (report.valid_rmse < best_rmse) {
      best_rmse = report.valid_rmse;
      best = params;
    }
    if (stopper.observe(report.valid_rmse)) break;
  }
  return {std::move(best), std::move(reports)};
}

// ---------------------------------------------------------------------------
// NFM training
// ---------------------------------------------------------------------------

// Copies the embedding matrix and the linear part of a trained FM into an NFM
// whose hidden stack keeps its fresh initialization.
template <class Scalar>
void pretrain_embeddings(NfmParams<Scalar>& p, const FmParams<Scalar>& checkpoint) {
  if (checkpoint.num_features() != p.num_features() ||
      checkpoint.num_factors() != p.num_factors()) {
    throw std::invalid_argument(
        "pretrain_embeddings: checkpoint dimensions (n=" +
        std::to_string(checkpoint.num_features()) + ", k=" +
        std::to_string(checkpoint.num_factors()) + ") do not match the model (n=" +
        std::to_string(p.num_features()) + ", k=" + std::to_string(p.num_factors()) + ")");
  }
  p.fm = checkpoint;
}

template <class Scalar>
std::pair<NfmParams<Scalar>, std::vector<EpochReport>> nfm_train(const Dataset<Scalar>& train,
                                                                 const Dataset<Scalar>& valid,
                                                                 const TrainConfig& config) {
  detail::validate_config(config);
  detail::check_shared_features(train, valid);

  NfmArchitecture arch;
  arch.num_factors = config.factors;
  arch.layer_dims = config.layer_dims;
  arch.activation = config.activation;
  arch.pooling = config.pooling;
  arch.bn_enabled = config.bn_enabled;
  arch.bn_momentum = config.bn_momentum;
  arch.bn_epsilon = config.bn_epsilon;
  if (arch.pooling == Pooling::concat) {
    arch.concat_fields = train.instances.front().nnz();
  }

  NfmParams<Scalar> params = make_nfm<Scalar>(train.num_features, arch, config.seed);
  if (!config.pretrain.empty()) {
    pretrain_embeddings(params, load_fm(config.pretrain));
  }
  const Index L = params.num_layers();

  std::vector<Scalar> ratios(config.dropout_ratios.begin(), config.dropout_ratios.end());
  if (ratios.empty()) ratios.assign(static_cast<std::size_t>(L) + 1, Scalar(0));
  if (static_cast<Index>(ratios.size()) != L + 1) {
    throw std::invalid_argument("dropout_ratios must have 1 + number-of-hidden-layers entries");
  }

  NfmAdagradState<Scalar> state = make_adagrad_state(params);
  detail::SparseGradAccumulator<Scalar> accum(train.num_features, config.factors);
  std::vector<LayerGrad<Scalar>> hidden_sum;
  for (const auto& layer : params.hidden) {
    hidden_sum.push_back({Matrix<Scalar>::Zero(layer.weight.rows(), layer.weight.cols()),
                          Vector<Scalar>::Zero(layer.bias.size())});
  }
  Vector<Scalar> prediction_sum = Vector<Scalar>::Zero(params.prediction.size());
  std::vector<BnGrad<Scalar>> bn_sum;
  if (params.bn_enabled) {
    for (const auto& bn : params.bn) {
      bn_sum.push_back({Vector<Scalar>::Zero(bn.dim()), Vector<Scalar>::Zero(bn.dim())});
    }
  }

  Rng rng(config.seed ^ detail::kShuffleStream);
  std::vector<std::size_t> order(train.instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<const SparseInstance<Scalar>*> batch;

  std::vector<EpochReport> reports;
  EarlyStopping stopper(config.early_stop_patience);
  NfmParams<Scalar> best = params;
  double best_rmse = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    std::size_t lo = 0;
    for (std::size_t b = 0; lo < order.size(); ++b, lo += batch.size()) {
      std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(config.batch_size));
      // A trailing singleton cannot be batch-normalized; fold it into this batch.
      if (params.bn_enabled && order.size() - hi == 1) hi = order.size();
      batch.clear();
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(&train.instances[order[i]]);

      std::vector<ForwardTrace<Scalar>> traces;
      try {
        traces = nfm_forward_batch(params, batch, Mode::train, ratios, rng);
      } catch (const std::runtime_error& e) {
        throw TrainError(epoch, b, e.what());
      }

      Scalar batch_loss = 0;
      for (std::size_t i = 0; i < traces.size(); ++i) {
        const Scalar residual = traces[i].score - batch[i]->target;
        batch_loss += residual * residual;
        const NfmGradients<Scalar> g = nfm_backward(params, traces[i], Scalar(2) * residual);
        accum.add(g.fm, Scalar(1));
        for (Index l = 0; l < L; ++l) {
          hidden_sum[l].weight += g.hidden[l].weight;
          hidden_sum[l].bias += g.hidden[l].bias;
        }
        prediction_sum += g.prediction;
        if (params.bn_enabled) {
          for (std::size_t s = 0; s < bn_sum.size(); ++s) {
            bn_sum[s].gamma += g.bn[s].gamma;
            bn_sum[s].beta += g.bn[s].beta;
          }
        }
      }
      if (!std::isfinite(static_cast<double>(batch_loss))) {
        throw TrainError(epoch, b, "non-finite loss");
      }

      NfmGradients<Scalar> total;
      total.fm = accum.take();
      total.hidden = hidden_sum;
      // A zero-layer network keeps h fixed at ones: a trainable h adds
      // nothing to NFM-0, its effect is absorbed by the embeddings.
      total.prediction = (L == 0) ? Vector<Scalar>::Zero(prediction_sum.size()).eval()
                                  : prediction_sum;
      total.bn = bn_sum;
      adagrad_step(params, total, state, static_cast<Scalar>(config.learning_rate),
                   static_cast<Scalar>(config.l2_embedding),
                   static_cast<Scalar>(config.adagrad_epsilon));

      for (auto& h : hidden_sum) {
        h.weight.setZero();
        h.bias.setZero();
      }
      prediction_sum.setZero();
      for (auto& s : bn_sum) {
        s.gamma.setZero();
        s.beta.setZero();
      }
    }

    EpochReport report;
    report.epoch = epoch;
    report.train_rmse = evaluate_rmse(params, train);
    report.valid_rmse = evaluate_rmse(params, valid);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    reports.push_back(report);
    if (config.verbose) {
      std::fprintf(stderr, "[nfm] epoch %d train %.4f valid %.4f (%.1fs)\n", epoch,
                   report.train_rmse, report.valid_rmse, report.wall_seconds);
    }

    if (report.valid_rmse < best_rmse) {
      best_rmse = report.valid_rmse;
      best = params;
    }
    if (stopper.observe(report.valid_rmse)) break;
  }
  return {std::move(best), std::move(reports)};
}

// Replaces the running batch-norm statistics with exact population statistics
// over `data`, stage by stage (dropout off). An alternative to the
// exponential moving average accumulated during training.
template <class Scalar>
void recompute_bn_statistics(NfmParams<Scalar>& p, const Dataset<Scalar>& data) {
  if (!p.bn_enabled) {
    throw std::invalid_argument("recompute_bn_statistics: batch norm is not enabled");
  }
  if (data.instances.empty()) {
    throw std::invalid_argument("recompute_bn_statistics: dataset is empty");
  }
  const Index L = p.num_layers();
  for (Index stage = 0; stage <= L; ++stage) {
    // Population statistics of this stage's input, propagating every instance
    // through the already-finalized earlier stages (dropout off).
    Vector<Scalar> mean;
    Vector<Scalar> moment2;
    bool first = true;
    for (const auto& x : data.instances) {
      Vector<Scalar> v = pool(embed(p.fm, x), p.pooling);
      for (Index s = 0; s < stage; ++s) {
        const auto& bn = p.bn[s];
        Vector<Scalar> normalized, inv_std, scaled;
        detail::normalize_with(bn, bn.running_mean, bn.running_var, v, normalized, inv_std,
                               scaled);
        v = std::move(scaled);
        if (s > 0) {
          const Activation act = p.hidden[s - 1].activation;
          v = v.unaryExpr([&](Scalar a) { return apply_activation(act, a); });
        }
        v = p.hidden[s].weight * v + p.hidden[s].bias;
      }
      if (first) {
        mean = Vector<Scalar>::Zero(v.size());
        moment2 = Vector<Scalar>::Zero(v.size());
        first = false;
      }
      mean += v;
      moment2 += v.cwiseProduct(v);
    }
    const Scalar n = static_cast<Scalar>(data.instances.size());
    mean /= n;
    moment2 /= n;
    p.bn[stage].running_mean = mean;
    p.bn[stage].running_var = (moment2 - mean.cwiseProduct(mean)).cwiseMax(Scalar(0));
  }
}

}  // namespace nfm
