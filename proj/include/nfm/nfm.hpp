#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfm/fm.hpp"
#include "nfm/random.hpp"
#include "nfm/types.hpp"

namespace nfm {

template <class Scalar>
struct DenseLayer {
  Matrix<Scalar> weight;  // d_out x d_in
  Vector<Scalar> bias;    // d_out
  Activation activation = Activation::relu;
};

template <class Scalar>
struct BatchNormState {
  Vector<Scalar> gamma, beta;
  Vector<Scalar> running_mean, running_var;
  Scalar momentum = Scalar(0.9);
  Scalar epsilon = Scalar(1e-5);

  Index dim() const { return gamma.size(); }
};

// Full NFM parameter set. When batch norm is enabled there is one state per
// normalized layer: index 0 normalizes the pooling output, index l the l-th
// hidden layer's affine output.
template <class Scalar>
struct NfmParams {
  FmParams<Scalar> fm;
  std::vector<DenseLayer<Scalar>> hidden;
  Vector<Scalar> prediction;  // h
  Pooling pooling = Pooling::bi_interaction;
  bool bn_enabled = false;
  std::vector<BatchNormState<Scalar>> bn;  // size hidden.size() + 1 when enabled

  Index num_features() const { return fm.num_features(); }
  Index num_factors() const { return fm.num_factors(); }
  Index num_layers() const { return static_cast<Index>(hidden.size()); }
  Index pooled_dim() const {
    return hidden.empty() ? prediction.size() : hidden.front().weight.cols();
  }
  Index output_dim() const { return prediction.size(); }
};

// Scaled embedding rows {x_i * v_i} for the active features, in index order.
template <class Scalar>
Matrix<Scalar> embed(const FmParams<Scalar>& fm, const SparseInstance<Scalar>& x) {
  check_instance(x, fm.num_features());
  Matrix<Scalar> u(x.nnz(), fm.num_factors());
  for (Index i = 0; i < x.nnz(); ++i) {
    u.row(i) = x.values[i] * fm.embeddings.row(x.indices[i]);
  }
  return u;
}

// Bi-Interaction pooling: sum over all pairs of element-wise products,
// computed as 0.5 * [(sum u_i)^2 - sum u_i^2] in O(k * nnz).
template <class Scalar>
Vector<Scalar> bi_interaction(const Matrix<Scalar>& embeds) {
  const Vector<Scalar> sum = embeds.colwise().sum().transpose();
  const Vector<Scalar> sum_sq = embeds.cwiseProduct(embeds).colwise().sum().transpose();
  return Scalar(0.5) * (sum.array().square() - sum_sq.array()).matrix();
}

template <class Scalar>
Vector<Scalar> bi_interaction(const std::vector<Vector<Scalar>>& embeds) {
  if (embeds.empty()) return Vector<Scalar>();
  Matrix<Scalar> m(static_cast<Index>(embeds.size()), embeds.front().size());
  for (std::size_t i = 0; i < embeds.size(); ++i) {
    if (embeds[i].size() != m.cols()) {
      throw std::invalid_argument("bi_interaction: embedding vectors differ in length");
    }
    m.row(static_cast<Index>(i)) = embeds[i].transpose();
  }
  return bi_interaction(m);
}

template <class Scalar>
Vector<Scalar> pool(const Matrix<Scalar>& embeds, Pooling strategy) {
  switch (strategy) {
    case Pooling::bi_interaction:
      return bi_interaction(embeds);
    case Pooling::average:
      if (embeds.rows() == 0) return Vector<Scalar>::Zero(embeds.cols());
      return embeds.colwise().sum().transpose() / Scalar(embeds.rows());
    case Pooling::concat: {
      Vector<Scalar> out(embeds.rows() * embeds.cols());
      for (Index i = 0; i < embeds.rows(); ++i) {
        out.segment(i * embeds.cols(), embeds.cols()) = embeds.row(i).transpose();
      }
      return out;
    }
  }
  throw std::invalid_argument("pool: unknown strategy");
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <class Scalar>
struct BnBatchResult {
  Matrix<Scalar> output;      // gamma * normalized + beta
  Matrix<Scalar> normalized;  // (x - mean) / sqrt(var + eps)
  Vector<Scalar> mean, var, inv_std;
};

// Rows of `batch` are instances. Train mode normalizes with the batch mean
// and (biased) variance and folds them into the running statistics; eval mode
// normalizes with the running statistics.
template <class Scalar>
BnBatchResult<Scalar> batchnorm_forward(BatchNormState<Scalar>& state,
                                        const Matrix<Scalar>& batch, Mode mode) {
  if (batch.cols() != state.dim()) {
    throw std::invalid_argument("batchnorm_forward: dimension mismatch");
  }
  BnBatchResult<Scalar> r;
  if (mode == Mode::train) {
    if (batch.rows() < 2) {
      throw std::invalid_argument("batchnorm_forward: train mode needs a batch of at least 2");
    }
    r.mean = batch.colwise().mean().transpose();
    r.var = (batch.rowwise() - r.mean.transpose()).array().square().colwise().mean().transpose();
    state.running_mean = state.momentum * state.running_mean + (Scalar(1) - state.momentum) * r.mean;
    state.running_var = state.momentum * state.running_var + (Scalar(1) - state.momentum) * r.var;
  } else {
    r.mean = state.running_mean;
    r.var = state.running_var;
  }
  r.inv_std = (r.var.array() + state.epsilon).rsqrt();
  r.normalized = (batch.rowwise() - r.mean.transpose()).array().rowwise() *
                 r.inv_std.transpose().array();
  r.output = (r.normalized.array().rowwise() * state.gamma.transpose().array()).rowwise() +
             state.beta.transpose().array();
  return r;
}

// Batch statistics for every normalized layer, as recorded during a training
// batch; the backward pass treats them as constants.
template <class Scalar>
struct BnBatchStats {
  std::vector<Vector<Scalar>> mean, var;  // size hidden.size() + 1
};

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

// Every intermediate the backward pass needs. `layer_inputs[l]` is z_l, the
// (dropped-out) input into layer l+1; index 0 is the processed pooling output.
template <class Scalar>
struct ForwardTrace {
  Mode mode = Mode::eval;
  std::vector<Index> active;
  std::vector<Scalar> x_values;
  Matrix<Scalar> embeds;       // nnz x k scaled embeddings
  Vector<Scalar> embed_sum;    // column sums of `embeds`
  Vector<Scalar> pooled;       // raw pooling output

  // Per normalized layer (0 = pooling, l = hidden layer l), present iff BN on.
  std::vector<Vector<Scalar>> bn_normalized;
  std::vector<Vector<Scalar>> bn_inv_std;
  std::vector<Vector<Scalar>> bn_mean, bn_var;

  std::vector<Vector<Scalar>> dropout_masks;      // empty vector = no dropout
  std::vector<Vector<Scalar>> pre_activations;    // per hidden layer, post-BN
  std::vector<Vector<Scalar>> post_activations;   // per hidden layer
  std::vector<Vector<Scalar>> layer_inputs;       // z_0 .. z_L

  Scalar linear_term = 0;  // w0 + sum w_i x_i
  Scalar score = 0;
};

namespace detail {

template <class Scalar>
void check_dropout_ratios(const NfmParams<Scalar>& p, const std::vector<Scalar>& ratios) {
  if (static_cast<Index>(ratios.size()) != p.num_layers() + 1) {
    throw std::invalid_argument("dropout_ratios must have one entry for the pooling layer plus one per hidden layer");
  }
  for (Scalar r : ratios) {
    if (!(r >= Scalar(0) && r < Scalar(1))) {
      throw std::invalid_argument("dropout ratios must lie in [0, 1)");
    }
  }
}

// Inverted dropout: kept units are scaled by 1/(1-ratio) so eval needs no
// rescaling. An empty mask means "keep everything".
template <class Scalar>
Vector<Scalar> draw_dropout_mask(Rng& rng, Index dim, Scalar ratio) {
  if (ratio == Scalar(0)) return Vector<Scalar>();
  Vector<Scalar> mask(dim);
  const Scalar keep_scale = Scalar(1) / (Scalar(1) - ratio);
  for (Index i = 0; i < dim; ++i) {
    mask[i] = static_cast<Scalar>(rng.uniform()) >= ratio ? keep_scale : Scalar(0);
  }
  return mask;
}

template <class Scalar>
void normalize_with(const BatchNormState<Scalar>& bn, const Vector<Scalar>& mean,
                    const Vector<Scalar>& var, const Vector<Scalar>& in,
                    Vector<Scalar>& normalized, Vector<Scalar>& inv_std, Vector<Scalar>& out) {
  inv_std = (var.array() + bn.epsilon).rsqrt();
  normalized = (in - mean).cwiseProduct(inv_std);
  out = bn.gamma.cwiseProduct(normalized) + bn.beta;
}

template <class Scalar>
void check_finite(const Vector<Scalar>& v, const char* where) {
  if (!v.allFinite()) {
    throw std::runtime_error(std::string("non-finite value at ") + where);
  }
}

}  // namespace detail

// Scores one instance and records every intermediate. In train mode with
// batch norm enabled the batch statistics must be supplied (they come from
// the surrounding mini-batch, see nfm_forward_batch); eval mode uses the
// running statistics and disables dropout.
template <class Scalar>
ForwardTrace<Scalar> nfm_forward(const NfmParams<Scalar>& p, const SparseInstance<Scalar>& x,
                                 Mode mode, const std::vector<Scalar>& dropout_ratios, Rng& rng,
                                 const BnBatchStats<Scalar>* batch_stats = nullptr) {
  detail::check_dropout_ratios(p, dropout_ratios);
  const Index num_stages = p.num_layers() + 1;
  if (p.bn_enabled && static_cast<Index>(p.bn.size()) != num_stages) {
    throw std::invalid_argument("nfm_forward: batch-norm state count mismatch");
  }
  if (p.bn_enabled && mode == Mode::train && batch_stats == nullptr) {
    throw std::invalid_argument("nfm_forward: train mode with batch norm needs batch statistics");
  }

  ForwardTrace<Scalar> t;
  t.mode = mode;
  t.active = x.indices;
  t.x_values = x.values;
  t.embeds = embed(p.fm, x);
  t.embed_sum = t.embeds.colwise().sum().transpose();
  t.pooled = pool(t.embeds, p.pooling);
  if (t.pooled.size() != p.pooled_dim()) {
    throw std::invalid_argument("nfm_forward: pooled dimension " + std::to_string(t.pooled.size()) +
                                " does not match the network input " +
                                std::to_string(p.pooled_dim()) +
                                (p.pooling == Pooling::concat
                                     ? " (concat pooling needs a fixed active-feature count)"
                                     : ""));
  }

  t.linear_term = p.fm.bias;
  for (Index i = 0; i < x.nnz(); ++i) {
    t.linear_term += p.fm.linear[x.indices[i]] * x.values[i];
  }

  if (p.bn_enabled) {
    t.bn_normalized.resize(num_stages);
    t.bn_inv_std.resize(num_stages);
    t.bn_mean.resize(num_stages);
    t.bn_var.resize(num_stages);
  }
  t.dropout_masks.resize(num_stages);
  t.layer_inputs.resize(num_stages);
  t.pre_activations.resize(p.num_layers());
  t.post_activations.resize(p.num_layers());

  auto stage = [&](Index s, const Vector<Scalar>& raw) -> Vector<Scalar> {
    Vector<Scalar> v = raw;
    if (p.bn_enabled) {
      const auto& bn = p.bn[s];
      t.bn_mean[s] = (mode == Mode::train) ? batch_stats->mean[s] : bn.running_mean;
      t.bn_var[s] = (mode == Mode::train) ? batch_stats->var[s] : bn.running_var;
      detail::normalize_with(bn, t.bn_mean[s], t.bn_var[s], raw, t.bn_normalized[s],
                             t.bn_inv_std[s], v);
    }
    return v;
  };
  auto drop = [&](Index s, Vector<Scalar> v) -> Vector<Scalar> {
    if (mode == Mode::train) {
      t.dropout_masks[s] = detail::draw_dropout_mask(rng, v.size(), dropout_ratios[s]);
      if (t.dropout_masks[s].size() > 0) v = v.cwiseProduct(t.dropout_masks[s]);
    }
    return v;
  };

  t.layer_inputs[0] = drop(0, stage(0, t.pooled));
  detail::check_finite(t.layer_inputs[0], "the pooling layer");

  for (Index l = 0; l < p.num_layers(); ++l) {
    const auto& layer = p.hidden[l];
    const Vector<Scalar> affine = layer.weight * t.layer_inputs[l] + layer.bias;
    t.pre_activations[l] = stage(l + 1, affine);
    t.post_activations[l] = t.pre_activations[l].unaryExpr(
        [&](Scalar a) { return apply_activation(layer.activation, a); });
    t.layer_inputs[l + 1] = drop(l + 1, t.post_activations[l]);
    detail::check_finite(t.layer_inputs[l + 1], ("hidden layer " + std::to_string(l + 1)).c_str());
  }

  t.score = t.linear_term + p.prediction.dot(t.layer_inputs.back());
  if (!std::isfinite(static_cast<double>(t.score))) {
    throw std::runtime_error("non-finite value at the prediction layer");
  }
  return t;
}

// Eval-mode score without dropout bookkeeping.
template <class Scalar>
Scalar nfm_score(const NfmParams<Scalar>& p, const SparseInstance<Scalar>& x) {
  Rng unused(0);
  const std::vector<Scalar> no_dropout(p.num_layers() + 1, Scalar(0));
  return nfm_forward(p, x, Mode::eval, no_dropout, unused).score;
}

// Forward over a mini-batch. With batch norm in train mode the batch
// statistics of every normalized layer are computed here, recorded into the
// traces and folded into the running statistics. Dropout masks are drawn
// instance-by-instance, so a batch of one matches nfm_forward exactly.
template <class Scalar>
std::vector<ForwardTrace<Scalar>> nfm_forward_batch(
    NfmParams<Scalar>& p, const std::vector<const SparseInstance<Scalar>*>& instances, Mode mode,
    const std::vector<Scalar>& dropout_ratios, Rng& rng) {
  const std::size_t batch = instances.size();
  std::vector<ForwardTrace<Scalar>> traces;
  traces.reserve(batch);

  if (!(p.bn_enabled && mode == Mode::train)) {
    for (const auto* x : instances) {
      traces.push_back(nfm_forward(p, *x, mode, dropout_ratios, rng));
    }
    return traces;
  }

  detail::check_dropout_ratios(p, dropout_ratios);
  const Index num_stages = p.num_layers() + 1;

  // Masks first, instance-major, so the consumed rng stream is identical to
  // running nfm_forward per instance.
  std::vector<std::vector<Vector<Scalar>>> masks(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    masks[i].resize(num_stages);
    masks[i][0] = detail::draw_dropout_mask(rng, p.pooled_dim(), dropout_ratios[0]);
    for (Index l = 0; l < p.num_layers(); ++l) {
      masks[i][l + 1] =
          detail::draw_dropout_mask(rng, p.hidden[l].weight.rows(), dropout_ratios[l + 1]);
    }
  }

  BnBatchStats<Scalar> stats;
  stats.mean.resize(num_stages);
  stats.var.resize(num_stages);

  for (std::size_t i = 0; i < batch; ++i) {
    ForwardTrace<Scalar>& t = traces.emplace_back();
    const auto& x = *instances[i];
    t.mode = mode;
    t.active = x.indices;
    t.x_values = x.values;
    t.embeds = embed(p.fm, x);
    t.embed_sum = t.embeds.colwise().sum().transpose();
    t.pooled = pool(t.embeds, p.pooling);
    if (t.pooled.size() != p.pooled_dim()) {
      throw std::invalid_argument("nfm_forward_batch: concat pooling needs a fixed active-feature count per batch");
    }
    t.linear_term = p.fm.bias;
    for (Index j = 0; j < x.nnz(); ++j) {
      t.linear_term += p.fm.linear[x.indices[j]] * x.values[j];
    }
    t.bn_normalized.resize(num_stages);
    t.bn_inv_std.resize(num_stages);
    t.bn_mean.resize(num_stages);
    t.bn_var.resize(num_stages);
    t.dropout_masks = std::move(masks[i]);
    t.layer_inputs.resize(num_stages);
    t.pre_activations.resize(p.num_layers());
    t.post_activations.resize(p.num_layers());
  }

  // Stage by stage across the batch: affine rows, batch statistics, then the
  // per-instance tail of the stage.
  Matrix<Scalar> rows(batch, p.pooled_dim());
  for (std::size_t i = 0; i < batch; ++i) rows.row(i) = traces[i].pooled.transpose();

  for (Index s = 0; s < num_stages; ++s) {
    const auto r = batchnorm_forward(p.bn[s], rows, Mode::train);
    stats.mean[s] = r.mean;
    stats.var[s] = r.var;
    for (std::size_t i = 0; i < batch; ++i) {
      ForwardTrace<Scalar>& t = traces[i];
      t.bn_mean[s] = r.mean;
      t.bn_var[s] = r.var;
      t.bn_inv_std[s] = r.inv_std;
      t.bn_normalized[s] = r.normalized.row(i).transpose();
      Vector<Scalar> v = r.output.row(i).transpose();
      if (s > 0) {
        const auto& layer = p.hidden[s - 1];
        t.pre_activations[s - 1] = v;
        v = v.unaryExpr([&](Scalar a) { return apply_activation(layer.activation, a); });
        t.post_activations[s - 1] = v;
      }
      if (t.dropout_masks[s].size() > 0) v = v.cwiseProduct(t.dropout_masks[s]);
      t.layer_inputs[s] = std::move(v);
      detail::check_finite(t.layer_inputs[s],
                           s == 0 ? "the pooling layer" : ("hidden layer " + std::to_string(s)).c_str());
    }
    if (s + 1 < num_stages) {
      const auto& layer = p.hidden[s];
      rows.resize(batch, layer.weight.rows());
      for (std::size_t i = 0; i < batch; ++i) {
        rows.row(i) = (layer.weight * traces[i].layer_inputs[s] + layer.bias).transpose();
      }
    }
  }

  for (auto& t : traces) {
    t.score = t.linear_term + p.prediction.dot(t.layer_inputs.back());
    if (!std::isfinite(static_cast<double>(t.score))) {
      throw std::runtime_error("non-finite value at the prediction layer");
    }
  }
  return traces;
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

template <class Scalar>
struct LayerGrad {
  Matrix<Scalar> weight;
  Vector<Scalar> bias;
};

template <class Scalar>
struct BnGrad {
  Vector<Scalar> gamma, beta;
};

template <class Scalar>
struct NfmGradients {
  FmGradients<Scalar> fm;
  std::vector<LayerGrad<Scalar>> hidden;
  Vector<Scalar> prediction;
  std::vector<BnGrad<Scalar>> bn;  // present iff BN enabled
};

// Hand-derived chain rule through prediction, hidden, batch-norm, dropout and
// pooling layers. Dropout masks and BN statistics recorded in the trace are
// treated as constants, so the gradient matches the exact function the
// forward pass evaluated.
template <class Scalar>
NfmGradients<Scalar> nfm_backward(const NfmParams<Scalar>& p, const ForwardTrace<Scalar>& t,
                                  Scalar upstream) {
  if (t.mode != Mode::train) {
    throw std::invalid_argument("nfm_backward: trace must come from a train-mode forward pass");
  }
  const Index L = p.num_layers();
  bool shapes_ok = static_cast<Index>(t.layer_inputs.size()) == L + 1 &&
                   t.layer_inputs[0].size() == p.pooled_dim() &&
                   t.layer_inputs.back().size() == p.prediction.size();
  for (Index l = 0; shapes_ok && l < L; ++l) {
    shapes_ok = t.layer_inputs[l].size() == p.hidden[l].weight.cols() &&
                t.layer_inputs[l + 1].size() == p.hidden[l].weight.rows();
  }
  if (!shapes_ok) {
    throw std::invalid_argument("nfm_backward: trace does not match the parameter shapes");
  }
  const Index k = p.num_factors();
  const Index nnz = static_cast<Index>(t.active.size());

  NfmGradients<Scalar> g;
  g.prediction = upstream * t.layer_inputs.back();
  g.hidden.resize(L);
  if (p.bn_enabled) g.bn.resize(L + 1);

  // delta = d y / d z_l, starting at the prediction layer
  Vector<Scalar> delta = upstream * p.prediction;
  for (Index l = L - 1; l >= 0; --l) {
    const auto& layer = p.hidden[l];
    if (t.dropout_masks[l + 1].size() > 0) {
      delta = delta.cwiseProduct(t.dropout_masks[l + 1]);
    }
    // through the activation
    for (Index j = 0; j < delta.size(); ++j) {
      delta[j] *= activation_derivative(layer.activation, t.pre_activations[l][j],
                                        t.post_activations[l][j]);
    }
    if (p.bn_enabled) {
      g.bn[l + 1].gamma = delta.cwiseProduct(t.bn_normalized[l + 1]);
      g.bn[l + 1].beta = delta;
      delta = delta.cwiseProduct(p.bn[l + 1].gamma).cwiseProduct(t.bn_inv_std[l + 1]);
    }
    g.hidden[l].weight = delta * t.layer_inputs[l].transpose();
    g.hidden[l].bias = delta;
    delta = layer.weight.transpose() * delta;
  }

  if (t.dropout_masks[0].size() > 0) {
    delta = delta.cwiseProduct(t.dropout_masks[0]);
  }
  if (p.bn_enabled) {
    g.bn[0].gamma = delta.cwiseProduct(t.bn_normalized[0]);
    g.bn[0].beta = delta;
    delta = delta.cwiseProduct(p.bn[0].gamma).cwiseProduct(t.bn_inv_std[0]);
  }

  // delta is now d y / d pooled; push through the pooling into the embeddings
  g.fm.bias = upstream;
  g.fm.active = t.active;
  g.fm.linear.resize(nnz);
  g.fm.embeddings.resize(nnz, k);
  for (Index i = 0; i < nnz; ++i) {
    const Scalar xi = t.x_values[i];
    g.fm.linear[i] = upstream * xi;
    switch (p.pooling) {
      case Pooling::bi_interaction:
        // d f_BI / d v_i = x_i (sum_j u_j - u_i), element-wise
        g.fm.embeddings.row(i) =
            xi * delta.cwiseProduct(t.embed_sum - t.embeds.row(i).transpose()).transpose();
        break;
      case Pooling::average:
        g.fm.embeddings.row(i) = (xi / Scalar(nnz)) * delta.transpose();
        break;
      case Pooling::concat:
        g.fm.embeddings.row(i) = xi * delta.segment(i * k, k).transpose();
        break;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

struct NfmArchitecture {
  Index num_factors = 64;
  std::vector<Index> layer_dims;
  Activation activation = Activation::relu;
  Pooling pooling = Pooling::bi_interaction;
  Index concat_fields = 0;  // active-feature count, required for concat
  bool bn_enabled = false;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;
};

// Initialization: embeddings ~ N(0, 0.01) as in make_fm, hidden weights
// uniform in +-sqrt(6 / (d_in + d_out)), biases zero, h all-ones (so that an
// untrained zero-layer network already scores exactly like the FM).
template <class Scalar>
NfmParams<Scalar> make_nfm(Index num_features, const NfmArchitecture& arch, std::uint64_t seed) {
  if (arch.pooling == Pooling::concat && arch.concat_fields < 1) {
    throw std::invalid_argument("make_nfm: concat pooling needs the active-feature count");
  }
  NfmParams<Scalar> p;
  p.fm = make_fm<Scalar>(num_features, arch.num_factors, seed);
  p.pooling = arch.pooling;
  p.bn_enabled = arch.bn_enabled;

  Rng rng(seed + 1);
  const Index d0 = arch.pooling == Pooling::concat ? arch.concat_fields * arch.num_factors
                                                   : arch.num_factors;
  Index prev = d0;
  for (Index d : arch.layer_dims) {
    if (d < 1) throw std::invalid_argument("make_nfm: layer dimensions must be positive");
    DenseLayer<Scalar> layer;
    layer.activation = arch.activation;
    layer.weight.resize(d, prev);
    const Scalar bound = std::sqrt(Scalar(6) / static_cast<Scalar>(prev + d));
    for (Index r = 0; r < d; ++r) {
      for (Index c = 0; c < prev; ++c) {
        layer.weight(r, c) = bound * static_cast<Scalar>(2.0 * rng.uniform() - 1.0);
      }
    }
    layer.bias = Vector<Scalar>::Zero(d);
    p.hidden.push_back(std::move(layer));
    prev = d;
  }
  p.prediction = Vector<Scalar>::Ones(prev);

  if (arch.bn_enabled) {
    Index dim = d0;
    for (Index s = 0; s <= p.num_layers(); ++s) {
      if (s > 0) dim = p.hidden[s - 1].weight.rows();
      BatchNormState<Scalar> bn;
      bn.gamma = Vector<Scalar>::Ones(dim);
      bn.beta = Vector<Scalar>::Zero(dim);
      bn.running_mean = Vector<Scalar>::Zero(dim);
      bn.running_var = Vector<Scalar>::Ones(dim);
      bn.momentum = static_cast<Scalar>(arch.bn_momentum);
      bn.epsilon = static_cast<Scalar>(arch.bn_epsilon);
      p.bn.push_back(std::move(bn));
    }
  }
  return p;
}

template <class Scalar>
Index count_parameters(const NfmParams<Scalar>& p) {
  Index total = count_parameters(p.fm);
  for (const auto& layer : p.hidden) {
    total += layer.weight.size() + layer.bias.size();
  }
  total += p.prediction.size();
  if (p.bn_enabled) {
    for (const auto& bn : p.bn) total += 2 * bn.dim();
  }
  return total;
}

}  // namespace nfm
