#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "nfm/data.hpp"
#include "nfm/random.hpp"
#include "nfm/types.hpp"

namespace nfm {

// Factorization machine parameters: global bias, per-feature linear weights
// and per-feature embedding rows.
template <class Scalar>
struct FmParams {
  Scalar bias = 0;             // w0
  Vector<Scalar> linear;       // w, length n
  Matrix<Scalar> embeddings;   // V, n x k (row i = embedding of feature i)

  Index num_features() const { return linear.size(); }
  Index num_factors() const { return embeddings.cols(); }
};

// w0 = 0, w = 0, V ~ N(0, init_std): the usual small-Gaussian start.
template <class Scalar>
FmParams<Scalar> make_fm(Index num_features, Index num_factors, std::uint64_t seed,
                         Scalar init_std = Scalar(0.01)) {
  if (num_features < 1 || num_factors < 1) {
    throw std::invalid_argument("make_fm: need num_features >= 1 and num_factors >= 1");
  }
  FmParams<Scalar> m;
  m.linear = Vector<Scalar>::Zero(num_features);
  m.embeddings.resize(num_features, num_factors);
  Rng rng(seed);
  for (Index i = 0; i < num_features; ++i) {
    for (Index f = 0; f < num_factors; ++f) {
      m.embeddings(i, f) = init_std * static_cast<Scalar>(rng.gaussian());
    }
  }
  return m;
}

template <class Scalar>
void check_instance(const SparseInstance<Scalar>& x, Index num_features) {
  if (!x.indices.empty() && x.indices.back() >= num_features) {
    throw std::out_of_range("feature index " + std::to_string(x.indices.back()) +
                            " out of range for " + std::to_string(num_features) + " features");
  }
}

// w0 + sum_i w_i x_i + sum_{i<j} <v_i, v_j> x_i x_j via the sum-of-squares
// rearrangement, O(k * nnz).
template <class Scalar>
Scalar fm_score(const FmParams<Scalar>& m, const SparseInstance<Scalar>& x) {
  check_instance(x, m.num_features());
  const Index k = m.num_factors();
  Scalar out = m.bias;
  Vector<Scalar> sum = Vector<Scalar>::Zero(k);
  Vector<Scalar> sum_sq = Vector<Scalar>::Zero(k);
  for (Index i = 0; i < x.nnz(); ++i) {
    const Scalar xi = x.values[i];
    out += m.linear[x.indices[i]] * xi;
    const auto row = m.embeddings.row(x.indices[i]);
    sum += xi * row.transpose();
    sum_sq += (xi * xi) * row.cwiseProduct(row).transpose();
  }
  out += Scalar(0.5) * (sum.array().square() - sum_sq.array()).sum();
  return out;
}

// Partials of the FM score w.r.t. the parameters touched by `x`, stored
// sparsely: row i of `embeddings` is d y / d v_{active[i]}.
template <class Scalar>
struct FmGradients {
  Scalar bias = 0;
  std::vector<Index> active;
  Vector<Scalar> linear;      // one entry per active feature
  Matrix<Scalar> embeddings;  // nnz x k
};

template <class Scalar>
FmGradients<Scalar> fm_gradients(const FmParams<Scalar>& m, const SparseInstance<Scalar>& x) {
  check_instance(x, m.num_features());
  const Index k = m.num_factors();
  const Index nnz = x.nnz();

  Vector<Scalar> sum = Vector<Scalar>::Zero(k);
  for (Index i = 0; i < nnz; ++i) {
    sum += x.values[i] * m.embeddings.row(x.indices[i]).transpose();
  }

  FmGradients<Scalar> g;
  g.bias = Scalar(1);
  g.active = x.indices;
  g.linear.resize(nnz);
  g.embeddings.resize(nnz, k);
  for (Index i = 0; i < nnz; ++i) {
    const Scalar xi = x.values[i];
    g.linear[i] = xi;
    // d y / d v_if = x_i * sum_f - x_i^2 * v_if
    g.embeddings.row(i) =
        xi * sum.transpose() - (xi * xi) * m.embeddings.row(x.indices[i]);
  }
  return g;
}

// Fused score + gradients, sharing the factor sums; equal to calling
// fm_score and fm_gradients separately.
template <class Scalar>
std::pair<Scalar, FmGradients<Scalar>> fm_score_and_gradients(const FmParams<Scalar>& m,
                                                              const SparseInstance<Scalar>& x) {
  check_instance(x, m.num_features());
  const Index k = m.num_factors();
  const Index nnz = x.nnz();

  Scalar out = m.bias;
  Vector<Scalar> sum = Vector<Scalar>::Zero(k);
  Vector<Scalar> sum_sq = Vector<Scalar>::Zero(k);
  for (Index i = 0; i < nnz; ++i) {
    const Scalar xi = x.values[i];
    out += m.linear[x.indices[i]] * xi;
    const auto row = m.embeddings.row(x.indices[i]);
    sum += xi * row.transpose();
    sum_sq += (xi * xi) * row.cwiseProduct(row).transpose();
  }
  out += Scalar(0.5) * (sum.array().square() - sum_sq.array()).sum();

  FmGradients<Scalar> g;
  g.bias = Scalar(1);
  g.active = x.indices;
  g.linear.resize(nnz);
  g.embeddings.resize(nnz, k);
  for (Index i = 0; i < nnz; ++i) {
    const Scalar xi = x.values[i];
    g.linear[i] = xi;
    g.embeddings.row(i) = xi * sum.transpose() - (xi * xi) * m.embeddings.row(x.indices[i]);
  }
  return {out, std::move(g)};
}

template <class Scalar>
Index count_parameters(const FmParams<Scalar>& m) {
  return 1 + m.num_features() + m.num_features() * m.num_factors();
}

}  // namespace nfm
