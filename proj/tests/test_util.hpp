#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "nfm/data.hpp"
#include "nfm/fm.hpp"
#include "nfm/nfm.hpp"
#include "nfm/random.hpp"

// Shared helpers for the test suites: random inputs, the brute-force oracles
// the fast paths are checked against, and a central-difference driver.

namespace testutil {

using nfm::Index;

inline nfm::SparseInstance<double> random_instance(nfm::Rng& rng, Index num_features, Index max_nnz,
                                                   bool unit_values = false) {
  const Index nnz = static_cast<Index>(rng.below(static_cast<std::uint64_t>(max_nnz) + 1));
  std::vector<Index> all(static_cast<std::size_t>(num_features));
  for (Index i = 0; i < num_features; ++i) all[static_cast<std::size_t>(i)] = i;
  rng.shuffle(all);
  all.resize(static_cast<std::size_t>(nnz));
  std::sort(all.begin(), all.end());

  nfm::SparseInstance<double> x;
  x.indices = all;
  for (Index i = 0; i < nnz; ++i) {
    double v = unit_values ? 1.0 : rng.gaussian();
    if (v == 0.0) v = 1.0;
    x.values.push_back(v);
  }
  x.target = rng.gaussian();
  return x;
}

inline nfm::FmParams<double> random_fm(nfm::Rng& rng, Index n, Index k, double scale = 0.5) {
  nfm::FmParams<double> m;
  m.bias = scale * rng.gaussian();
  m.linear.resize(n);
  m.embeddings.resize(n, k);
  for (Index i = 0; i < n; ++i) {
    m.linear[i] = scale * rng.gaussian();
    for (Index f = 0; f < k; ++f) m.embeddings(i, f) = scale * rng.gaussian();
  }
  return m;
}

// Eq.-by-the-book FM score: double loop over all feature pairs.
inline double fm_score_brute_force(const nfm::FmParams<double>& m,
                                   const nfm::SparseInstance<double>& x) {
  double out = m.bias;
  for (Index i = 0; i < x.nnz(); ++i) {
    out += m.linear[x.indices[i]] * x.values[i];
  }
  for (Index i = 0; i < x.nnz(); ++i) {
    for (Index j = i + 1; j < x.nnz(); ++j) {
      out += m.embeddings.row(x.indices[i]).dot(m.embeddings.row(x.indices[j])) * x.values[i] *
             x.values[j];
    }
  }
  return out;
}

// Pairwise sum of element-wise products, the quadratic-time pooling oracle.
inline nfm::Vector<double> bi_interaction_brute_force(const nfm::Matrix<double>& embeds) {
  nfm::Vector<double> out = nfm::Vector<double>::Zero(embeds.cols());
  for (Index i = 0; i < embeds.rows(); ++i) {
    for (Index j = i + 1; j < embeds.rows(); ++j) {
      out += embeds.row(i).cwiseProduct(embeds.row(j)).transpose();
    }
  }
  return out;
}

// Central finite difference of a scalar function of one coordinate.
inline double central_difference(const std::function<double(double)>& f, double at,
                                 double h = 1e-5) {
  return (f(at + h) - f(at - h)) / (2.0 * h);
}

inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testutil
