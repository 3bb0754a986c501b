#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "nfm/data.hpp"
#include "nfm/fm.hpp"
#include "nfm/nfm.hpp"

namespace nfm {

struct ClipRange {
  double lo = -1.0;
  double hi = 1.0;
};

namespace detail {

// Kahan-compensated sum so the result is insensitive to instance order.
class CompensatedSum {
 public:
  void add(double x) {
    const double y = x - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0, c_ = 0;
};

inline int scoring_threads() {
  if (const char* env = std::getenv("NFM_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

template <class Score>
double clipped_rmse(std::size_t count, const ClipRange& clip, Score&& score) {
  if (count == 0) throw std::invalid_argument("evaluate_rmse: dataset is empty");
  const int threads = std::min<int>(scoring_threads(), static_cast<int>(count));
  std::vector<double> partial(threads, 0.0);
  auto run = [&](int t) {
    const std::size_t lo = count * t / threads;
    const std::size_t hi = count * (t + 1) / threads;
    CompensatedSum sum;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto [prediction, target] = score(i);
      const double clipped = std::clamp(prediction, clip.lo, clip.hi);
      const double r = clipped - target;
      sum.add(r * r);
    }
    partial[t] = sum.value();
  };
  if (threads == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(run, t);
    for (auto& th : pool) th.join();
  }
  CompensatedSum total;
  for (double p : partial) total.add(p);
  return std::sqrt(total.value() / static_cast<double>(count));
}

}  // namespace detail

// Root mean square error with each prediction clipped into the target range
// first. Scoring runs in eval mode; NFM_THREADS workers may be used.
template <class Scalar>
double evaluate_rmse(const FmParams<Scalar>& m, const Dataset<Scalar>& data,
                     const ClipRange& clip = {}) {
  return detail::clipped_rmse(data.instances.size(), clip, [&](std::size_t i) {
    const auto& x = data.instances[i];
    return std::pair<double, double>(static_cast<double>(fm_score(m, x)),
                                     static_cast<double>(x.target));
  });
}

template <class Scalar>
double evaluate_rmse(const NfmParams<Scalar>& p, const Dataset<Scalar>& data,
                     const ClipRange& clip = {}) {
  return detail::clipped_rmse(data.instances.size(), clip, [&](std::size_t i) {
    const auto& x = data.instances[i];
    return std::pair<double, double>(static_cast<double>(nfm_score(p, x)),
                                     static_cast<double>(x.target));
  });
}

}  // namespace nfm
