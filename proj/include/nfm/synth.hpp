#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "nfm/data.hpp"
#include "nfm/random.hpp"
#include "nfm/types.hpp"

// Synthetic usage-log benchmark. The public Frappe and MovieLens dumps the
// regression experiments were designed around cannot be redistributed here,
// so this module generates logs with the same shape and statistics: a planted
// low-rank model with pairwise (user-item, context-item) structure, a
// three-way user-context-item interaction that no second-order model can
// express, popularity skew, and label noise from the stochastic item choice.

namespace nfm::synth {

struct ContextField {
  std::string name;
  Index cardinality = 2;
  double skew = 0.6;  // value weights ~ (rank+1)^-skew
};

struct UsageLogConfig {
  Index num_users = 957;
  Index num_items = 4082;
  std::vector<ContextField> contexts = {
      {"daytime", 7, 0.5},  {"weekday", 7, 0.2},  {"isweekend", 2, 0.3}, {"homework", 3, 0.7},
      {"cost", 2, 0.2},     {"weather", 9, 0.6},  {"country", 80, 1.1},  {"city", 233, 1.0},
  };
  Index num_logs = 96203;
  std::string item_name = "item";

  int latent_dim = 12;
  double pair_user_item = 1.0;   // strengths of the standardized score terms
  double pair_ctx_item = 1.0;    //   (context-item and three-way modulate the in-repertoire choice)
  double threeway = 0.5;
  double item_bias = 0.8;
  double user_zipf = 0.8;

  // Latents are drawn around cluster centroids (user communities and item
  // categories), so tastes have low-rank block structure with per-id scatter
  // on top, rather than being arbitrary points.
  Index user_clusters = 48;
  Index item_clusters = 96;
  double user_scatter = 0.35;
  double item_scatter = 0.35;

  // Users mostly stick to a small repertoire of items; each log picks within
  // it, modulated by context.
  Index repertoire_size = 16;
  double repertoire_noise = 1.0;
  double within_popularity = 0.5;

  // A slice of the logs "discovers" items over the whole catalog, driven by
  // popularity, context fit and a three-way user-context-item fit. This is
  // the hard-to-predict mass: its rate bounds the reachable RMSE and the
  // three-way share separates second-order models from deeper ones.
  double discovery_rate = 0.15;
  double discovery_popularity = 1.0;
  double discovery_ctx_item = 1.5;
  double discovery_threeway = 1.5;
  std::uint64_t seed = 2017;

  Index num_context_features() const {
    Index total = 0;
    for (const auto& f : contexts) total += f.cardinality;
    return total;
  }
  Index num_features() const { return num_users + num_items + num_context_features(); }
};

// Frappe-shaped by default; this returns the MovieLens-shaped task (ternary
// user-movie-tag, negatives drawn over tags).
inline UsageLogConfig movielens_like() {
  UsageLogConfig c;
  c.num_users = 17045;
  c.num_items = 49657;  // tags: the replaced field
  c.contexts = {{"movie", 23743, 0.9}};
  c.num_logs = 668953;
  c.item_name = "tag";
  c.seed = 2017;
  return c;
}

struct RawLogs {
  UsageLogConfig config;
  std::vector<std::string> columns;       // user, <item_name>, contexts...
  std::vector<std::vector<Index>> rows;   // per row: value id per column
};

namespace detail {

// Cumulative weights for a (rank+1)^-skew categorical.
inline std::vector<double> skewed_cumulative(Index cardinality, double skew) {
  std::vector<double> cum(static_cast<std::size_t>(cardinality));
  double total = 0;
  for (Index i = 0; i < cardinality; ++i) {
    total += std::pow(static_cast<double>(i + 1), -skew);
    cum[static_cast<std::size_t>(i)] = total;
  }
  return cum;
}

inline Index draw_from(const std::vector<double>& cum, Rng& rng) {
  const double u = rng.uniform() * cum.back();
  const auto it = std::upper_bound(cum.begin(), cum.end(), u);
  return std::min<Index>(static_cast<Index>(it - cum.begin()),
                         static_cast<Index>(cum.size()) - 1);
}

inline double stddev(const std::vector<double>& xs) {
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace detail

inline RawLogs generate_usage_logs(const UsageLogConfig& config) {
  if (config.num_users < 1 || config.num_items < 2 || config.num_logs < 1 ||
      config.latent_dim < 1) {
    throw std::invalid_argument("generate_usage_logs: implausible configuration");
  }
  const Index d = config.latent_dim;
  const Index num_ctx = static_cast<Index>(config.contexts.size());
  Rng rng(config.seed);

  // Clustered latents: centroid + scatter, normalized to unit variance.
  const auto clustered = [&](Index count, Index clusters, double scatter) {
    Matrix<double> centroids(clusters, d);
    for (Index i = 0; i < clusters; ++i) {
      for (Index f = 0; f < d; ++f) centroids(i, f) = rng.gaussian();
    }
    Matrix<double> out(count, d);
    const double core = std::sqrt(1.0 - scatter);
    const double tail = std::sqrt(scatter);
    for (Index i = 0; i < count; ++i) {
      const Index c = static_cast<Index>(rng.below(static_cast<std::uint64_t>(clusters)));
      for (Index f = 0; f < d; ++f) {
        out(i, f) = core * centroids(c, f) + tail * rng.gaussian();
      }
    }
    return out;
  };
  const Matrix<double> user_latent =
      clustered(config.num_users, std::max<Index>(1, config.user_clusters), config.user_scatter);
  const Matrix<double> item_latent =
      clustered(config.num_items, std::max<Index>(1, config.item_clusters), config.item_scatter);
  Vector<double> item_bias(config.num_items);
  for (Index i = 0; i < config.num_items; ++i) item_bias[i] = rng.gaussian();
  std::vector<Matrix<double>> ctx_latent;
  std::vector<std::vector<double>> ctx_cum;
  for (const auto& field : config.contexts) {
    Matrix<double> m(field.cardinality, d);
    for (Index v = 0; v < field.cardinality; ++v) {
      for (Index f = 0; f < d; ++f) m(v, f) = rng.gaussian();
    }
    ctx_latent.push_back(std::move(m));
    ctx_cum.push_back(detail::skewed_cumulative(field.cardinality, field.skew));
  }
  const std::vector<double> user_cum =
      detail::skewed_cumulative(config.num_users, config.user_zipf);

  auto draw_context = [&](std::vector<Index>& ctx, Index cover) {
    for (Index f = 0; f < num_ctx; ++f) {
      ctx[static_cast<std::size_t>(f)] = (cover >= 0 && cover < config.contexts[f].cardinality)
                                             ? cover
                                             : detail::draw_from(ctx_cum[f], rng);
    }
  };
  auto ctx_sum = [&](const std::vector<Index>& ctx) {
    Vector<double> sum = Vector<double>::Zero(d);
    for (Index f = 0; f < num_ctx; ++f) {
      sum += ctx_latent[f].row(ctx[static_cast<std::size_t>(f)]).transpose();
    }
    return sum;
  };

  // Standardize each score term over sampled (user, context, item) triples so
  // the configured strengths are comparable.
  const int probes = 4000;
  std::vector<double> t1, t2, t3;
  {
    std::vector<Index> ctx(static_cast<std::size_t>(num_ctx));
    for (int i = 0; i < probes; ++i) {
      const Index u = detail::draw_from(user_cum, rng);
      const Index a = static_cast<Index>(rng.below(static_cast<std::uint64_t>(config.num_items)));
      draw_context(ctx, -1);
      const Vector<double> c = ctx_sum(ctx);
      const auto gu = user_latent.row(u).transpose();
      const auto ga = item_latent.row(a).transpose();
      t1.push_back(gu.dot(ga));
      t2.push_back(c.dot(ga));
      t3.push_back(gu.cwiseProduct(c).dot(ga));
    }
  }
  const double term1_sd = std::max(1e-12, detail::stddev(t1));
  const double term2_sd = std::max(1e-12, detail::stddev(t2));
  const double term3_sd = std::max(1e-12, detail::stddev(t3));
  const double c1 = config.pair_user_item / term1_sd;
  const double c2 = config.pair_ctx_item / term2_sd;
  const double c3 = config.threeway / term3_sd;
  const double d2 = config.discovery_ctx_item / term2_sd;
  const double d3 = config.discovery_threeway / term3_sd;
  const double cb = config.item_bias;
  const double db = config.discovery_popularity;

  auto gumbel = [&rng] { return -std::log(-std::log(1.0 - rng.uniform())); };

  // Per-user repertoire: the top items by user-item affinity plus popularity,
  // with some noise so repertoires are not purely latent-determined. Items in
  // nobody's repertoire are adopted by their best-affinity user, so the
  // one-hot item space is fully populated by ordinary repertoire draws.
  std::vector<std::vector<Index>> repertoire(static_cast<std::size_t>(config.num_users));
  std::vector<Index> owner(static_cast<std::size_t>(config.num_items), -1);
  {
    std::vector<std::pair<double, Index>> ranked(static_cast<std::size_t>(config.num_items));
    for (Index u = 0; u < config.num_users; ++u) {
      const Vector<double> base =
          c1 * (item_latent * user_latent.row(u).transpose()) + cb * item_bias;
      for (Index a = 0; a < config.num_items; ++a) {
        ranked[static_cast<std::size_t>(a)] = {base[a] + config.repertoire_noise * gumbel(), a};
      }
      const Index size = config.repertoire_size / 2 + 1 +
                         static_cast<Index>(rng.below(
                             static_cast<std::uint64_t>(config.repertoire_size)));
      std::partial_sort(ranked.begin(), ranked.begin() + size, ranked.end(),
                        [](const auto& x, const auto& y) { return x.first > y.first; });
      auto& r = repertoire[static_cast<std::size_t>(u)];
      r.reserve(static_cast<std::size_t>(size));
      for (Index i = 0; i < size; ++i) {
        const Index item = ranked[static_cast<std::size_t>(i)].second;
        r.push_back(item);
        if (owner[static_cast<std::size_t>(item)] < 0) owner[static_cast<std::size_t>(item)] = u;
      }
    }
    for (Index a = 0; a < config.num_items; ++a) {
      if (owner[static_cast<std::size_t>(a)] >= 0) continue;
      Index best_user = 0;
      double best = -1e300;
      for (Index u = 0; u < config.num_users; ++u) {
        const double s = c1 * user_latent.row(u).dot(item_latent.row(a));
        if (s > best) {
          best = s;
          best_user = u;
        }
      }
      repertoire[static_cast<std::size_t>(best_user)].push_back(a);
      owner[static_cast<std::size_t>(a)] = best_user;
    }
  }

  RawLogs logs;
  logs.config = config;
  logs.columns.push_back("user");
  logs.columns.push_back(config.item_name);
  for (const auto& f : config.contexts) logs.columns.push_back(f.name);
  logs.rows.reserve(static_cast<std::size_t>(config.num_logs));

  std::vector<Index> ctx(static_cast<std::size_t>(num_ctx));
  Vector<double> discovery_scores(config.num_items);
  for (Index j = 0; j < config.num_logs; ++j) {
    // The earliest logs pin the user (then the item, through its owner) so
    // every id occurs at least once and the one-hot space is fully populated.
    const bool cover_user = j < config.num_users;
    const bool cover_item = !cover_user && j < config.num_users + config.num_items;
    draw_context(ctx, j);

    Index u;
    Index a = -1;
    if (cover_user) {
      u = j;
    } else if (cover_item) {
      a = j - config.num_users;
      u = owner[static_cast<std::size_t>(a)];
    } else {
      u = detail::draw_from(user_cum, rng);
    }

    if (a < 0 && rng.uniform() < config.discovery_rate) {
      // discovery: any item, weighted by popularity and context/taste fit
      const Vector<double> c = ctx_sum(ctx);
      const Vector<double> q = d2 * c + d3 * user_latent.row(u).transpose().cwiseProduct(c);
      discovery_scores = item_latent * q + db * cb * item_bias;
      double best = -1e300;
      for (Index i = 0; i < config.num_items; ++i) {
        const double s = discovery_scores[i] + gumbel();
        if (s > best) {
          best = s;
          a = i;
        }
      }
    } else if (a < 0) {
      // context-modulated choice within the user's repertoire
      const Vector<double> c = ctx_sum(ctx);
      const Vector<double> q = c2 * c + c3 * user_latent.row(u).transpose().cwiseProduct(c);
      const auto& r = repertoire[static_cast<std::size_t>(u)];
      double best = -1e300;
      for (Index cand : r) {
        const double s = item_latent.row(cand).dot(q) +
                         config.within_popularity * cb * item_bias[cand] + gumbel();
        if (s > best) {
          best = s;
          a = cand;
        }
      }
    }

    std::vector<Index> row;
    row.reserve(2 + static_cast<std::size_t>(num_ctx));
    row.push_back(u);
    row.push_back(a);
    for (Index f = 0; f < num_ctx; ++f) row.push_back(ctx[static_cast<std::size_t>(f)]);
    logs.rows.push_back(std::move(row));
  }
  return logs;
}

inline void write_raw_tsv(const RawLogs& logs, std::ostream& out) {
  for (std::size_t c = 0; c < logs.columns.size(); ++c) {
    out << (c ? "\t" : "") << logs.columns[c];
  }
  out << '\n';
  for (const auto& row : logs.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << (c ? "\t" : "") << row[c];
    }
    out << '\n';
  }
}

// Direct one-hot encoding of the logs (user block, item block, then context
// blocks); every target is +1. Also returns the item block for negative
// sampling.
inline std::pair<Dataset<double>, FeatureRange> to_dataset(const RawLogs& logs) {
  const auto& cfg = logs.config;
  Dataset<double> data;
  data.num_features = cfg.num_features();
  data.instances.reserve(logs.rows.size());
  const Index item_base = cfg.num_users;
  for (const auto& row : logs.rows) {
    SparseInstance<double> inst;
    inst.target = 1.0;
    inst.indices.reserve(row.size());
    inst.values.assign(row.size(), 1.0);
    inst.indices.push_back(row[0]);
    inst.indices.push_back(item_base + row[1]);
    Index base = cfg.num_users + cfg.num_items;
    for (std::size_t f = 0; f < cfg.contexts.size(); ++f) {
      inst.indices.push_back(base + row[2 + f]);
      base += cfg.contexts[f].cardinality;
    }
    data.instances.push_back(std::move(inst));
  }
  return {std::move(data), FeatureRange{item_base, item_base + cfg.num_items}};
}

}  // namespace nfm::synth
