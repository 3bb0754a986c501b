// Acceptance suite: runs every gating check at its pinned tolerance and
// prints one PASS/FAIL line per criterion. Exits non-zero if any fail.
//
// Criteria 5-9 retrain the benchmark models on the synthetic Frappe-shaped
// corpus, which takes a while; pass criterion numbers as arguments to run a
// subset, e.g. `acceptance 1 2 3 4 10`.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "nfm/metrics.hpp"
#include "nfm/nfm.hpp"
#include "nfm/presets.hpp"
#include "nfm/synth.hpp"
#include "nfm/train.hpp"
#include "test_util.hpp"

using namespace nfm;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s — %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

// --------------------------------------------------------------------------
// 1. fast-form pooling equals the brute-force pairwise sum
// --------------------------------------------------------------------------

void criterion_1() {
  Rng rng(101);
  double max_err = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 1000; ++trial) {
    const Index rows = static_cast<Index>(rng.below(21));
    const Index k = 1 + static_cast<Index>(rng.below(32));
    Matrix<double> u(rows, k);
    for (Index i = 0; i < rows; ++i) {
      for (Index f = 0; f < k; ++f) u(i, f) = rng.gaussian();
    }
    const Vector<double> fast = bi_interaction(u);
    const Vector<double> brute = testutil::bi_interaction_brute_force(u);
    if (fast.size() > 0) max_err = std::max(max_err, (fast - brute).cwiseAbs().maxCoeff());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(1, max_err <= 1e-10 && secs < 1.0, "linear-time pooling identity",
         fmt("max element error %.2e over 1000 random sets in %.2fs (gate 1e-10, 1s)", max_err,
             secs));
}

// --------------------------------------------------------------------------
// 2. the zero-layer network with h = ones scores exactly like the FM
// --------------------------------------------------------------------------

void criterion_2() {
  Rng rng(202);
  double max_err = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 24, k = 1 + static_cast<Index>(rng.below(32));
    NfmArchitecture arch;
    arch.num_factors = k;
    auto p = make_nfm<double>(n, arch, rng.next_u64());
    p.fm.bias = 0.1 * rng.gaussian();
    for (Index i = 0; i < n; ++i) {
      p.fm.linear[i] = 0.1 * rng.gaussian();
      for (Index f = 0; f < k; ++f) p.fm.embeddings(i, f) = 0.1 * rng.gaussian();
    }
    const auto x = testutil::random_instance(rng, n, 20);
    max_err = std::max(max_err, std::abs(nfm_score(p, x) - fm_score(p.fm, x)));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(2, max_err <= 1e-12 && secs < 1.0, "zero-layer network recovers the FM",
         fmt("max |nfm - fm| %.2e over 1000 pairs in %.2fs (gate 1e-12, 1s)", max_err, secs));
}

// --------------------------------------------------------------------------
// 3. analytic gradients vs central finite differences
// --------------------------------------------------------------------------

struct GradCheck {
  double worst = 0;
  long checked = 0;
};

void fd_check_network(const NfmParams<double>& p, const SparseInstance<double>& x, GradCheck& gc) {
  Rng unused(0);
  const std::vector<double> ratios(static_cast<std::size_t>(p.num_layers()) + 1, 0.0);
  auto forward = [&](const NfmParams<double>& q) {
    Rng r(0);
    return nfm_forward(q, x, Mode::train, ratios, r).score;
  };
  const auto trace = nfm_forward(p, x, Mode::train, ratios, unused);
  const auto g = nfm_backward(p, trace, 1.0);
  const double h = 1e-5;

  auto probe = [&](auto&& set, double at, double analytic) {
    auto q = p;
    set(q, at + h);
    const double up = forward(q);
    set(q, at - h);
    const double down = forward(q);
    const double fd = (up - down) / (2 * h);
    gc.worst = std::max(gc.worst, testutil::rel_error(analytic, fd));
    ++gc.checked;
  };

  probe([](auto& q, double v) { q.fm.bias = v; }, p.fm.bias, g.fm.bias);
  for (Index a = 0; a < static_cast<Index>(g.fm.active.size()); ++a) {
    const Index idx = g.fm.active[static_cast<std::size_t>(a)];
    probe([idx](auto& q, double v) { q.fm.linear[idx] = v; }, p.fm.linear[idx], g.fm.linear[a]);
    for (Index f = 0; f < p.num_factors(); ++f) {
      probe([idx, f](auto& q, double v) { q.fm.embeddings(idx, f) = v; }, p.fm.embeddings(idx, f),
            g.fm.embeddings(a, f));
    }
  }
  for (Index l = 0; l < p.num_layers(); ++l) {
    for (Index r = 0; r < p.hidden[l].weight.rows(); ++r) {
      probe([l, r](auto& q, double v) { q.hidden[l].bias[r] = v; }, p.hidden[l].bias[r],
            g.hidden[l].bias[r]);
      for (Index c = 0; c < p.hidden[l].weight.cols(); ++c) {
        probe([l, r, c](auto& q, double v) { q.hidden[l].weight(r, c) = v; },
              p.hidden[l].weight(r, c), g.hidden[l].weight(r, c));
      }
    }
  }
  for (Index i = 0; i < p.prediction.size(); ++i) {
    probe([i](auto& q, double v) { q.prediction[i] = v; }, p.prediction[i], g.prediction[i]);
  }
}

void criterion_3() {
  Rng rng(303);
  const auto t0 = std::chrono::steady_clock::now();
  GradCheck gc;

  auto random_network = [&](Activation act) {
    const Index n = 10, k = 1 + static_cast<Index>(rng.below(8));
    const Index L = static_cast<Index>(rng.below(3));
    std::vector<Index> dims;
    for (Index l = 0; l < L; ++l) dims.push_back(2 + static_cast<Index>(rng.below(7)));
    NfmArchitecture arch;
    arch.num_factors = k;
    arch.layer_dims = dims;
    arch.activation = act;
    auto p = make_nfm<double>(n, arch, rng.next_u64());
    p.fm.bias = 0.3 * rng.gaussian();
    for (Index i = 0; i < n; ++i) {
      p.fm.linear[i] = 0.3 * rng.gaussian();
      for (Index f = 0; f < k; ++f) p.fm.embeddings(i, f) = 0.5 * rng.gaussian();
    }
    for (auto& layer : p.hidden) {
      for (Index r = 0; r < layer.weight.rows(); ++r) {
        layer.bias[r] = 0.2 * rng.gaussian();
        for (Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = 0.4 * rng.gaussian();
      }
    }
    for (Index i = 0; i < p.prediction.size(); ++i) p.prediction[i] = 0.5 + rng.uniform();
    return p;
  };

  const Activation acts[] = {Activation::identity, Activation::tanh, Activation::sigmoid,
                             Activation::relu};
  int networks = 0;
  for (Activation act : acts) {
    int done = 0;
    while (done < 25) {
      const auto p = random_network(act);
      auto x = testutil::random_instance(rng, 10, 6);
      if (x.indices.empty()) continue;
      if (act == Activation::relu) {
        Rng r(0);
        const std::vector<double> ratios(static_cast<std::size_t>(p.num_layers()) + 1, 0.0);
        const auto t = nfm_forward(p, x, Mode::train, ratios, r);
        bool near_kink = false;
        for (const auto& pre : t.pre_activations) {
          if (pre.size() > 0 && pre.cwiseAbs().minCoeff() <= 1e-3) near_kink = true;
        }
        if (near_kink) continue;
      }
      fd_check_network(p, x, gc);
      ++done;
      ++networks;
    }
  }

  // the pooling partials in isolation
  double pooling_worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 10, k = 1 + static_cast<Index>(rng.below(8));
    auto m = testutil::random_fm(rng, n, k);
    auto x = testutil::random_instance(rng, n, 6);
    if (x.indices.empty()) continue;
    const auto u = embed(m, x);
    const Vector<double> sum = u.colwise().sum().transpose();
    for (Index a = 0; a < x.nnz(); ++a) {
      const Index idx = x.indices[a];
      for (Index f = 0; f < k; ++f) {
        const double analytic = x.values[a] * (sum[f] - u(a, f));
        const double h = 1e-5;
        auto at = [&](double v) {
          auto mm = m;
          mm.embeddings(idx, f) = v;
          return bi_interaction(embed(mm, x))[f];
        };
        const double fd = (at(m.embeddings(idx, f) + h) - at(m.embeddings(idx, f) - h)) / (2 * h);
        pooling_worst = std::max(pooling_worst, testutil::rel_error(analytic, fd));
      }
    }
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = gc.worst <= 1e-4 && pooling_worst <= 1e-4 && secs < 30.0;
  report(3, pass, "gradient oracle (central differences)",
         fmt("%d networks / %ld partials, worst rel err %.2e; pooling partials %.2e; %.1fs "
             "(gates 1e-4, 30s)",
             networks, gc.checked, gc.worst, pooling_worst, secs));
}

// --------------------------------------------------------------------------
// 4. scoring cost is linear in the number of non-zeros
// --------------------------------------------------------------------------

double median_seconds_per_call(const std::function<void()>& call) {
  std::vector<double> trials;
  for (int t = 0; t < 5; ++t) {
    int reps = 0;
    const auto t0 = std::chrono::steady_clock::now();
    double elapsed = 0;
    while (elapsed < 0.03) {
      call();
      ++reps;
      elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    trials.push_back(elapsed / reps);
  }
  std::sort(trials.begin(), trials.end());
  return trials[2];
}

void criterion_4() {
  const Index k = 64, n = 1100;
  Rng rng(404);
  const auto m = testutil::random_fm(rng, n, k, 0.1);
  const Index sizes[] = {10, 100, 1000};
  std::vector<double> log_n, log_t_score, log_t_pool;
  volatile double sink = 0;
  for (Index nnz : sizes) {
    SparseInstance<double> x;
    for (Index i = 0; i < nnz; ++i) {
      x.indices.push_back(i);
      x.values.push_back(1.0);
    }
    const double t_score = median_seconds_per_call([&] { sink += fm_score(m, x); });
    const auto u = embed(m, x);
    const double t_pool = median_seconds_per_call([&] { sink += bi_interaction(u)[0]; });
    log_n.push_back(std::log(static_cast<double>(nnz)));
    log_t_score.push_back(std::log(t_score));
    log_t_pool.push_back(std::log(t_pool));
  }
  auto slope = [](const std::vector<double>& xs, const std::vector<double>& ys) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };
  const double score_slope = slope(log_n, log_t_score);
  const double pool_slope = slope(log_n, log_t_pool);
  const bool pass = score_slope >= 0.8 && score_slope <= 1.2 && pool_slope >= 0.8 &&
                    pool_slope <= 1.2;
  report(4, pass, "linear-time scoring contract",
         fmt("log-log slope over nnz {10,100,1000} at k=64: scoring %.3f, pooling %.3f "
             "(gate [0.8, 1.2])",
             score_slope, pool_slope));
}

// --------------------------------------------------------------------------
// 10. batch normalization standardizes training batches
// --------------------------------------------------------------------------

void criterion_10() {
  Rng rng(1010);
  double worst_mean = 0, worst_var_gap = 0;
  double epsilon = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    const Index batch = 8 + static_cast<Index>(rng.below(250));
    const Index dim = 1 + static_cast<Index>(rng.below(16));
    Matrix<double> x(batch, dim);
    for (Index i = 0; i < batch; ++i) {
      for (Index j = 0; j < dim; ++j) x(i, j) = 4.0 * rng.gaussian() - 1.0;
    }
    BatchNormState<double> bn;
    bn.gamma = Vector<double>::Ones(dim);
    bn.beta = Vector<double>::Zero(dim);
    bn.running_mean = Vector<double>::Zero(dim);
    bn.running_var = Vector<double>::Ones(dim);
    epsilon = bn.epsilon;
    const auto r = batchnorm_forward(bn, x, Mode::train);
    for (Index j = 0; j < dim; ++j) {
      const double mean = r.output.col(j).mean();
      const double var = (r.output.col(j).array() - mean).square().mean();
      worst_mean = std::max(worst_mean, std::abs(mean));
      worst_var_gap = std::max(worst_var_gap, std::abs(var - 1.0));
    }
  }
  const bool pass = worst_mean <= 1e-9 && worst_var_gap <= epsilon;
  report(10, pass, "batch-norm standardization",
         fmt("worst |mean| %.2e (gate 1e-9), worst |var-1| %.2e (gate %g)", worst_mean,
             worst_var_gap, epsilon));
}

// --------------------------------------------------------------------------
// benchmark-backed criteria (5-9)
// --------------------------------------------------------------------------

struct Benchmark {
  Dataset<double> train, valid, test;
};

Benchmark build_benchmark() {
  std::fprintf(stderr, "building the synthetic benchmark corpus...\n");
  const auto logs = synth::generate_usage_logs(presets::frappe_synth());
  auto [positives, item_field] = synth::to_dataset(logs);
  const auto sampled = negative_sample(positives, item_field, 2, presets::kSeed);
  auto parts = split(sampled, {0.7, 0.2, 0.1, presets::kSeed});
  std::fprintf(stderr, "benchmark ready: %lld/%lld/%lld instances over %lld features\n",
               static_cast<long long>(parts[0].size()), static_cast<long long>(parts[1].size()),
               static_cast<long long>(parts[2].size()),
               static_cast<long long>(parts[0].num_features));
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

double best_valid(const std::vector<EpochReport>& reports) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : reports) best = std::min(best, r.valid_rmse);
  return best;
}

// First epoch whose validation RMSE is within `slack` of the run's best.
int epochs_to_converge(const std::vector<EpochReport>& reports, double slack = 0.005) {
  const double target = best_valid(reports) + slack;
  for (const auto& r : reports) {
    if (r.valid_rmse <= target) return r.epoch;
  }
  return reports.empty() ? 0 : reports.back().epoch;
}

void criterion_5(const Benchmark& bench) {
  const auto [params, reports] = fm_train(bench.train, bench.valid, presets::fm_table2());
  const double rmse = evaluate_rmse(params, bench.test);
  const bool pass = std::abs(rmse - 0.3437) <= 0.02;
  report(5, pass, "benchmark FM accuracy",
         fmt("test RMSE %.4f after %zu epochs (gate 0.3437 +- 0.02)", rmse, reports.size()));
}

void criterion_6(const Benchmark& bench, double nfm1_valid, double nfm0_valid) {
  const bool pass_1 = std::abs(nfm1_valid - 0.3133) <= 0.02;
  const bool pass_0 = std::abs(nfm0_valid - 0.3562) <= 0.02;
  report(6, pass_1 && pass_0, "benchmark NFM accuracy",
         fmt("one-layer valid RMSE %.4f (gate 0.3133 +- 0.02); zero-layer %.4f "
             "(gate 0.3562 +- 0.02)",
             nfm1_valid, nfm0_valid));
}

void criterion_7(double nfm1_relu, double nfm0, double id, double sigmoid, double tanh_rmse) {
  const double improvement = (nfm0 - nfm1_relu) / nfm0;
  const bool ordering = id > nfm1_relu && id > sigmoid && id > tanh_rmse;
  const bool pass = improvement >= 0.05 && ordering;
  report(7, pass, "hidden layer adds value, non-linearly",
         fmt("one-layer beats zero-layer by %.1f%% (gate >= 5%%); identity %.4f vs relu %.4f / "
             "sigmoid %.4f / tanh %.4f",
             100.0 * improvement, id, nfm1_relu, sigmoid, tanh_rmse));
}

void criterion_8(const Benchmark& bench) {
  // the pretraining source: an FM at the NFM's embedding size
  TrainConfig fm_config = presets::fm_table2();
  fm_config.factors = presets::kNfmFactors;
  const auto [fm_params, fm_reports] = fm_train(bench.train, bench.valid, fm_config);
  const std::string ckpt = "/tmp/nfm_acceptance_pretrain.ckpt";
  save_fm(fm_params, ckpt);

  const auto [pre_params, pre_reports] =
      nfm_train(bench.train, bench.valid, presets::nfm1_pretrain_study(ckpt));
  const auto [scratch_params, scratch_reports] =
      nfm_train(bench.train, bench.valid, presets::nfm1_pretrain_study(""));

  const int pre_epochs = epochs_to_converge(pre_reports);
  const int scratch_epochs = epochs_to_converge(scratch_reports);
  const bool pass = pre_epochs <= 5 && scratch_epochs >= 20;
  report(8, pass, "pretrained embeddings converge fast",
         fmt("within 0.005 of best valid RMSE after %d epochs pretrained vs %d from scratch "
             "(gates <= 5, >= 20); bests %.4f / %.4f",
             pre_epochs, scratch_epochs, best_valid(pre_reports), best_valid(scratch_reports)));
}

void criterion_9(const Benchmark& bench, const NfmParams<double>& nfm0_dropout,
                 const std::vector<EpochReport>& dropout_reports) {
  const auto [nodrop_params, nodrop_reports] =
      nfm_train(bench.train, bench.valid, presets::nfm0(0.0));

  // compare the models at their best-validation epochs
  double drop_valid = best_valid(dropout_reports), drop_train = 0;
  for (const auto& r : dropout_reports) {
    if (r.valid_rmse == drop_valid) drop_train = r.train_rmse;
  }
  double nodrop_valid = best_valid(nodrop_reports), nodrop_train = 0;
  for (const auto& r : nodrop_reports) {
    if (r.valid_rmse == nodrop_valid) nodrop_train = r.train_rmse;
  }

  // eval-mode scoring is deterministic: repeated predictions are bit-identical
  bool deterministic = true;
  for (int i = 0; i < 50; ++i) {
    const auto& x = bench.valid.instances[static_cast<std::size_t>(i * 7)];
    if (nfm_score(nfm0_dropout, x) != nfm_score(nfm0_dropout, x)) deterministic = false;
  }

  const bool pass =
      drop_train > nodrop_train && drop_valid < nodrop_valid && deterministic;
  report(9, pass, "dropout regularizes the pooling layer",
         fmt("train RMSE %.4f (dropout) > %.4f (none): %s; valid %.4f < %.4f: %s; eval "
             "bit-identical: %s",
             drop_train, nodrop_train, drop_train > nodrop_train ? "yes" : "NO", drop_valid,
             nodrop_valid, drop_valid < nodrop_valid ? "yes" : "NO",
             deterministic ? "yes" : "NO"));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  if (wanted(1)) criterion_1();
  if (wanted(2)) criterion_2();
  if (wanted(3)) criterion_3();
  if (wanted(4)) criterion_4();
  if (wanted(10)) criterion_10();

  const bool needs_benchmark = wanted(5) || wanted(6) || wanted(7) || wanted(8) || wanted(9);
  if (needs_benchmark) {
    const Benchmark bench = build_benchmark();

    if (wanted(5)) criterion_5(bench);

    std::unique_ptr<NfmParams<double>> nfm0_params;
    std::vector<EpochReport> nfm0_reports;
    double nfm0_valid = 0, nfm1_valid = 0;
    if (wanted(6) || wanted(7) || wanted(9)) {
      auto [p, r] = nfm_train(bench.train, bench.valid, presets::nfm0());
      nfm0_valid = best_valid(r);
      nfm0_params = std::make_unique<NfmParams<double>>(std::move(p));
      nfm0_reports = std::move(r);
    }
    if (wanted(6) || wanted(7)) {
      auto [p, r] = nfm_train(bench.train, bench.valid, presets::nfm1(Activation::relu));
      nfm1_valid = best_valid(r);
      if (wanted(6)) criterion_6(bench, nfm1_valid, nfm0_valid);
      if (wanted(7)) {
        auto run_act = [&](Activation act) {
          auto [pp, rr] = nfm_train(bench.train, bench.valid, presets::nfm1(act));
          return best_valid(rr);
        };
        const double id = run_act(Activation::identity);
        const double sig = run_act(Activation::sigmoid);
        const double tan = run_act(Activation::tanh);
        criterion_7(nfm1_valid, nfm0_valid, id, sig, tan);
      }
    }
    if (wanted(8)) criterion_8(bench);
    if (wanted(9)) criterion_9(bench, *nfm0_params, nfm0_reports);
  }

  if (failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criterion(s) failed\n", failures);
  return 1;
}
