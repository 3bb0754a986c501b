// Experiment runner: data preparation, FM/NFM training and evaluation, and
// the named reproduction presets that regenerate the benchmark tables as CSV.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nfm/checkpoint.hpp"
#include "nfm/data.hpp"
#include "nfm/encode.hpp"
#include "nfm/metrics.hpp"
#include "nfm/presets.hpp"
#include "nfm/synth.hpp"
#include "nfm/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace nfm;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split_commas(s)) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw UsageError("expected a comma-separated list of numbers, got '" + s + "'");
    }
  }
  return out;
}

std::vector<Index> parse_index_list(const std::string& s) {
  std::vector<Index> out;
  for (double v : parse_double_list(s)) out.push_back(static_cast<Index>(v));
  return out;
}

Dataset<double> load_libfm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return parse_libfm<double>(in);
  } catch (const ParseError& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

// The feature space is defined over the full pre-split corpus, so a loaded
// train/valid/test triple must agree on the widest num_features seen.
void align_features(std::vector<Dataset<double>*> parts) {
  Index n = 1;
  for (const auto* p : parts) n = std::max(n, p->num_features);
  for (auto* p : parts) p->num_features = n;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << contents;
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string raw_path;
  std::string columns = "user,item,daytime,weekday,isweekend,homework,cost,weather,country,city";
  std::string item_column = "item";
  int neg_ratio = 2;
  std::string split_fractions = "0.7,0.2,0.1";
  std::uint64_t seed = 2017;
  std::string out_dir;
};

int run_prepare(const PrepareArgs& args) {
  const auto columns = split_commas(args.columns);
  const auto fractions = parse_double_list(args.split_fractions);
  if (fractions.size() != 3) throw UsageError("--split needs exactly three fractions");
  bool has_item = false;
  for (const auto& c : columns) has_item |= (c == args.item_column);
  if (!has_item) throw UsageError("--item-column must be one of --columns");

  std::ifstream raw(args.raw_path);
  if (!raw) throw std::runtime_error("cannot open " + args.raw_path);
  const auto table = read_tsv(raw);
  auto [positives, layout] = encode_one_hot(table, columns);
  std::cerr << "encoded " << positives.size() << " logs over " << positives.num_features
            << " one-hot features\n";

  const FeatureRange item_field = layout.column(args.item_column).range();
  const auto sampled = negative_sample(positives, item_field, args.neg_ratio, args.seed);
  const auto parts = split(sampled, {fractions[0], fractions[1], fractions[2], args.seed});

  fs::create_directories(args.out_dir);
  const char* names[3] = {"train.libfm", "valid.libfm", "test.libfm"};
  for (int i = 0; i < 3; ++i) {
    std::ostringstream buf;
    write_libfm(parts[static_cast<std::size_t>(i)], buf);
    write_file((fs::path(args.out_dir) / names[i]).string(), buf.str());
  }

  json meta;
  meta["num_features"] = positives.num_features;
  meta["instances"] = sampled.size();
  meta["positives"] = positives.size();
  meta["negative_ratio"] = args.neg_ratio;
  meta["seed"] = args.seed;
  meta["item_column"] = args.item_column;
  meta["split"] = {parts[0].size(), parts[1].size(), parts[2].size()};
  meta["columns"] = json::array();
  for (const auto& col : layout.columns) {
    meta["columns"].push_back(
        {{"name", col.name}, {"offset", col.offset}, {"cardinality", col.size()}});
  }
  write_file((fs::path(args.out_dir) / "meta.json").string(), meta.dump(2) + "\n");

  std::cout << "wrote " << parts[0].size() << "/" << parts[1].size() << "/" << parts[2].size()
            << " train/valid/test instances to " << args.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string method = "nfm";
  std::string train_path, valid_path;
  std::string checkpoint_out, epochs_csv;
  Index factors = 64;
  std::string layers;          // comma list, empty = no hidden layers
  std::string activation = "relu";
  std::string pooling = "bi";
  std::string dropout;         // comma list
  double lr = 0.02;
  double l2 = 0.0;
  Index batch_size = 128;
  int max_epochs = 100;
  int patience = 4;
  bool bn = false;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;
  double adagrad_epsilon = 1e-8;
  std::uint64_t seed = 2017;
  std::string pretrain;
  bool quiet = false;
};

TrainConfig to_config(const TrainArgs& args) {
  TrainConfig config;
  config.learning_rate = args.lr;
  config.batch_size = args.batch_size;
  config.max_epochs = args.max_epochs;
  config.early_stop_patience = args.patience;
  config.dropout_ratios = args.dropout.empty() ? std::vector<double>{} : parse_double_list(args.dropout);
  config.l2_embedding = args.l2;
  config.bn_enabled = args.bn;
  config.activation = parse_activation(args.activation);
  config.factors = args.factors;
  config.layer_dims = args.layers.empty() ? std::vector<Index>{} : parse_index_list(args.layers);
  config.pooling = parse_pooling(args.pooling);
  config.seed = args.seed;
  config.pretrain = args.pretrain;
  config.adagrad_epsilon = args.adagrad_epsilon;
  config.bn_momentum = args.bn_momentum;
  config.bn_epsilon = args.bn_epsilon;
  config.verbose = !args.quiet;
  return config;
}

int run_train(const TrainArgs& args) {
  auto train = load_libfm_file(args.train_path);
  auto valid = load_libfm_file(args.valid_path);
  align_features({&train, &valid});

  const TrainConfig config = to_config(args);
  if (args.method == "fm") {
    const auto [params, reports] = fm_train(train, valid, config);
    if (!args.checkpoint_out.empty()) save_fm(params, args.checkpoint_out);
    if (!args.epochs_csv.empty()) {
      std::ofstream csv(args.epochs_csv);
      write_epoch_csv(csv, reports);
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : reports) best = std::min(best, r.valid_rmse);
    std::cout << "fm: best valid RMSE " << best << " over " << reports.size() << " epochs, "
              << count_parameters(params) << " parameters\n";
  } else if (args.method == "nfm") {
    const auto [params, reports] = nfm_train(train, valid, config);
    if (!args.checkpoint_out.empty()) save_nfm(params, args.checkpoint_out);
    if (!args.epochs_csv.empty()) {
      std::ofstream csv(args.epochs_csv);
      write_epoch_csv(csv, reports);
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : reports) best = std::min(best, r.valid_rmse);
    std::cout << "nfm: best valid RMSE " << best << " over " << reports.size() << " epochs, "
              << count_parameters(params) << " parameters\n";
  } else {
    throw UsageError("--method must be fm or nfm");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string data_path;
  std::string clip = "-1,1";
};

int run_evaluate(const EvaluateArgs& args) {
  auto data = load_libfm_file(args.data_path);
  const auto clip_values = parse_double_list(args.clip);
  if (clip_values.size() != 2 || clip_values[0] >= clip_values[1]) {
    throw UsageError("--clip needs 'lo,hi' with lo < hi");
  }
  const ClipRange clip{clip_values[0], clip_values[1]};

  // sniff the checkpoint kind from the magic header
  std::ifstream in(args.checkpoint, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + args.checkpoint);
  char magic[8] = {};
  in.read(magic, 8);
  in.seekg(0);
  if (std::string_view(magic, 8) == std::string_view(detail::kFmMagic, 8)) {
    const auto params = load_fm(in);
    data.num_features = std::max(data.num_features, params.num_features());
    std::printf("model fm  parameters %lld\n",
                static_cast<long long>(count_parameters(params)));
    std::printf("rmse %.6f\n", evaluate_rmse(params, data, clip));
  } else {
    const auto params = load_nfm(in);
    data.num_features = std::max(data.num_features, params.num_features());
    std::printf("model nfm  parameters %lld\n",
                static_cast<long long>(count_parameters(params)));
    std::printf("rmse %.6f\n", evaluate_rmse(params, data, clip));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------------

struct ReproduceArgs {
  std::string preset;
  std::string data_dir;
  std::string out_csv = "results.csv";
  std::uint64_t seed = 2017;
  bool quiet = false;
};

struct RunResult {
  std::string method;
  Index factors;
  std::string layers;
  std::string dropout;
  double lr;
  std::uint64_t seed;
  double valid_rmse;
  double test_rmse;
  Index params;
};

void append_results_csv(const std::string& path, const std::vector<RunResult>& rows) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  if (fresh) out << "method,factors,layers,dropout,lr,seed,valid_rmse,test_rmse,params\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%lld,%s,%s,%g,%llu,%.6f,%.6f,%lld\n", r.method.c_str(),
                  static_cast<long long>(r.factors), r.layers.c_str(), r.dropout.c_str(), r.lr,
                  static_cast<unsigned long long>(r.seed), r.valid_rmse, r.test_rmse,
                  static_cast<long long>(r.params));
    out << line;
  }
}

std::string join_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v[i]);
    out += (i ? "|" : "") + std::string(buf);
  }
  return out.empty() ? "-" : out;
}

std::string join_dims(const std::vector<Index>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out += (i ? "|" : "") + std::to_string(v[i]);
  }
  return out.empty() ? "-" : out;
}

struct LoadedSplits {
  Dataset<double> train, valid, test;
};

LoadedSplits load_splits(const std::string& dir) {
  LoadedSplits s;
  s.train = load_libfm_file((fs::path(dir) / "train.libfm").string());
  s.valid = load_libfm_file((fs::path(dir) / "valid.libfm").string());
  s.test = load_libfm_file((fs::path(dir) / "test.libfm").string());
  align_features({&s.train, &s.valid, &s.test});
  return s;
}

RunResult run_fm(const LoadedSplits& s, TrainConfig config, const std::string& label) {
  const auto [params, reports] = fm_train(s.train, s.valid, config);
  RunResult r;
  r.method = label;
  r.factors = config.factors;
  r.layers = "-";
  r.dropout = "-";
  r.lr = config.learning_rate;
  r.seed = config.seed;
  r.valid_rmse = evaluate_rmse(params, s.valid);
  r.test_rmse = evaluate_rmse(params, s.test);
  r.params = count_parameters(params);
  std::printf("%-16s valid %.4f  test %.4f  (%lld params)\n", label.c_str(), r.valid_rmse,
              r.test_rmse, static_cast<long long>(r.params));
  return r;
}

RunResult run_nfm(const LoadedSplits& s, TrainConfig config, const std::string& label) {
  const auto [params, reports] = nfm_train(s.train, s.valid, config);
  RunResult r;
  r.method = label;
  r.factors = config.factors;
  r.layers = join_dims(config.layer_dims);
  r.dropout = join_list(config.dropout_ratios);
  r.lr = config.learning_rate;
  r.seed = config.seed;
  r.valid_rmse = evaluate_rmse(params, s.valid);
  r.test_rmse = evaluate_rmse(params, s.test);
  r.params = count_parameters(params);
  std::printf("%-16s valid %.4f  test %.4f  (%lld params)\n", label.c_str(), r.valid_rmse,
              r.test_rmse, static_cast<long long>(r.params));
  return r;
}

const std::set<std::string> kPresets = {"table2-frappe-fm", "table3-frappe",
                                        "frappe-activations", "frappe-dropout",
                                        "frappe-pretrain"};

int run_reproduce(const ReproduceArgs& args) {
  if (!kPresets.count(args.preset)) {
    std::string names;
    for (const auto& p : kPresets) names += (names.empty() ? "" : ", ") + p;
    throw UsageError("unknown preset '" + args.preset + "' (available: " + names + ")");
  }
  const auto s = load_splits(args.data_dir);
  std::vector<RunResult> rows;
  auto with_verbosity = [&](TrainConfig c) {
    c.verbose = !args.quiet;
    return c;
  };

  if (args.preset == "table2-frappe-fm") {
    rows.push_back(run_fm(s, with_verbosity(presets::fm_table2(args.seed)), "fm"));
  } else if (args.preset == "table3-frappe") {
    rows.push_back(run_nfm(s, with_verbosity(presets::nfm0(presets::kBiDropout, args.seed)), "nfm-0"));
    rows.push_back(run_nfm(s, with_verbosity(presets::nfm1(Activation::relu, args.seed)), "nfm-1"));
  } else if (args.preset == "frappe-activations") {
    for (Activation act : {Activation::identity, Activation::relu, Activation::sigmoid,
                           Activation::tanh}) {
      rows.push_back(run_nfm(s, with_verbosity(presets::nfm1(act, args.seed)),
                             std::string("nfm-1-") + to_string(act)));
    }
  } else if (args.preset == "frappe-dropout") {
    for (double ratio : {0.0, presets::kBiDropout}) {
      char label[32];
      std::snprintf(label, sizeof(label), "nfm-0-d%g", ratio);
      rows.push_back(run_nfm(s, with_verbosity(presets::nfm0(ratio, args.seed)), label));
    }
  } else if (args.preset == "frappe-pretrain") {
    TrainConfig cfm = presets::fm_table2(args.seed);
    cfm.factors = presets::kNfmFactors;
    cfm.verbose = !args.quiet;
    const auto [fm_params, fm_reports] = fm_train(s.train, s.valid, cfm);
    const auto ckpt = fs::temp_directory_path() / "nfm_pretrain_fm.ckpt";
    save_fm(fm_params, ckpt.string());

    for (bool pretrained : {true, false}) {
      TrainConfig c = presets::nfm1_pretrain_study(pretrained ? ckpt.string() : "", args.seed);
      c.verbose = !args.quiet;
      rows.push_back(run_nfm(s, c, pretrained ? "nfm-1-pretrain" : "nfm-1-scratch"));
    }
  }

  append_results_csv(args.out_csv, rows);
  std::cout << "appended " << rows.size() << " rows to " << args.out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factorization-machine and neural-FM experiment harness"};
  app.require_subcommand(1);

  PrepareArgs prepare_args;
  auto* prepare = app.add_subcommand(
      "prepare", "One-hot encode raw logs, add sampled negatives, split and write libfm files");
  prepare->add_option("--raw", prepare_args.raw_path, "raw TSV log file (header line required)")
      ->required()
      ->check(CLI::ExistingFile);
  prepare->add_option("--columns", prepare_args.columns, "comma-separated columns to encode");
  prepare->add_option("--item-column", prepare_args.item_column,
                      "column whose values are replaced in sampled negatives");
  prepare->add_option("--neg-ratio", prepare_args.neg_ratio, "negatives per positive")
      ->check(CLI::PositiveNumber);
  prepare->add_option("--split", prepare_args.split_fractions, "train,valid,test fractions");
  prepare->add_option("--seed", prepare_args.seed, "sampling and shuffling seed");
  prepare->add_option("--out", prepare_args.out_dir, "output directory")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train an FM or NFM on prepared libfm files");
  train->add_option("--method", train_args.method, "fm or nfm");
  train->add_option("--train", train_args.train_path, "training libfm file")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--valid", train_args.valid_path, "validation libfm file")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--factors", train_args.factors, "embedding size k");
  train->add_option("--layers", train_args.layers, "hidden layer sizes, e.g. 64 or 64,32");
  train->add_option("--activation", train_args.activation, "identity|relu|sigmoid|tanh");
  train->add_option("--pooling", train_args.pooling, "bi|concat|average");
  train->add_option("--dropout", train_args.dropout,
                    "dropout ratios: pooling layer first, then one per hidden layer");
  train->add_option("--lr", train_args.lr, "Adagrad learning rate");
  train->add_option("--l2", train_args.l2, "L2 weight on the embedding matrix");
  train->add_option("--batch-size", train_args.batch_size, "mini-batch size");
  train->add_option("--max-epochs", train_args.max_epochs, "epoch budget");
  train->add_option("--patience", train_args.patience, "early-stopping patience in epochs");
  train->add_flag("--bn", train_args.bn, "enable batch normalization");
  train->add_option("--bn-momentum", train_args.bn_momentum, "running-statistics momentum");
  train->add_option("--bn-epsilon", train_args.bn_epsilon, "batch-norm epsilon");
  train->add_option("--adagrad-epsilon", train_args.adagrad_epsilon, "Adagrad epsilon");
  train->add_option("--seed", train_args.seed, "run seed");
  train->add_option("--pretrain", train_args.pretrain, "FM checkpoint to initialize embeddings")
      ->check(CLI::ExistingFile);
  train->add_option("--checkpoint", train_args.checkpoint_out, "output checkpoint path");
  train->add_option("--epochs-csv", train_args.epochs_csv, "per-epoch CSV output path");
  train->add_flag("--quiet", train_args.quiet, "suppress per-epoch progress");

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Clipped test RMSE of a checkpoint");
  evaluate->add_option("--checkpoint", eval_args.checkpoint, "FM or NFM checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--data", eval_args.data_path, "libfm file to score")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--clip", eval_args.clip, "prediction clipping range lo,hi");

  ReproduceArgs repro_args;
  auto* reproduce = app.add_subcommand("reproduce", "Run a named benchmark preset");
  reproduce->add_option("--preset", repro_args.preset, "preset name")->required();
  reproduce->add_option("--data", repro_args.data_dir, "directory with train/valid/test.libfm")
      ->required()
      ->check(CLI::ExistingDirectory);
  reproduce->add_option("--out", repro_args.out_csv, "results CSV (appended)");
  reproduce->add_option("--seed", repro_args.seed, "run seed");
  reproduce->add_flag("--quiet", repro_args.quiet, "suppress per-epoch progress");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*prepare) return run_prepare(prepare_args);
    if (*train) return run_train(train_args);
    if (*evaluate) return run_evaluate(eval_args);
    if (*reproduce) return run_reproduce(repro_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
