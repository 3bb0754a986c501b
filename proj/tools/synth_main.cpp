// Writes a synthetic usage-log TSV shaped like the Frappe (context-aware app
// usage) or MovieLens (user-movie-tag) corpora, for running the benchmark
// pipeline when the original dumps are not available locally.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "nfm/synth.hpp"

using namespace nfm;

int main(int argc, char** argv) {
  CLI::App app{"Synthetic usage-log generator"};

  std::string dataset = "frappe";
  std::string out_path;
  std::uint64_t seed = 0;
  long long num_logs = 0;
  long long num_users = 0;
  long long num_items = 0;

  app.add_option("--dataset", dataset, "frappe or movielens");
  app.add_option("--out", out_path, "output TSV path")->required();
  app.add_option("--seed", seed, "override the generator seed");
  app.add_option("--logs", num_logs, "override the number of logs");
  app.add_option("--users", num_users, "override the number of users");
  app.add_option("--items", num_items, "override the number of items/tags");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    synth::UsageLogConfig config;
    if (dataset == "movielens") {
      config = synth::movielens_like();
    } else if (dataset != "frappe") {
      std::cerr << "usage error: --dataset must be frappe or movielens\n";
      return 2;
    }
    if (seed != 0) config.seed = seed;
    if (num_logs > 0) config.num_logs = num_logs;
    if (num_users > 0) config.num_users = num_users;
    if (num_items > 0) config.num_items = num_items;

    std::cerr << "generating " << config.num_logs << " logs (" << config.num_users << " users, "
              << config.num_items << " items, " << config.num_features() << " features)...\n";
    const auto logs = synth::generate_usage_logs(config);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + out_path + " for writing");
    synth::write_raw_tsv(logs, out);
    std::cout << "wrote " << logs.rows.size() << " logs to " << out_path << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
