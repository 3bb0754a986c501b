#pragma once

#include "nfm/synth.hpp"
#include "nfm/train.hpp"
#include "nfm/types.hpp"

// The pinned benchmark configurations. Hyperparameters were tuned on the
// validation split of the synthetic Frappe-shaped benchmark over the grids
// lr in {0.005, 0.01, 0.02, 0.05}, L2 in {1e-6, 5e-6, ..., 1e-1} and dropout
// in {0, 0.1, ..., 0.9}; both the reproduce presets and the acceptance suite
// read them from here.

namespace nfm::presets {

inline constexpr std::uint64_t kSeed = 2017;
inline constexpr Index kBatchSize = 128;
inline constexpr int kMaxEpochs = 100;
inline constexpr int kPatience = 4;

inline constexpr Index kFmFactors = 128;
inline constexpr double kFmLearningRate = 0.05;
inline constexpr double kFmL2 = 1e-5;

inline constexpr Index kNfmFactors = 64;
inline constexpr double kNfmLearningRate = 0.05;
inline constexpr double kBiDropout = 0.3;
inline constexpr double kHiddenDropout = 0.3;
inline constexpr double kPretrainLearningRate = 0.01;

inline TrainConfig base_config(std::uint64_t seed = kSeed) {
  TrainConfig c;
  c.batch_size = kBatchSize;
  c.max_epochs = kMaxEpochs;
  c.early_stop_patience = kPatience;
  c.seed = seed;
  return c;
}

// Table-2 protocol: FM with 128 factors, tuned lr and embedding L2.
inline TrainConfig fm_table2(std::uint64_t seed = kSeed) {
  TrainConfig c = base_config(seed);
  c.factors = kFmFactors;
  c.learning_rate = kFmLearningRate;
  c.l2_embedding = kFmL2;
  return c;
}

// Zero-hidden-layer NFM regularized by dropout on the pooling output.
inline TrainConfig nfm0(double dropout = kBiDropout, std::uint64_t seed = kSeed) {
  TrainConfig c = base_config(seed);
  c.factors = kNfmFactors;
  c.learning_rate = kNfmLearningRate;
  c.dropout_ratios = {dropout};
  return c;
}

// One hidden layer of the embedding size.
inline TrainConfig nfm1(Activation activation = Activation::relu, std::uint64_t seed = kSeed) {
  TrainConfig c = base_config(seed);
  c.factors = kNfmFactors;
  c.learning_rate = kNfmLearningRate;
  c.layer_dims = {kNfmFactors};
  c.activation = activation;
  c.dropout_ratios = {kBiDropout, kHiddenDropout};
  return c;
}

// The pretraining study runs with batch norm, matching the convergence-speed
// protocol; the same configuration serves the from-scratch baseline.
inline TrainConfig nfm1_pretrain_study(const std::string& fm_checkpoint,
                                       std::uint64_t seed = kSeed) {
  TrainConfig c = nfm1(Activation::relu, seed);
  c.learning_rate = kPretrainLearningRate;
  c.bn_enabled = true;
  c.pretrain = fm_checkpoint;
  return c;
}

inline synth::UsageLogConfig frappe_synth() { return synth::UsageLogConfig{}; }

inline synth::UsageLogConfig movielens_synth() { return synth::movielens_like(); }

}  // namespace nfm::presets
