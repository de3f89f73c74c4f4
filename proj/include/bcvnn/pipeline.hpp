#pragma once

#include "bcvnn/inference.hpp"
#include "bcvnn/search.hpp"

namespace bcvnn {

struct PipelineConfig {
  TrainConfig train;
  std::size_t mc_samples = kDefaultMcSamples;
  std::uint64_t eval_seed = 1;
  std::size_t ece_bins = kDefaultEceBins;
};

/// Genome -> (accuracy, ece) by training the network with that genome on
/// train_data and MC-evaluating on test_data. Deterministic per genome.
EvaluatorFn training_evaluator(NetworkSpec spec, Dataset train_data, Dataset test_data, PipelineConfig config);

/// Train with the given genome and return test-set metrics.
Metrics train_and_evaluate(const NetworkSpec& spec, const Genome& genome, const Dataset& train_data,
                           const Dataset& test_data, const PipelineConfig& config);

}  // namespace bcvnn
