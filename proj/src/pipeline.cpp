#include "bcvnn/pipeline.hpp"

#include <memory>

namespace bcvnn {

Metrics train_and_evaluate(const NetworkSpec& spec, const Genome& genome, const Dataset& train_data,
                           const Dataset& test_data, const PipelineConfig& config) {
  const auto configured = with_genome(spec, genome);
  const auto trained = train(configured, train_data, config.train);
  const auto predictions =
      mc_predict_dataset(configured, trained.weights, test_data, config.mc_samples, config.eval_seed);
  const auto report = evaluate(predictions, test_data.labels, config.ece_bins);
  return {report.accuracy, report.ece};
}

EvaluatorFn training_evaluator(NetworkSpec spec, Dataset train_data, Dataset test_data, PipelineConfig config) {
  validate(spec);
  validate(train_data);
  validate(test_data);
  auto state = std::make_shared<const std::tuple<NetworkSpec, Dataset, Dataset, PipelineConfig>>(
      std::move(spec), std::move(train_data), std::move(test_data), config);
  return [state](const Genome& genome) {
    const auto& [s, tr, te, cfg] = *state;
    return train_and_evaluate(s, genome, tr, te, cfg);
  };
}

}  // namespace bcvnn
