#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "bcvnn/training.hpp"

namespace bcvnn {

/// Sampling number used when the caller does not pick one.
inline constexpr std::size_t kDefaultMcSamples = 3;
inline constexpr std::size_t kDefaultEceBins = 15;

struct MCPrediction {
  std::vector<double> mean_probs;
  std::vector<double> std_probs;  // population std over the samples
  std::size_t predicted_class = 0;
  std::size_t samples_used = 0;

  double confidence() const;
  double mean_std() const;

  friend bool operator==(const MCPrediction&, const MCPrediction&) = default;
};

/// T stochastic forwards, all drawing from rng in sequence.
MCPrediction mc_predict(const NetworkSpec& spec, const NetworkWeights& weights, const ComplexTensor& input,
                        std::size_t samples, Rng& rng);

/// mc_predict for every input; input i uses Rng(derive(seed, {i})) so results
/// do not depend on thread count.
std::vector<MCPrediction> mc_predict_dataset(const NetworkSpec& spec, const NetworkWeights& weights,
                                             const Dataset& data, std::size_t samples, std::uint64_t seed,
                                             unsigned threads = 1);

double accuracy(std::span<const MCPrediction> predictions, std::span<const int> labels);

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  double confidence = 0.0;  // mean confidence in the bin, 0 if empty
  double accuracy = 0.0;    // fraction correct in the bin, 0 if empty
  std::size_t count = 0;
};

/// Bin index for confidence c with equal-width bins ((k-1)/B, k/B]; c == 0
/// goes to the first bin.
std::size_t calibration_bin(double confidence, std::size_t n_bins);

std::vector<CalibrationBin> calibration_bins(std::span<const double> confidences, std::span<const bool> correct,
                                             std::size_t n_bins);

double ece(std::span<const double> confidences, std::span<const bool> correct, std::size_t n_bins = kDefaultEceBins);

struct EvalReport {
  double accuracy = 0.0;
  double ece = 0.0;
  std::vector<CalibrationBin> bins;
};

EvalReport evaluate(std::span<const MCPrediction> predictions, std::span<const int> labels,
                    std::size_t n_bins = kDefaultEceBins);

/// Per-input rows (index,predicted_class,label,confidence,mean_std) followed by
/// a summary row.
void write_predictions_csv(std::ostream& out, std::span<const MCPrediction> predictions, std::span<const int> labels,
                           const EvalReport& report);

}  // namespace bcvnn
