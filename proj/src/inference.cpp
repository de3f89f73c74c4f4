#include "bcvnn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <ostream>
#include <thread>

#include "bcvnn/csv.hpp"
#include "bcvnn/error.hpp"

namespace bcvnn {

double MCPrediction::confidence() const {
  return mean_probs.empty() ? 0.0 : *std::max_element(mean_probs.begin(), mean_probs.end());
}

double MCPrediction::mean_std() const {
  if (std_probs.empty()) return 0.0;
  return std::accumulate(std_probs.begin(), std_probs.end(), 0.0) / static_cast<double>(std_probs.size());
}

MCPrediction mc_predict(const NetworkSpec& spec, const NetworkWeights& weights, const ComplexTensor& input,
                        std::size_t samples, Rng& rng) {
  require(samples >= 1, ErrorCode::InvalidArgument, "MC sample count must be >= 1");
  require(input.shape() == spec.input_shape, ErrorCode::ShapeMismatch,
          "input " + shape_to_string(input.shape()) + " does not match network input " +
              shape_to_string(spec.input_shape));
  std::vector<std::vector<double>> draws;
  draws.reserve(samples);
  for (std::size_t t = 0; t < samples; ++t) {
    draws.push_back(class_probabilities(forward(spec, weights, input, true, rng)));
  }
  const std::size_t classes = spec.classes;
  const double inv_t = 1.0 / static_cast<double>(samples);
  MCPrediction p;
  p.samples_used = samples;
  p.mean_probs.assign(classes, 0.0);
  p.std_probs.assign(classes, 0.0);
  for (const auto& d : draws) {
    for (std::size_t k = 0; k < classes; ++k) p.mean_probs[k] += d[k];
  }
  for (auto& m : p.mean_probs) m *= inv_t;
  for (const auto& d : draws) {
    for (std::size_t k = 0; k < classes; ++k) {
      const double dev = d[k] - p.mean_probs[k];
      p.std_probs[k] += dev * dev;
    }
  }
  for (std::size_t k = 0; k < classes; ++k) {
    // Identical draws give exactly zero, whatever rounding the mean picked up.
    const bool constant = std::all_of(draws.begin(), draws.end(), [&](const auto& d) { return d[k] == draws[0][k]; });
    p.std_probs[k] = constant ? 0.0 : std::sqrt(p.std_probs[k] * inv_t);
  }
  p.predicted_class =
      static_cast<std::size_t>(std::max_element(p.mean_probs.begin(), p.mean_probs.end()) - p.mean_probs.begin());
  return p;
}

std::vector<MCPrediction> mc_predict_dataset(const NetworkSpec& spec, const NetworkWeights& weights,
                                             const Dataset& data, std::size_t samples, std::uint64_t seed,
                                             unsigned threads) {
  validate(spec);
  check_weights(spec, weights);
  std::vector<MCPrediction> out(data.size());
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(Rng::derive(seed, {i}));
      out[i] = mc_predict(spec, weights, data.inputs[i], samples, rng);
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1 || data.size() < 2) {
    run(0, data.size());
    return out;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (data.size() + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = std::min(data.size(), t * chunk);
    const std::size_t end = std::min(data.size(), begin + chunk);
    pool.emplace_back([&, t, begin, end] {
      try {
        run(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

double accuracy(std::span<const MCPrediction> predictions, std::span<const int> labels) {
  require(!predictions.empty(), ErrorCode::InvalidArgument, "accuracy of an empty prediction set");
  require(predictions.size() == labels.size(), ErrorCode::InvalidArgument, "prediction and label counts differ");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (labels[i] >= 0 && predictions[i].predicted_class == static_cast<std::size_t>(labels[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::size_t calibration_bin(double confidence, std::size_t n_bins) {
  require(confidence >= 0.0 && confidence <= 1.0, ErrorCode::InvalidArgument,
          "confidence " + std::to_string(confidence) + " outside [0, 1]");
  if (confidence == 0.0) return 0;
  const auto k = static_cast<std::size_t>(std::ceil(confidence * static_cast<double>(n_bins)));
  return std::min(k, n_bins) - 1;
}

std::vector<CalibrationBin> calibration_bins(std::span<const double> confidences, std::span<const bool> correct,
                                             std::size_t n_bins) {
  require(n_bins >= 1, ErrorCode::InvalidArgument, "n_bins must be >= 1");
  require(confidences.size() == correct.size(), ErrorCode::InvalidArgument,
          "confidence and correctness lengths differ");
  std::vector<CalibrationBin> bins(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].lower = static_cast<double>(b) / static_cast<double>(n_bins);
    bins[b].upper = static_cast<double>(b + 1) / static_cast<double>(n_bins);
  }
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    auto& bin = bins[calibration_bin(confidences[i], n_bins)];
    bin.confidence += confidences[i];
    bin.accuracy += correct[i] ? 1.0 : 0.0;
    ++bin.count;
  }
  for (auto& bin : bins) {
    if (bin.count == 0) continue;
    bin.confidence /= static_cast<double>(bin.count);
    bin.accuracy /= static_cast<double>(bin.count);
  }
  return bins;
}

namespace {

double ece_from_bins(const std::vector<CalibrationBin>& bins, std::size_t total) {
  if (total == 0) return 0.0;
  double e = 0.0;
  for (const auto& bin : bins) {
    e += static_cast<double>(bin.count) / static_cast<double>(total) * std::abs(bin.accuracy - bin.confidence);
  }
  return e;
}

}  // namespace

double ece(std::span<const double> confidences, std::span<const bool> correct, std::size_t n_bins) {
  return ece_from_bins(calibration_bins(confidences, correct, n_bins), confidences.size());
}

EvalReport evaluate(std::span<const MCPrediction> predictions, std::span<const int> labels, std::size_t n_bins) {
  EvalReport report;
  report.accuracy = accuracy(predictions, labels);
  std::vector<double> conf(predictions.size());
  // std::vector<bool> is not contiguous, so spans need a plain array.
  auto flags = std::make_unique<bool[]>(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    conf[i] = std::clamp(predictions[i].confidence(), 0.0, 1.0);
    flags[i] = predictions[i].predicted_class == static_cast<std::size_t>(labels[i]);
  }
  std::span<const bool> correct(flags.get(), predictions.size());
  report.bins = calibration_bins(conf, correct, n_bins);
  report.ece = ece_from_bins(report.bins, conf.size());
  return report;
}

void write_predictions_csv(std::ostream& out, std::span<const MCPrediction> predictions, std::span<const int> labels,
                           const EvalReport& report) {
  csv::write_row(out, {"index", "predicted_class", "label", "confidence", "mean_std"});
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    csv::write_row(out, {std::to_string(i), std::to_string(predictions[i].predicted_class), std::to_string(labels[i]),
                         csv::format_double(predictions[i].confidence()),
                         csv::format_double(predictions[i].mean_std())});
  }
  csv::write_row(out, {"summary", "accuracy", csv::format_double(report.accuracy), "ece", csv::format_double(report.ece)});
}

}  // namespace bcvnn
