#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "bcvnn/network.hpp"

namespace bcvnn {

struct Dataset {
  std::vector<ComplexTensor> inputs;
  std::vector<int> labels;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return inputs.size(); }
};

/// Throws unless lengths match, labels are in range, shapes agree and every
/// value is finite.
void validate(const Dataset& data);

/// Rows [first, first + count) as a new dataset.
Dataset slice(const Dataset& data, std::size_t first, std::size_t count);

/// Stacks samples into one [N, ...] tensor.
ComplexTensor stack_inputs(const Dataset& data, std::span<const std::size_t> rows);

enum class Optimizer { Sgd, Momentum };

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double weight_decay = 1e-4;
  Optimizer optimizer = Optimizer::Momentum;
  double momentum = 0.9;
  std::uint64_t seed = 1;
};

void validate(const TrainConfig& config);

/// Softmax over logit magnitudes.
std::vector<double> class_probabilities(const ComplexTensor& logits);

/// -log softmax(|logits|)[label].
double cross_entropy(const ComplexTensor& logits, int label);

/// lambda * sum over layers of (|M_real|^2 + |M_imag|^2); biases excluded.
double weight_decay_penalty(const NetworkWeights& weights, double lambda);

/// Cross entropy plus the weight decay penalty.
double loss(const ComplexTensor& logits, int label, const NetworkWeights& weights, double lambda);

struct BatchGradient {
  double loss = 0.0;  // mean cross entropy over the batch + decay penalty
  std::size_t correct = 0;
  NetworkWeights gradients;
};

/// Forward with freshly drawn dropout masks (when stochastic), then split-part
/// backprop reusing those masks. inputs is [N, input_shape...].
BatchGradient backward(const NetworkSpec& spec, const NetworkWeights& weights, const ComplexTensor& inputs,
                       std::span<const int> labels, double lambda, bool stochastic, Rng& rng);

/// Batch loss as computed by backward(), without gradients. With an rng in the
/// same state it draws the same masks, which is what finite-difference checks
/// rely on.
double batch_loss(const NetworkSpec& spec, const NetworkWeights& weights, const ComplexTensor& inputs,
                  std::span<const int> labels, double lambda, bool stochastic, Rng& rng);

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainResult {
  NetworkWeights weights;
  std::vector<EpochStats> trace;
};

/// Mini-batch SGD with dropout active. Deterministic for a given seed. Throws
/// ErrorCode::Divergence on a non-finite loss.
TrainResult train(const NetworkSpec& spec, const Dataset& data, const TrainConfig& config,
                  std::optional<NetworkWeights> initial = std::nullopt);

/// "epoch,loss,train_acc" CSV.
void write_trace_csv(std::ostream& out, const std::vector<EpochStats>& trace);

}  // namespace bcvnn
