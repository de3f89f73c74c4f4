#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcvnn/layers.hpp"

namespace bcvnn {

using Genome = std::vector<PartMode>;

struct NetworkSpec {
  Shape input_shape;  // per sample, e.g. {1, 28, 28} or {16}
  std::size_t classes = 2;
  std::vector<LayerSpec> layers;
};

/// Per-sample output shape of every layer; validates the whole spec.
std::vector<Shape> layer_output_shapes(const NetworkSpec& spec);
void validate(const NetworkSpec& spec);

std::size_t bayesian_layer_count(const NetworkSpec& spec);
Genome genome_of(const NetworkSpec& spec);
NetworkSpec with_genome(NetworkSpec spec, const Genome& genome);

inline constexpr int kSpecSchemaVersion = 1;

NetworkSpec parse_network_spec(const std::string& json_text);
std::string network_spec_to_json(const NetworkSpec& spec);
NetworkSpec load_network_spec(const std::string& path);

/// One entry per layer; layers without parameters hold empty tensors.
struct NetworkWeights {
  std::vector<ComplexWeights> layers;

  friend bool operator==(const NetworkWeights&, const NetworkWeights&) = default;
};

/// Uniform(-k, k) init with k = 1/sqrt(2 * fan_in); biases start at zero.
NetworkWeights init_weights(const NetworkSpec& spec, std::uint64_t seed);
NetworkWeights zeros_like(const NetworkWeights& weights);
void check_weights(const NetworkSpec& spec, const NetworkWeights& weights);

/// Input may be a single sample (input_shape) or a batch [N, input_shape...].
/// Logits come back as [classes] or [N, classes] accordingly. Dropout layers
/// are identity unless stochastic is set, in which case each draws fresh
/// masks from rng.
ComplexTensor forward(const NetworkSpec& spec, const NetworkWeights& weights, const ComplexTensor& input,
                      bool stochastic, Rng& rng);

// Checkpoint directory: manifest.json plus one BCVT file per weight/bias.
void save_checkpoint(const std::string& dir, const NetworkSpec& spec, const NetworkWeights& weights);
std::pair<NetworkSpec, NetworkWeights> load_checkpoint(const std::string& dir);

}  // namespace bcvnn
