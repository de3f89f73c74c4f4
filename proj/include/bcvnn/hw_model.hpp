#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "bcvnn/network.hpp"

namespace bcvnn {

enum class MappingScheme { LatencyOpt, ResourceOpt };

std::string_view scheme_name(MappingScheme scheme);
MappingScheme parse_scheme(std::string_view name);

/// Class1: conv/dense. Class2: pool/activation. Class3: Bayesian dropout.
enum class LayerClass { Class1 = 1, Class2 = 2, Class3 = 3 };

LayerClass classify_layer(const LayerSpec& layer);

/// Abstract analytical cost. One latency unit is one engine step over one
/// real scalar of workload.
struct CostEstimate {
  double latency_units = 0.0;
  std::uint64_t engine_count = 0;
  std::uint64_t mac_ops = 0;
  std::uint64_t dropout_engines = 0;  // active dropout engines
  std::uint64_t memory_words = 0;

  CostEstimate& operator+=(const CostEstimate& other);
  friend bool operator==(const CostEstimate&, const CostEstimate&) = default;
};

/// input_shape is the per-sample input of the layer.
CostEstimate estimate_layer(const LayerSpec& layer, const Shape& input_shape, MappingScheme scheme);

struct LayerCost {
  std::size_t layer_index = 0;
  LayerClass layer_class = LayerClass::Class1;
  CostEstimate cost;

  friend bool operator==(const LayerCost&, const LayerCost&) = default;
};

struct NetworkCost {
  MappingScheme scheme = MappingScheme::LatencyOpt;
  std::vector<LayerCost> layers;
  CostEstimate total;

  friend bool operator==(const NetworkCost&, const NetworkCost&) = default;
};

/// genome overrides the part modes of the Bayesian layers in order.
NetworkCost estimate_network(const NetworkSpec& spec, const Genome& genome, MappingScheme scheme);

struct SchemeComparison {
  NetworkCost latency_opt;
  NetworkCost resource_opt;
  double latency_ratio = 0.0;  // resource-opt / latency-opt
  double engine_ratio = 0.0;   // resource-opt / latency-opt
};

SchemeComparison compare_schemes(const NetworkSpec& spec, const Genome& genome);

/// Per-layer rows then a totals row:
/// layer_index,class,scheme,latency_units,engines,mac_ops,memory_words,dropout_engines
void write_cost_csv(std::ostream& out, const NetworkCost& cost);
void write_cost_csv(std::ostream& out, const SchemeComparison& comparison);
std::vector<NetworkCost> read_cost_csv(std::istream& in);

}  // namespace bcvnn
