#include "bcvnn/hw_model.hpp"

#include <istream>
#include <ostream>

#include "bcvnn/csv.hpp"
#include "bcvnn/error.hpp"

namespace bcvnn {

std::string_view scheme_name(MappingScheme scheme) {
  return scheme == MappingScheme::LatencyOpt ? "latency-opt" : "resource-opt";
}

MappingScheme parse_scheme(std::string_view name) {
  if (name == "latency-opt") return MappingScheme::LatencyOpt;
  if (name == "resource-opt") return MappingScheme::ResourceOpt;
  fail(ErrorCode::InvalidArgument, "unknown mapping scheme '" + std::string(name) + "'");
}

LayerClass classify_layer(const LayerSpec& layer) {
  if (has_parameters(layer)) return LayerClass::Class1;
  if (is_dropout(layer)) return LayerClass::Class3;
  return LayerClass::Class2;
}

CostEstimate& CostEstimate::operator+=(const CostEstimate& other) {
  latency_units += other.latency_units;
  engine_count += other.engine_count;
  mac_ops += other.mac_ops;
  dropout_engines += other.dropout_engines;
  memory_words += other.memory_words;
  return *this;
}

CostEstimate estimate_layer(const LayerSpec& layer, const Shape& input_shape, MappingScheme scheme) {
  require(!input_shape.empty(), ErrorCode::ShapeMismatch, "layer input shape is unresolved");
  NetworkSpec probe{input_shape, 2, {layer}};
  const Shape out = layer_output_shapes(probe).back();
  const bool latency_opt = scheme == MappingScheme::LatencyOpt;
  CostEstimate c;
  switch (classify_layer(layer)) {
    case LayerClass::Class1: {
      // Real MACs of one sub-operation; the layer runs four of them.
      std::uint64_t sub_ops = 0;
      std::uint64_t params = 0;
      if (const auto* conv = std::get_if<Conv2DSpec>(&layer)) {
        const std::uint64_t kernel = input_shape[0] * conv->kernel_h * conv->kernel_w;
        sub_ops = kernel * element_count(out);
        params = kernel * conv->out_channels + conv->out_channels;
      } else {
        const auto& dense = std::get<DenseSpec>(layer);
        sub_ops = static_cast<std::uint64_t>(element_count(input_shape)) * dense.out_features;
        params = sub_ops + dense.out_features;
      }
      c.mac_ops = 4 * sub_ops;
      c.engine_count = latency_opt ? 4 : 2;
      c.latency_units = static_cast<double>(latency_opt ? sub_ops : 2 * sub_ops);
      c.memory_words = 2 * params;
      break;
    }
    case LayerClass::Class2: {
      const auto elements = static_cast<double>(element_count(input_shape));
      c.engine_count = latency_opt ? 2 : 1;
      c.latency_units = latency_opt ? elements : 2 * elements;
      break;
    }
    case LayerClass::Class3: {
      // Two switched engines, one per part, in either scheme. Active engines
      // run in parallel, so latency is the per-part element count.
      const auto& d = std::get<DropoutSpec>(layer);
      c.engine_count = 2;
      c.dropout_engines = d.part_mode == PartMode::Both ? 2 : 1;
      c.latency_units = static_cast<double>(element_count(input_shape));
      break;
    }
  }
  return c;
}

NetworkCost estimate_network(const NetworkSpec& spec, const Genome& genome, MappingScheme scheme) {
  const auto configured = with_genome(spec, genome);
  validate(configured);
  const auto shapes = layer_output_shapes(configured);
  NetworkCost cost;
  cost.scheme = scheme;
  Shape in = configured.input_shape;
  for (std::size_t i = 0; i < configured.layers.size(); ++i) {
    LayerCost lc{i, classify_layer(configured.layers[i]), estimate_layer(configured.layers[i], in, scheme)};
    cost.total += lc.cost;
    cost.layers.push_back(lc);
    in = shapes[i];
  }
  return cost;
}

SchemeComparison compare_schemes(const NetworkSpec& spec, const Genome& genome) {
  SchemeComparison cmp;
  cmp.latency_opt = estimate_network(spec, genome, MappingScheme::LatencyOpt);
  cmp.resource_opt = estimate_network(spec, genome, MappingScheme::ResourceOpt);
  const auto& lo = cmp.latency_opt.total;
  const auto& ro = cmp.resource_opt.total;
  cmp.latency_ratio = lo.latency_units > 0 ? ro.latency_units / lo.latency_units : 0.0;
  cmp.engine_ratio = lo.engine_count > 0 ? static_cast<double>(ro.engine_count) / static_cast<double>(lo.engine_count)
                                         : 0.0;
  return cmp;
}

namespace {

void write_header(std::ostream& out) {
  csv::write_row(out, {"layer_index", "class", "scheme", "latency_units", "engines", "mac_ops", "memory_words",
                       "dropout_engines"});
}

void write_rows(std::ostream& out, const NetworkCost& cost) {
  const std::string scheme(scheme_name(cost.scheme));
  auto row = [&](std::string index, std::string cls, const CostEstimate& c) {
    csv::write_row(out, {std::move(index), std::move(cls), scheme, csv::format_double(c.latency_units),
                         std::to_string(c.engine_count), std::to_string(c.mac_ops), std::to_string(c.memory_words),
                         std::to_string(c.dropout_engines)});
  };
  for (const auto& l : cost.layers) {
    row(std::to_string(l.layer_index), std::to_string(static_cast<int>(l.layer_class)), l.cost);
  }
  row("total", "", cost.total);
}

}  // namespace

void write_cost_csv(std::ostream& out, const NetworkCost& cost) {
  write_header(out);
  write_rows(out, cost);
}

void write_cost_csv(std::ostream& out, const SchemeComparison& comparison) {
  write_header(out);
  write_rows(out, comparison.latency_opt);
  write_rows(out, comparison.resource_opt);
}

std::vector<NetworkCost> read_cost_csv(std::istream& in) {
  const auto rows = csv::read_all(in);
  require(!rows.empty() && rows[0].size() == 8 && rows[0][0] == "layer_index", ErrorCode::Format,
          "not a cost report");
  std::vector<NetworkCost> reports;
  NetworkCost current;
  bool open = false;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    require(f.size() == 8, ErrorCode::Format, "cost report row " + std::to_string(r) + " is ragged");
    CostEstimate c;
    c.latency_units = csv::parse_double(f[3]);
    c.engine_count = static_cast<std::uint64_t>(csv::parse_int(f[4]));
    c.mac_ops = static_cast<std::uint64_t>(csv::parse_int(f[5]));
    c.memory_words = static_cast<std::uint64_t>(csv::parse_int(f[6]));
    c.dropout_engines = static_cast<std::uint64_t>(csv::parse_int(f[7]));
    const auto scheme = parse_scheme(f[2]);
    if (!open) {
      current = NetworkCost{};
      current.scheme = scheme;
      open = true;
    }
    require(scheme == current.scheme, ErrorCode::Format, "scheme changes before totals row");
    if (f[0] == "total") {
      current.total = c;
      reports.push_back(std::move(current));
      open = false;
      continue;
    }
    const auto cls = csv::parse_int(f[1]);
    require(cls >= 1 && cls <= 3, ErrorCode::Format, "layer class must be 1, 2 or 3");
    current.layers.push_back({static_cast<std::size_t>(csv::parse_int(f[0])), static_cast<LayerClass>(cls), c});
  }
  require(!open, ErrorCode::Format, "cost report lacks a totals row");
  return reports;
}

}  // namespace bcvnn
