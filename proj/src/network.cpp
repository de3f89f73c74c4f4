#include "bcvnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bcvnn/error.hpp"
#include "json.hpp"

namespace bcvnn {

using nlohmann::json;

namespace {

struct ShapeVisitor {
  const Shape& in;

  Shape operator()(const Conv2DSpec& c) const {
    require(in.size() == 3, ErrorCode::ShapeMismatch, "conv2d needs a [C,H,W] input, got " + shape_to_string(in));
    require(c.out_channels >= 1 && c.kernel_h >= 1 && c.kernel_w >= 1 && c.stride >= 1, ErrorCode::InvalidArgument,
            "conv2d extents and stride must be >= 1");
    require(in[1] >= c.kernel_h && in[2] >= c.kernel_w, ErrorCode::ShapeMismatch,
            "conv2d kernel larger than input " + shape_to_string(in));
    return {c.out_channels, (in[1] - c.kernel_h) / c.stride + 1, (in[2] - c.kernel_w) / c.stride + 1};
  }
  Shape operator()(const DenseSpec& d) const {
    require(d.out_features >= 1, ErrorCode::InvalidArgument, "dense out_features must be >= 1");
    return {d.out_features};
  }
  Shape operator()(const PoolSpec& p) const {
    require(in.size() == 3, ErrorCode::ShapeMismatch, "pool needs a [C,H,W] input, got " + shape_to_string(in));
    require(p.window >= 1, ErrorCode::InvalidArgument, "pool window must be >= 1");
    require(in[1] % p.window == 0 && in[2] % p.window == 0, ErrorCode::ShapeMismatch,
            "pool window " + std::to_string(p.window) + " does not divide " + shape_to_string(in));
    return {in[0], in[1] / p.window, in[2] / p.window};
  }
  Shape operator()(const ActivationSpec&) const { return in; }
  Shape operator()(const DropoutSpec& d) const {
    require(d.keep_rate > 0.0 && d.keep_rate <= 1.0, ErrorCode::InvalidArgument,
            "dropout keep_rate must be in (0, 1]");
    return in;
  }
};

std::size_t fan_in(const LayerSpec& layer, const Shape& in) {
  if (const auto* c = std::get_if<Conv2DSpec>(&layer)) return in[0] * c->kernel_h * c->kernel_w;
  return element_count(in);
}

Shape weight_shape(const LayerSpec& layer, const Shape& in) {
  if (const auto* c = std::get_if<Conv2DSpec>(&layer)) return {c->out_channels, in[0], c->kernel_h, c->kernel_w};
  if (const auto* d = std::get_if<DenseSpec>(&layer)) return {d->out_features, element_count(in)};
  return {};
}

std::size_t out_channels(const LayerSpec& layer) {
  if (const auto* c = std::get_if<Conv2DSpec>(&layer)) return c->out_channels;
  if (const auto* d = std::get_if<DenseSpec>(&layer)) return d->out_features;
  return 0;
}

json layer_to_json(const LayerSpec& layer) {
  json j;
  j["type"] = std::string(layer_kind_name(layer));
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Conv2DSpec>) {
          j["out_channels"] = l.out_channels;
          j["kernel"] = {l.kernel_h, l.kernel_w};
          j["stride"] = l.stride;
        } else if constexpr (std::is_same_v<T, DenseSpec>) {
          j["out_features"] = l.out_features;
        } else if constexpr (std::is_same_v<T, PoolSpec>) {
          j["window"] = l.window;
          j["reduction"] = l.reduction == PoolReduction::Max ? "max" : "avg";
        } else if constexpr (std::is_same_v<T, ActivationSpec>) {
          j["kind"] = "crelu";
        } else {
          j["keep_rate"] = l.keep_rate;
          j["part_mode"] = std::string(1, part_mode_letter(l.part_mode));
        }
      },
      layer);
  return j;
}

LayerSpec layer_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "conv2d") {
    Conv2DSpec c;
    c.out_channels = j.at("out_channels").get<std::size_t>();
    const auto& k = j.at("kernel");
    if (k.is_array()) {
      require(k.size() == 2, ErrorCode::Format, "conv2d kernel must be [kh, kw]");
      c.kernel_h = k[0].get<std::size_t>();
      c.kernel_w = k[1].get<std::size_t>();
    } else {
      c.kernel_h = c.kernel_w = k.get<std::size_t>();
    }
    c.stride = j.value("stride", std::size_t{1});
    return c;
  }
  if (type == "dense") return DenseSpec{j.at("out_features").get<std::size_t>()};
  if (type == "pool") {
    PoolSpec p;
    p.window = j.at("window").get<std::size_t>();
    const auto reduction = j.value("reduction", std::string("max"));
    require(reduction == "max" || reduction == "avg", ErrorCode::Format, "pool reduction must be max or avg");
    p.reduction = reduction == "max" ? PoolReduction::Max : PoolReduction::Avg;
    return p;
  }
  if (type == "activation") {
    require(j.value("kind", std::string("crelu")) == "crelu", ErrorCode::Format, "only crelu activation is supported");
    return ActivationSpec{};
  }
  if (type == "dropout") {
    DropoutSpec d;
    d.keep_rate = j.at("keep_rate").get<double>();
    const auto mode = j.value("part_mode", std::string("B"));
    require(mode.size() == 1, ErrorCode::Format, "part_mode must be one of R, I, B");
    d.part_mode = part_mode_from_letter(mode[0]);
    return d;
  }
  fail(ErrorCode::Format, "unknown layer type '" + type + "'");
}

}  // namespace

std::vector<Shape> layer_output_shapes(const NetworkSpec& spec) {
  require(!spec.input_shape.empty(), ErrorCode::InvalidArgument, "network input shape is empty");
  for (auto extent : spec.input_shape) require(extent >= 1, ErrorCode::InvalidArgument, "zero input extent");
  std::vector<Shape> shapes;
  Shape current = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    try {
      current = std::visit(ShapeVisitor{current}, spec.layers[i]);
    } catch (const Error& e) {
      fail(e.code(), "layer " + std::to_string(i) + " (" + std::string(layer_kind_name(spec.layers[i])) +
                         "): " + e.what());
    }
    shapes.push_back(current);
  }
  return shapes;
}

void validate(const NetworkSpec& spec) {
  require(spec.classes >= 2, ErrorCode::InvalidArgument, "network needs at least two classes");
  require(!spec.layers.empty(), ErrorCode::InvalidArgument, "network has no layers");
  bool has_compute = false;
  for (const auto& l : spec.layers) has_compute |= !is_dropout(l);
  require(has_compute, ErrorCode::InvalidArgument, "network needs at least one non-dropout layer");
  require(!is_dropout(spec.layers.front()) && !is_dropout(spec.layers.back()), ErrorCode::InvalidArgument,
          "dropout layers must be intermediate layers");
  const auto shapes = layer_output_shapes(spec);
  require(element_count(shapes.back()) == spec.classes, ErrorCode::ShapeMismatch,
          "network output " + shape_to_string(shapes.back()) + " does not match " + std::to_string(spec.classes) +
              " classes");
}

std::size_t bayesian_layer_count(const NetworkSpec& spec) {
  return static_cast<std::size_t>(std::count_if(spec.layers.begin(), spec.layers.end(), is_dropout));
}

Genome genome_of(const NetworkSpec& spec) {
  Genome g;
  for (const auto& l : spec.layers) {
    if (const auto* d = std::get_if<DropoutSpec>(&l)) g.push_back(d->part_mode);
  }
  return g;
}

NetworkSpec with_genome(NetworkSpec spec, const Genome& genome) {
  require(genome.size() == bayesian_layer_count(spec), ErrorCode::InvalidArgument,
          "genome length " + std::to_string(genome.size()) + " does not match " +
              std::to_string(bayesian_layer_count(spec)) + " Bayesian layers");
  std::size_t k = 0;
  for (auto& l : spec.layers) {
    if (auto* d = std::get_if<DropoutSpec>(&l)) d->part_mode = genome[k++];
  }
  return spec;
}

NetworkSpec parse_network_spec(const std::string& json_text) {
  NetworkSpec spec;
  try {
    const auto doc = json::parse(json_text);
    const int version = doc.at("schema_version").get<int>();
    require(version == kSpecSchemaVersion, ErrorCode::Format,
            "unsupported network schema_version " + std::to_string(version));
    spec.input_shape = doc.at("input_shape").get<Shape>();
    spec.classes = doc.at("classes").get<std::size_t>();
    for (const auto& l : doc.at("layers")) spec.layers.push_back(layer_from_json(l));
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, std::string("network spec: ") + e.what());
  }
  validate(spec);
  return spec;
}

std::string network_spec_to_json(const NetworkSpec& spec) {
  json doc;
  doc["schema_version"] = kSpecSchemaVersion;
  doc["input_shape"] = spec.input_shape;
  doc["classes"] = spec.classes;
  doc["layers"] = json::array();
  for (const auto& l : spec.layers) doc["layers"].push_back(layer_to_json(l));
  return doc.dump(2);
}

NetworkSpec load_network_spec(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_network_spec(buffer.str());
}

NetworkWeights init_weights(const NetworkSpec& spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  NetworkWeights weights;
  Shape in = spec.input_shape;
  const auto shapes = layer_output_shapes(spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    ComplexWeights w;
    if (has_parameters(spec.layers[i])) {
      const double bound = 1.0 / std::sqrt(2.0 * static_cast<double>(fan_in(spec.layers[i], in)));
      w.weight = ComplexTensor(weight_shape(spec.layers[i], in));
      for (auto& v : w.weight.real()) v = static_cast<Scalar>(rng.uniform(-bound, bound));
      for (auto& v : w.weight.imag()) v = static_cast<Scalar>(rng.uniform(-bound, bound));
      w.bias = ComplexTensor({out_channels(spec.layers[i])});
    }
    weights.layers.push_back(std::move(w));
    in = shapes[i];
  }
  return weights;
}

NetworkWeights zeros_like(const NetworkWeights& weights) {
  NetworkWeights out;
  for (const auto& w : weights.layers) {
    ComplexWeights z;
    if (!w.weight.empty()) z.weight = ComplexTensor(w.weight.shape());
    if (!w.bias.empty()) z.bias = ComplexTensor(w.bias.shape());
    out.layers.push_back(std::move(z));
  }
  return out;
}

void check_weights(const NetworkSpec& spec, const NetworkWeights& weights) {
  require(weights.layers.size() == spec.layers.size(), ErrorCode::ShapeMismatch,
          "weights have " + std::to_string(weights.layers.size()) + " layers, spec has " +
              std::to_string(spec.layers.size()));
  Shape in = spec.input_shape;
  const auto shapes = layer_output_shapes(spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& w = weights.layers[i];
    if (has_parameters(spec.layers[i])) {
      require(w.weight.shape() == weight_shape(spec.layers[i], in), ErrorCode::ShapeMismatch,
              "layer " + std::to_string(i) + " weight shape " + shape_to_string(w.weight.shape()) + " expected " +
                  shape_to_string(weight_shape(spec.layers[i], in)));
      require(w.bias.empty() || w.bias.shape() == Shape{out_channels(spec.layers[i])}, ErrorCode::ShapeMismatch,
              "layer " + std::to_string(i) + " bias shape mismatch");
    } else {
      require(w.weight.empty() && w.bias.empty(), ErrorCode::ShapeMismatch,
              "layer " + std::to_string(i) + " has no parameters but weights were given");
    }
    in = shapes[i];
  }
}

ComplexTensor forward(const NetworkSpec& spec, const NetworkWeights& weights, const ComplexTensor& input,
                      bool stochastic, Rng& rng) {
  const auto& s = input.shape();
  const bool single = s == spec.input_shape;
  const bool batched = s.size() == spec.input_shape.size() + 1 &&
                       std::equal(spec.input_shape.begin(), spec.input_shape.end(), s.begin() + 1);
  require(single || batched, ErrorCode::ShapeMismatch,
          "input " + shape_to_string(s) + " does not match network input " + shape_to_string(spec.input_shape));
  ComplexTensor x = input;
  if (single) {
    Shape b{1};
    b.insert(b.end(), s.begin(), s.end());
    x = x.reshaped(std::move(b));
  }
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& w = weights.layers.at(i);
    x = std::visit(
        [&](const auto& l) -> ComplexTensor {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Conv2DSpec>) {
            return complex_conv2d(x, w, l.stride);
          } else if constexpr (std::is_same_v<T, DenseSpec>) {
            return complex_dense(x, w);
          } else if constexpr (std::is_same_v<T, PoolSpec>) {
            return complex_pool(x, l.window, l.reduction);
          } else if constexpr (std::is_same_v<T, ActivationSpec>) {
            return complex_activation(x, l.kind);
          } else {
            if (!stochastic) return std::move(x);
            return bernoulli_channel_dropout(x, l.keep_rate, l.part_mode, rng);
          }
        },
        spec.layers[i]);
  }
  const std::size_t samples = x.shape()[0];
  return single ? x.reshaped({spec.classes}) : x.reshaped({samples, spec.classes});
}

void save_checkpoint(const std::string& dir, const NetworkSpec& spec, const NetworkWeights& weights) {
  check_weights(spec, weights);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create checkpoint directory " + dir + ": " + ec.message());
  json manifest;
  manifest["schema_version"] = kSpecSchemaVersion;
  manifest["network"] = json::parse(network_spec_to_json(spec));
  manifest["layers"] = json::array();
  for (std::size_t i = 0; i < weights.layers.size(); ++i) {
    if (!has_parameters(spec.layers[i])) continue;
    const auto base = "layer" + std::to_string(i);
    json entry{{"index", i}, {"weight", base + ".weight.bcvt"}};
    save_tensor((fs::path(dir) / (base + ".weight.bcvt")).string(), weights.layers[i].weight);
    if (!weights.layers[i].bias.empty()) {
      entry["bias"] = base + ".bias.bcvt";
      save_tensor((fs::path(dir) / (base + ".bias.bcvt")).string(), weights.layers[i].bias);
    }
    manifest["layers"].push_back(entry);
  }
  std::ofstream out(fs::path(dir) / "manifest.json");
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write manifest in " + dir);
  out << manifest.dump(2) << '\n';
}

std::pair<NetworkSpec, NetworkWeights> load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "manifest.json");
  require(static_cast<bool>(in), ErrorCode::Io, "no manifest.json in " + dir);
  NetworkSpec spec;
  NetworkWeights weights;
  try {
    const auto manifest = json::parse(in);
    require(manifest.at("schema_version").get<int>() == kSpecSchemaVersion, ErrorCode::Format,
            "unsupported checkpoint schema_version");
    spec = parse_network_spec(manifest.at("network").dump());
    weights.layers.resize(spec.layers.size());
    for (const auto& entry : manifest.at("layers")) {
      const auto i = entry.at("index").get<std::size_t>();
      require(i < spec.layers.size(), ErrorCode::Format, "checkpoint layer index out of range");
      weights.layers[i].weight = load_tensor((fs::path(dir) / entry.at("weight").get<std::string>()).string());
      if (entry.contains("bias")) {
        weights.layers[i].bias = load_tensor((fs::path(dir) / entry.at("bias").get<std::string>()).string());
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, std::string("checkpoint manifest: ") + e.what());
  }
  check_weights(spec, weights);
  return {std::move(spec), std::move(weights)};
}

}  // namespace bcvnn
