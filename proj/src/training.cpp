#include "bcvnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "bcvnn/csv.hpp"
#include "bcvnn/error.hpp"
#include "kernels.hpp"

namespace bcvnn {

void validate(const Dataset& data) {
  require(data.inputs.size() == data.labels.size(), ErrorCode::InvalidArgument,
          "dataset has " + std::to_string(data.inputs.size()) + " inputs but " + std::to_string(data.labels.size()) +
              " labels");
  require(data.classes >= 2, ErrorCode::InvalidArgument, "dataset needs at least two classes");
  for (std::size_t i = 0; i < data.size(); ++i) {
    require(data.labels[i] >= 0 && static_cast<std::size_t>(data.labels[i]) < data.classes,
            ErrorCode::InvalidArgument, "label " + std::to_string(data.labels[i]) + " out of range at row " +
                                            std::to_string(i));
    require(data.inputs[i].shape() == data.inputs[0].shape(), ErrorCode::ShapeMismatch,
            "inconsistent input shape at row " + std::to_string(i));
    require(data.inputs[i].all_finite(), ErrorCode::InvalidArgument, "non-finite input at row " + std::to_string(i));
  }
}

Dataset slice(const Dataset& data, std::size_t first, std::size_t count) {
  require(first + count <= data.size(), ErrorCode::InvalidArgument, "dataset slice out of range");
  Dataset out;
  out.classes = data.classes;
  out.inputs.assign(data.inputs.begin() + first, data.inputs.begin() + first + count);
  out.labels.assign(data.labels.begin() + first, data.labels.begin() + first + count);
  return out;
}

ComplexTensor stack_inputs(const Dataset& data, std::span<const std::size_t> rows) {
  require(!rows.empty(), ErrorCode::InvalidArgument, "cannot stack zero rows");
  const auto& sample_shape = data.inputs.at(rows[0]).shape();
  const std::size_t per = element_count(sample_shape);
  Shape shape{rows.size()};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  std::vector<Scalar> re(rows.size() * per), im(rows.size() * per);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& x = data.inputs.at(rows[r]);
    std::copy(x.real().begin(), x.real().end(), re.begin() + r * per);
    std::copy(x.imag().begin(), x.imag().end(), im.begin() + r * per);
  }
  return ComplexTensor(std::move(shape), std::move(re), std::move(im));
}

void validate(const TrainConfig& config) {
  require(config.learning_rate >= 0.0 && std::isfinite(config.learning_rate), ErrorCode::InvalidArgument,
          "learning_rate must be finite and >= 0");
  require(config.batch_size >= 1, ErrorCode::InvalidArgument, "batch_size must be >= 1");
  require(config.weight_decay >= 0.0, ErrorCode::InvalidArgument, "weight_decay must be >= 0");
  require(config.momentum >= 0.0 && config.momentum < 1.0, ErrorCode::InvalidArgument, "momentum must be in [0, 1)");
}

namespace {

std::vector<double> softmax_magnitude(const Scalar* re, const Scalar* im, std::size_t n) {
  std::vector<double> p(n);
  double top = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    p[k] = std::hypot(static_cast<double>(re[k]), static_cast<double>(im[k]));
    top = std::max(top, p[k]);
  }
  double sum = 0.0;
  for (auto& v : p) sum += (v = std::exp(v - top));
  for (auto& v : p) v /= sum;
  return p;
}

// Activations of one batch forward, kept for the backward pass.
struct Trace {
  std::vector<ComplexTensor> acts;  // acts[i] is the input of layer i
  std::vector<DropoutMasks> masks;  // per layer; unused for non-dropout layers
};

Trace forward_trace(const NetworkSpec& spec, const NetworkWeights& weights, const ComplexTensor& inputs,
                    bool stochastic, Rng& rng) {
  require(inputs.rank() == spec.input_shape.size() + 1 &&
              std::equal(spec.input_shape.begin(), spec.input_shape.end(), inputs.shape().begin() + 1),
          ErrorCode::ShapeMismatch,
          "batch " + shape_to_string(inputs.shape()) + " does not match network input " +
              shape_to_string(spec.input_shape));
  require(weights.layers.size() == spec.layers.size(), ErrorCode::ShapeMismatch, "weights do not match spec");
  Trace t;
  t.acts.reserve(spec.layers.size() + 1);
  t.masks.resize(spec.layers.size());
  t.acts.push_back(inputs);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& x = t.acts.back();
    const auto& w = weights.layers[i];
    ComplexTensor y = std::visit(
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
            if (!stochastic) return x;
            const auto [samples, channels] = dropout_layout(x.shape());
            t.masks[i] = draw_dropout_masks(samples, channels, l.keep_rate, l.part_mode, rng);
            return apply_dropout_masks(x, t.masks[i], l.keep_rate);
          }
        },
        spec.layers[i]);
    t.acts.push_back(std::move(y));
  }
  return t;
}

struct HeadResult {
  double data_loss = 0.0;  // mean cross entropy
  std::size_t correct = 0;
  ComplexTensor grad;  // d(mean CE)/d(logits), same shape as logits
};

HeadResult classification_head(const ComplexTensor& logits, std::span<const int> labels, std::size_t classes,
                               bool want_grad) {
  const std::size_t samples = logits.shape()[0];
  require(labels.size() == samples, ErrorCode::InvalidArgument, "label count does not match batch size");
  HeadResult h;
  if (want_grad) h.grad = ComplexTensor(logits.shape());
  const double inv_n = 1.0 / static_cast<double>(samples);
  for (std::size_t n = 0; n < samples; ++n) {
    const int label = labels[n];
    require(label >= 0 && static_cast<std::size_t>(label) < classes, ErrorCode::InvalidArgument,
            "label " + std::to_string(label) + " out of range");
    const Scalar* re = logits.real().data() + n * classes;
    const Scalar* im = logits.imag().data() + n * classes;
    const auto p = softmax_magnitude(re, im, classes);
    h.data_loss -= std::log(p[label]) * inv_n;
    const auto argmax = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    if (argmax == static_cast<std::size_t>(label)) ++h.correct;
    if (!want_grad) continue;
    for (std::size_t k = 0; k < classes; ++k) {
      const double dm = (p[k] - (k == static_cast<std::size_t>(label) ? 1.0 : 0.0)) * inv_n;
      const double mag = std::hypot(static_cast<double>(re[k]), static_cast<double>(im[k]));
      if (mag == 0.0) continue;  // subgradient 0 at the origin
      h.grad.real()[n * classes + k] = static_cast<Scalar>(dm * re[k] / mag);
      h.grad.imag()[n * classes + k] = static_cast<Scalar>(dm * im[k] / mag);
    }
  }
  return h;
}

void conv_backward(const ComplexTensor& x, const ComplexWeights& w, std::size_t stride, const ComplexTensor& g,
                   ComplexWeights& gw, ComplexTensor* gx) {
  const auto geo = kernels::conv_geometry(x.shape(), w.weight.shape(), stride);
  const std::size_t samples = x.shape()[0];
  const Scalar* wr = w.weight.real().data();
  const Scalar* wi = w.weight.imag().data();
  Scalar* gwr = gw.weight.real().data();
  Scalar* gwi = gw.weight.imag().data();
  const std::size_t plane = geo.out_h * geo.out_w;
  for (std::size_t n = 0; n < samples; ++n) {
    const Scalar* ar = x.real().data() + n * geo.in_size();
    const Scalar* ai = x.imag().data() + n * geo.in_size();
    const Scalar* gr = g.real().data() + n * geo.out_size();
    const Scalar* gi = g.imag().data() + n * geo.out_size();
    kernels::conv_backward_weight(geo, ar, gr, gwr, +1);
    kernels::conv_backward_weight(geo, ai, gi, gwr, +1);
    kernels::conv_backward_weight(geo, ai, gr, gwi, -1);
    kernels::conv_backward_weight(geo, ar, gi, gwi, +1);
    for (std::size_t o = 0; o < geo.out_channels; ++o) {
      for (std::size_t k = 0; k < plane; ++k) {
        gw.bias.real()[o] += gr[o * plane + k];
        gw.bias.imag()[o] += gi[o * plane + k];
      }
    }
    if (gx) {
      Scalar* gxr = gx->real().data() + n * geo.in_size();
      Scalar* gxi = gx->imag().data() + n * geo.in_size();
      kernels::conv_backward_input(geo, wr, gr, gxr, +1);
      kernels::conv_backward_input(geo, wi, gi, gxr, +1);
      kernels::conv_backward_input(geo, wi, gr, gxi, -1);
      kernels::conv_backward_input(geo, wr, gi, gxi, +1);
    }
  }
}

void dense_backward(const ComplexTensor& x, const ComplexWeights& w, const ComplexTensor& g, ComplexWeights& gw,
                    ComplexTensor* gx) {
  const auto [samples, in_n] = kernels::dense_layout(x.shape());
  const std::size_t out_n = w.weight.shape()[0];
  const Scalar* wr = w.weight.real().data();
  const Scalar* wi = w.weight.imag().data();
  Scalar* gwr = gw.weight.real().data();
  Scalar* gwi = gw.weight.imag().data();
  for (std::size_t n = 0; n < samples; ++n) {
    const Scalar* ar = x.real().data() + n * in_n;
    const Scalar* ai = x.imag().data() + n * in_n;
    const Scalar* gr = g.real().data() + n * out_n;
    const Scalar* gi = g.imag().data() + n * out_n;
    kernels::dense_backward_weight(in_n, out_n, ar, gr, gwr, +1);
    kernels::dense_backward_weight(in_n, out_n, ai, gi, gwr, +1);
    kernels::dense_backward_weight(in_n, out_n, ai, gr, gwi, -1);
    kernels::dense_backward_weight(in_n, out_n, ar, gi, gwi, +1);
    for (std::size_t o = 0; o < out_n; ++o) {
      gw.bias.real()[o] += gr[o];
      gw.bias.imag()[o] += gi[o];
    }
    if (gx) {
      Scalar* gxr = gx->real().data() + n * in_n;
      Scalar* gxi = gx->imag().data() + n * in_n;
      kernels::dense_backward_input(in_n, out_n, wr, gr, gxr, +1);
      kernels::dense_backward_input(in_n, out_n, wi, gi, gxr, +1);
      kernels::dense_backward_input(in_n, out_n, wi, gr, gxi, -1);
      kernels::dense_backward_input(in_n, out_n, wr, gi, gxi, +1);
    }
  }
}

ComplexTensor pool_backward(const ComplexTensor& x, const PoolSpec& p, const ComplexTensor& g) {
  ComplexTensor gx(x.shape());
  const auto& s = x.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3], win = p.window, oh = h / win, ow = w / win;
  const Scalar inv_area = Scalar{1} / static_cast<Scalar>(win * win);
  auto route = [&](std::span<const Scalar> src, std::span<const Scalar> gsrc, std::span<Scalar> dst) {
    for (std::size_t pl = 0; pl < planes; ++pl) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t xo = 0; xo < ow; ++xo) {
          const Scalar gv = gsrc[(pl * oh + y) * ow + xo];
          std::size_t best = pl * h * w + y * win * w + xo * win;
          for (std::size_t dy = 0; dy < win; ++dy) {
            for (std::size_t dx = 0; dx < win; ++dx) {
              const std::size_t idx = pl * h * w + (y * win + dy) * w + xo * win + dx;
              if (p.reduction == PoolReduction::Avg) {
                dst[idx] += gv * inv_area;
              } else if (src[idx] > src[best]) {
                best = idx;
              }
            }
          }
          if (p.reduction == PoolReduction::Max) dst[best] += gv;
        }
      }
    }
  };
  route(x.real(), g.real(), gx.real());
  route(x.imag(), g.imag(), gx.imag());
  return gx;
}

ComplexTensor activation_backward(const ComplexTensor& x, const ComplexTensor& g) {
  ComplexTensor gx = g;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x.real()[k] > 0)) gx.real()[k] = 0;
    if (!(x.imag()[k] > 0)) gx.imag()[k] = 0;
  }
  return gx;
}

double sum_squares(std::span<const Scalar> v) {
  double s = 0.0;
  for (auto x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return s;
}

}  // namespace

std::vector<double> class_probabilities(const ComplexTensor& logits) {
  return softmax_magnitude(logits.real().data(), logits.imag().data(), logits.size());
}

double cross_entropy(const ComplexTensor& logits, int label) {
  require(label >= 0 && static_cast<std::size_t>(label) < logits.size(), ErrorCode::InvalidArgument,
          "label " + std::to_string(label) + " out of range for " + std::to_string(logits.size()) + " logits");
  return -std::log(class_probabilities(logits)[label]);
}

double weight_decay_penalty(const NetworkWeights& weights, double lambda) {
  if (lambda == 0.0) return 0.0;
  double s = 0.0;
  for (const auto& w : weights.layers) s += sum_squares(w.weight.real()) + sum_squares(w.weight.imag());
  return lambda * s;
}

double loss(const ComplexTensor& logits, int label, const NetworkWeights& weights, double lambda) {
  return cross_entropy(logits, label) + weight_decay_penalty(weights, lambda);
}

double batch_loss(const NetworkSpec& spec, const NetworkWeights& weights, const ComplexTensor& inputs,
                  std::span<const int> labels, double lambda, bool stochastic, Rng& rng) {
  auto trace = forward_trace(spec, weights, inputs, stochastic, rng);
  const auto& out = trace.acts.back();
  const auto logits = out.reshaped({out.shape()[0], spec.classes});
  return classification_head(logits, labels, spec.classes, false).data_loss + weight_decay_penalty(weights, lambda);
}

BatchGradient backward(const NetworkSpec& spec, const NetworkWeights& weights, const ComplexTensor& inputs,
                       std::span<const int> labels, double lambda, bool stochastic, Rng& rng) {
  auto trace = forward_trace(spec, weights, inputs, stochastic, rng);
  const auto& out = trace.acts.back();
  const auto logits = out.reshaped({out.shape()[0], spec.classes});
  auto head = classification_head(logits, labels, spec.classes, true);

  BatchGradient result;
  result.loss = head.data_loss + weight_decay_penalty(weights, lambda);
  result.correct = head.correct;
  result.gradients = zeros_like(weights);

  ComplexTensor g = head.grad.reshaped(out.shape());
  for (std::size_t i = spec.layers.size(); i-- > 0;) {
    const auto& x = trace.acts[i];
    const bool need_input_grad = i > 0;
    auto& gw = result.gradients.layers[i];
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, Conv2DSpec> || std::is_same_v<T, DenseSpec>) {
            ComplexTensor gx;
            if (need_input_grad) gx = ComplexTensor(x.shape());
            if constexpr (std::is_same_v<T, Conv2DSpec>) {
              conv_backward(x, weights.layers[i], l.stride, g, gw, need_input_grad ? &gx : nullptr);
            } else {
              dense_backward(x, weights.layers[i], g, gw, need_input_grad ? &gx : nullptr);
            }
            if (lambda != 0.0) {
              const auto wr = weights.layers[i].weight.real();
              const auto wi = weights.layers[i].weight.imag();
              for (std::size_t k = 0; k < wr.size(); ++k) {
                gw.weight.real()[k] += static_cast<Scalar>(2.0 * lambda) * wr[k];
                gw.weight.imag()[k] += static_cast<Scalar>(2.0 * lambda) * wi[k];
              }
            }
            g = std::move(gx);
          } else if constexpr (std::is_same_v<T, PoolSpec>) {
            g = pool_backward(x, l, g);
          } else if constexpr (std::is_same_v<T, ActivationSpec>) {
            g = activation_backward(x, g);
          } else {
            if (stochastic) g = apply_dropout_masks(g, trace.masks[i], l.keep_rate);
          }
        },
        spec.layers[i]);
  }
  return result;
}

TrainResult train(const NetworkSpec& spec, const Dataset& data, const TrainConfig& config,
                  std::optional<NetworkWeights> initial) {
  validate(spec);
  validate(data);
  validate(config);
  require(data.size() >= 1, ErrorCode::InvalidArgument, "cannot train on an empty dataset");
  require(data.classes == spec.classes, ErrorCode::InvalidArgument, "dataset and network class counts differ");
  require(data.inputs[0].shape() == spec.input_shape, ErrorCode::ShapeMismatch,
          "dataset samples " + shape_to_string(data.inputs[0].shape()) + " do not match network input " +
              shape_to_string(spec.input_shape));

  TrainResult result;
  result.weights = initial ? std::move(*initial) : init_weights(spec, Rng::derive(config.seed, {0}));
  check_weights(spec, result.weights);
  Rng order_rng(Rng::derive(config.seed, {1}));
  Rng dropout_rng(Rng::derive(config.seed, {2}));
  auto velocity = zeros_like(result.weights);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> batch_labels;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - first);
      std::span<const std::size_t> rows(order.data() + first, count);
      batch_labels.clear();
      for (auto r : rows) batch_labels.push_back(data.labels[r]);
      const auto batch = stack_inputs(data, rows);
      auto step = backward(spec, result.weights, batch, batch_labels, config.weight_decay, true, dropout_rng);
      if (!std::isfinite(step.loss)) {
        fail(ErrorCode::Divergence, "non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                                        std::to_string(first) + "; lower the learning rate");
      }
      loss_sum += step.loss * static_cast<double>(count);
      correct += step.correct;

      const auto lr = static_cast<Scalar>(config.learning_rate);
      const auto mu = static_cast<Scalar>(config.optimizer == Optimizer::Momentum ? config.momentum : 0.0);
      auto update = [&](std::span<Scalar> param, std::span<Scalar> vel, std::span<const Scalar> grad) {
        for (std::size_t k = 0; k < param.size(); ++k) {
          vel[k] = mu * vel[k] - lr * grad[k];
          param[k] += vel[k];
        }
      };
      for (std::size_t l = 0; l < result.weights.layers.size(); ++l) {
        auto& w = result.weights.layers[l];
        auto& v = velocity.layers[l];
        const auto& gw = step.gradients.layers[l];
        update(w.weight.real(), v.weight.real(), gw.weight.real());
        update(w.weight.imag(), v.weight.imag(), gw.weight.imag());
        update(w.bias.real(), v.bias.real(), gw.bias.real());
        update(w.bias.imag(), v.bias.imag(), gw.bias.imag());
      }
    }
    const double n = static_cast<double>(data.size());
    result.trace.push_back({epoch, loss_sum / n, static_cast<double>(correct) / n});
  }
  return result;
}

void write_trace_csv(std::ostream& out, const std::vector<EpochStats>& trace) {
  csv::write_row(out, {"epoch", "loss", "train_acc"});
  for (const auto& e : trace) {
    csv::write_row(out, {std::to_string(e.epoch), csv::format_double(e.loss), csv::format_double(e.train_accuracy)});
  }
}

}  // namespace bcvnn
