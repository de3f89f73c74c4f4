#include "bcvnn/bcvnn.h"

#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include "bcvnn/data.hpp"
#include "bcvnn/error.hpp"
#include "bcvnn/hw_model.hpp"
#include "bcvnn/pipeline.hpp"

struct bcvnn_network {
  bcvnn::NetworkSpec spec;
  std::optional<bcvnn::NetworkWeights> weights;
};

struct bcvnn_dataset {
  bcvnn::Dataset data;
};

struct bcvnn_evaluator {
  explicit bcvnn_evaluator(bcvnn::EvaluatorFn fn) : memo(std::move(fn)) {}
  bcvnn::MemoizedEvaluator memo;
};

namespace {

thread_local std::string last_error;

bcvnn_status to_status(bcvnn::ErrorCode code) {
  switch (code) {
    case bcvnn::ErrorCode::InvalidArgument: return BCVNN_ERR_INVALID_ARGUMENT;
    case bcvnn::ErrorCode::ShapeMismatch: return BCVNN_ERR_SHAPE_MISMATCH;
    case bcvnn::ErrorCode::Io: return BCVNN_ERR_IO;
    case bcvnn::ErrorCode::Format: return BCVNN_ERR_FORMAT;
    case bcvnn::ErrorCode::Infeasible: return BCVNN_ERR_INFEASIBLE;
    case bcvnn::ErrorCode::Divergence: return BCVNN_ERR_DIVERGENCE;
    case bcvnn::ErrorCode::Evaluator: return BCVNN_ERR_EVALUATOR;
  }
  return BCVNN_ERR_INTERNAL;
}

template <typename Fn>
bcvnn_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    return BCVNN_OK;
  } catch (const bcvnn::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    last_error = e.what();
    return BCVNN_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return BCVNN_ERR_INTERNAL;
  }
}

template <typename T>
const T& deref(const T* p, const char* what) {
  bcvnn::require(p != nullptr, bcvnn::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
  return *p;
}

template <typename T>
T& deref(T* p, const char* what) {
  bcvnn::require(p != nullptr, bcvnn::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
  return *p;
}

const char* str(const char* s, const char* what) { return &deref(s, what); }

// Writes via a callback into path, optionally preceded by a timestamp line.
template <typename Fn>
void write_file(const char* path, unsigned flags, Fn&& body) {
  if (path == nullptr) return;
  std::ofstream out(path, std::ios::binary);
  bcvnn::require(static_cast<bool>(out), bcvnn::ErrorCode::Io, std::string("cannot open ") + path + " for writing");
  if (flags & BCVNN_WRITE_TIMESTAMP) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    out << "# generated " << buf << "\r\n";
  }
  body(out);
  bcvnn::require(static_cast<bool>(out), bcvnn::ErrorCode::Io, std::string("failed writing ") + path);
}

bcvnn::TrainConfig train_config(const bcvnn_train_config* c) {
  bcvnn::TrainConfig t;
  if (c == nullptr) return t;
  t.epochs = c->epochs;
  t.batch_size = c->batch_size;
  t.learning_rate = c->learning_rate;
  t.weight_decay = c->weight_decay;
  t.momentum = c->momentum;
  t.optimizer = c->use_momentum ? bcvnn::Optimizer::Momentum : bcvnn::Optimizer::Sgd;
  t.seed = c->seed;
  return t;
}

bcvnn::SearchConfig search_config(const bcvnn_search_config& c) {
  bcvnn::SearchConfig s;
  s.genome_length = c.genome_length;
  s.population_size = c.population_size;
  s.mutation_portion = c.mutation_portion;
  s.mutation_prob = c.mutation_prob;
  s.crossover_prob = c.crossover_prob;
  s.iterations = c.iterations;
  switch (c.objective) {
    case BCVNN_OBJECTIVE_MAX_ACC: s.objective = bcvnn::Objective::max_acc(); break;
    case BCVNN_OBJECTIVE_MIN_ECE: s.objective = bcvnn::Objective::min_ece(); break;
    case BCVNN_OBJECTIVE_WEIGHTED: s.objective = bcvnn::Objective::weighted(c.w_acc, c.w_ece); break;
    default: bcvnn::fail(bcvnn::ErrorCode::InvalidArgument, "unknown objective");
  }
  if (c.max_dropout >= 0) s.constraint.max_dropout = c.max_dropout;
  if (c.min_dropout >= 0) s.constraint.min_dropout = c.min_dropout;
  s.seed = c.seed;
  s.threads = c.threads;
  return s;
}

void fill_record(const bcvnn::FitnessRecord& r, bcvnn_record* out) {
  if (out == nullptr) return;
  const auto g = bcvnn::genome_to_string(r.genome);
  bcvnn::require(g.size() < BCVNN_GENOME_MAX, bcvnn::ErrorCode::InvalidArgument, "genome too long for record");
  std::memset(out->genome, 0, sizeof out->genome);
  std::memcpy(out->genome, g.data(), g.size());
  out->accuracy = r.accuracy;
  out->ece = r.ece;
  out->fitness = r.fitness;
  out->dropout_count = r.dropout_count;
  out->feasible = r.feasible ? 1 : 0;
}

void fill_cost(const bcvnn::CostEstimate& c, bcvnn_cost* out) {
  if (out == nullptr) return;
  out->latency_units = c.latency_units;
  out->engine_count = c.engine_count;
  out->mac_ops = c.mac_ops;
  out->dropout_engines = c.dropout_engines;
  out->memory_words = c.memory_words;
}

bcvnn::Genome genome_or_default(const bcvnn_network& net, const char* genome) {
  return genome ? bcvnn::parse_genome(genome) : bcvnn::genome_of(net.spec);
}

}  // namespace

extern "C" {

const char* bcvnn_version(void) { return "1.0.0"; }

const char* bcvnn_last_error(void) { return last_error.c_str(); }

const char* bcvnn_status_name(bcvnn_status status) {
  switch (status) {
    case BCVNN_OK: return "ok";
    case BCVNN_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case BCVNN_ERR_SHAPE_MISMATCH: return "shape_mismatch";
    case BCVNN_ERR_IO: return "io";
    case BCVNN_ERR_FORMAT: return "format";
    case BCVNN_ERR_INFEASIBLE: return "infeasible";
    case BCVNN_ERR_DIVERGENCE: return "divergence";
    case BCVNN_ERR_EVALUATOR: return "evaluator";
    case BCVNN_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

bcvnn_status bcvnn_network_load_spec(const char* path, bcvnn_network** out) {
  return guarded([&] {
    auto& slot = deref(out, "out");
    slot = new bcvnn_network{bcvnn::load_network_spec(str(path, "path")), std::nullopt};
  });
}

bcvnn_status bcvnn_network_parse_spec(const char* json_text, bcvnn_network** out) {
  return guarded([&] {
    auto& slot = deref(out, "out");
    slot = new bcvnn_network{bcvnn::parse_network_spec(str(json_text, "json_text")), std::nullopt};
  });
}

bcvnn_status bcvnn_network_load_checkpoint(const char* dir, bcvnn_network** out) {
  return guarded([&] {
    auto& slot = deref(out, "out");
    auto [spec, weights] = bcvnn::load_checkpoint(str(dir, "dir"));
    slot = new bcvnn_network{std::move(spec), std::move(weights)};
  });
}

bcvnn_status bcvnn_network_save_checkpoint(const bcvnn_network* net, const char* dir) {
  return guarded([&] {
    const auto& n = deref(net, "net");
    bcvnn::require(n.weights.has_value(), bcvnn::ErrorCode::InvalidArgument, "network has no trained weights");
    bcvnn::save_checkpoint(str(dir, "dir"), n.spec, *n.weights);
  });
}

bcvnn_status bcvnn_network_set_genome(bcvnn_network* net, const char* genome) {
  return guarded([&] {
    auto& n = deref(net, "net");
    n.spec = bcvnn::with_genome(n.spec, bcvnn::parse_genome(str(genome, "genome")));
  });
}

bcvnn_status bcvnn_network_genome(const bcvnn_network* net, char* buffer, size_t buffer_len) {
  return guarded([&] {
    const auto g = bcvnn::genome_to_string(bcvnn::genome_of(deref(net, "net").spec));
    bcvnn::require(buffer != nullptr && buffer_len > g.size(), bcvnn::ErrorCode::InvalidArgument,
                   "genome buffer too small");
    std::memcpy(buffer, g.c_str(), g.size() + 1);
  });
}

bcvnn_status bcvnn_network_bayesian_layers(const bcvnn_network* net, size_t* count) {
  return guarded([&] { deref(count, "count") = bcvnn::bayesian_layer_count(deref(net, "net").spec); });
}

bcvnn_status bcvnn_network_classes(const bcvnn_network* net, size_t* classes) {
  return guarded([&] { deref(classes, "classes") = deref(net, "net").spec.classes; });
}

bcvnn_status bcvnn_network_has_weights(const bcvnn_network* net, int* has_weights) {
  return guarded([&] { deref(has_weights, "has_weights") = deref(net, "net").weights.has_value() ? 1 : 0; });
}

void bcvnn_network_free(bcvnn_network* net) { delete net; }

bcvnn_status bcvnn_dataset_load_mnist(const char* images_path, const char* labels_path, int mode, size_t offset,
                                      size_t limit, bcvnn_dataset** out) {
  return guarded([&] {
    auto& slot = deref(out, "out");
    bcvnn::require(mode == 0 || mode == 1, bcvnn::ErrorCode::InvalidArgument, "MNIST mode must be 0 or 1");
    slot = new bcvnn_dataset{bcvnn::load_mnist_complex(str(images_path, "images_path"), str(labels_path, "labels_path"),
                                                       mode == 0 ? bcvnn::MnistMode::ZeroImag : bcvnn::MnistMode::Dft,
                                                       offset, limit)};
  });
}

bcvnn_status bcvnn_dataset_generate(size_t classes, size_t samples_per_class, const size_t* feature_shape,
                                    size_t feature_rank, double class_separation, uint64_t seed,
                                    bcvnn_dataset** out) {
  return guarded([&] {
    auto& slot = deref(out, "out");
    bcvnn::require(feature_shape != nullptr && feature_rank >= 1, bcvnn::ErrorCode::InvalidArgument,
                   "feature shape is empty");
    bcvnn::SyntheticSpec spec;
    spec.classes = classes;
    spec.samples_per_class = samples_per_class;
    spec.feature_shape.assign(feature_shape, feature_shape + feature_rank);
    spec.class_separation = class_separation;
    spec.seed = seed;
    slot = new bcvnn_dataset{bcvnn::generate_synthetic(spec)};
  });
}

bcvnn_status bcvnn_dataset_load(const char* prefix, size_t classes, bcvnn_dataset** out) {
  return guarded([&] {
    auto& slot = deref(out, "out");
    slot = new bcvnn_dataset{bcvnn::load_dataset(str(prefix, "prefix"), classes)};
  });
}

bcvnn_status bcvnn_dataset_save(const bcvnn_dataset* data, const char* prefix) {
  return guarded([&] { bcvnn::save_dataset(str(prefix, "prefix"), deref(data, "data").data); });
}

bcvnn_status bcvnn_dataset_slice(const bcvnn_dataset* data, size_t first, size_t count, bcvnn_dataset** out) {
  return guarded([&] {
    auto& slot = deref(out, "out");
    slot = new bcvnn_dataset{bcvnn::slice(deref(data, "data").data, first, count)};
  });
}

bcvnn_status bcvnn_dataset_size(const bcvnn_dataset* data, size_t* size) {
  return guarded([&] { deref(size, "size") = deref(data, "data").data.size(); });
}

void bcvnn_dataset_free(bcvnn_dataset* data) { delete data; }

void bcvnn_train_config_default(bcvnn_train_config* config) {
  if (config == nullptr) return;
  const bcvnn::TrainConfig t;
  config->epochs = t.epochs;
  config->batch_size = t.batch_size;
  config->learning_rate = t.learning_rate;
  config->weight_decay = t.weight_decay;
  config->momentum = t.momentum;
  config->use_momentum = t.optimizer == bcvnn::Optimizer::Momentum ? 1 : 0;
  config->seed = t.seed;
}

bcvnn_status bcvnn_train(bcvnn_network* net, const bcvnn_dataset* data, const bcvnn_train_config* config,
                         const char* trace_csv_path, unsigned flags) {
  return guarded([&] {
    auto& n = deref(net, "net");
    auto result = bcvnn::train(n.spec, deref(data, "data").data, train_config(&deref(config, "config")));
    write_file(trace_csv_path, flags, [&](std::ostream& out) { bcvnn::write_trace_csv(out, result.trace); });
    n.weights = std::move(result.weights);
  });
}

bcvnn_status bcvnn_predict(const bcvnn_network* net, const bcvnn_dataset* data, size_t samples, uint64_t seed,
                           size_t ece_bins, unsigned threads, const char* csv_path, unsigned flags,
                           bcvnn_eval_summary* summary) {
  return guarded([&] {
    const auto& n = deref(net, "net");
    const auto& d = deref(data, "data").data;
    bcvnn::require(n.weights.has_value(), bcvnn::ErrorCode::InvalidArgument, "network has no trained weights");
    bcvnn::require(d.size() >= 1, bcvnn::ErrorCode::InvalidArgument, "dataset is empty");
    const auto predictions = bcvnn::mc_predict_dataset(n.spec, *n.weights, d, samples, seed, threads);
    const auto report = bcvnn::evaluate(predictions, d.labels, ece_bins);
    write_file(csv_path, flags,
               [&](std::ostream& out) { bcvnn::write_predictions_csv(out, predictions, d.labels, report); });
    if (summary) {
      summary->accuracy = report.accuracy;
      summary->ece = report.ece;
      summary->count = d.size();
      double total = 0.0;
      for (const auto& p : predictions) total += p.mean_std();
      summary->mean_std = total / static_cast<double>(d.size());
    }
  });
}

bcvnn_status bcvnn_predict_one(const bcvnn_network* net, const double* real, const double* imag, size_t length,
                               size_t samples, uint64_t seed, double* mean_probs, double* std_probs, size_t classes,
                               size_t* predicted_class) {
  return guarded([&] {
    const auto& n = deref(net, "net");
    bcvnn::require(n.weights.has_value(), bcvnn::ErrorCode::InvalidArgument, "network has no trained weights");
    bcvnn::require(real != nullptr && imag != nullptr, bcvnn::ErrorCode::InvalidArgument, "input is NULL");
    bcvnn::require(length == bcvnn::element_count(n.spec.input_shape), bcvnn::ErrorCode::ShapeMismatch,
                   "input length does not match the network input shape");
    bcvnn::require(classes == n.spec.classes, bcvnn::ErrorCode::InvalidArgument, "class count mismatch");
    bcvnn::ComplexTensor input(n.spec.input_shape, std::vector<bcvnn::Scalar>(real, real + length),
                               std::vector<bcvnn::Scalar>(imag, imag + length));
    bcvnn::Rng rng(seed);
    const auto p = bcvnn::mc_predict(n.spec, *n.weights, input, samples, rng);
    if (mean_probs) std::copy(p.mean_probs.begin(), p.mean_probs.end(), mean_probs);
    if (std_probs) std::copy(p.std_probs.begin(), p.std_probs.end(), std_probs);
    if (predicted_class) *predicted_class = p.predicted_class;
  });
}

bcvnn_status bcvnn_evaluator_from_callback(bcvnn_evaluate_fn fn, void* user_data, bcvnn_evaluator** out) {
  return guarded([&] {
    auto& slot = deref(out, "out");
    bcvnn::require(fn != nullptr, bcvnn::ErrorCode::InvalidArgument, "callback is NULL");
    slot = new bcvnn_evaluator([fn, user_data](const bcvnn::Genome& g) {
      const auto key = bcvnn::genome_to_string(g);
      bcvnn::Metrics m;
      const int rc = fn(key.c_str(), user_data, &m.accuracy, &m.ece);
      bcvnn::require(rc == 0, bcvnn::ErrorCode::Evaluator, "callback returned " + std::to_string(rc));
      return m;
    });
  });
}

bcvnn_status bcvnn_evaluator_from_table(const char* csv_path, bcvnn_evaluator** out) {
  return guarded([&] {
    auto& slot = deref(out, "out");
    std::ifstream in(str(csv_path, "csv_path"), std::ios::binary);
    bcvnn::require(static_cast<bool>(in), bcvnn::ErrorCode::Io, std::string("cannot open ") + csv_path);
    slot = new bcvnn_evaluator(bcvnn::table_evaluator(bcvnn::read_fitness_table(in)));
  });
}

bcvnn_status bcvnn_evaluator_from_training(const bcvnn_network* net, const bcvnn_dataset* train_data,
                                           const bcvnn_dataset* test_data, const bcvnn_train_config* config,
                                           size_t samples, uint64_t seed, size_t ece_bins, bcvnn_evaluator** out) {
  return guarded([&] {
    auto& slot = deref(out, "out");
    bcvnn::PipelineConfig cfg;
    cfg.train = train_config(&deref(config, "config"));
    cfg.mc_samples = samples;
    cfg.eval_seed = seed;
    cfg.ece_bins = ece_bins;
    slot = new bcvnn_evaluator(bcvnn::training_evaluator(deref(net, "net").spec, deref(train_data, "train_data").data,
                                                         deref(test_data, "test_data").data, cfg));
  });
}

bcvnn_status bcvnn_evaluator_calls(const bcvnn_evaluator* evaluator, size_t* calls) {
  return guarded([&] { deref(calls, "calls") = deref(evaluator, "evaluator").memo.calls(); });
}

void bcvnn_evaluator_free(bcvnn_evaluator* evaluator) { delete evaluator; }

void bcvnn_search_config_default(bcvnn_search_config* config) {
  if (config == nullptr) return;
  const bcvnn::SearchConfig s;
  config->genome_length = s.genome_length;
  config->population_size = s.population_size;
  config->mutation_portion = s.mutation_portion;
  config->mutation_prob = s.mutation_prob;
  config->crossover_prob = s.crossover_prob;
  config->iterations = s.iterations;
  config->objective = BCVNN_OBJECTIVE_MAX_ACC;
  config->w_acc = 1.0;
  config->w_ece = 1.0;
  config->max_dropout = -1;
  config->min_dropout = -1;
  config->seed = s.seed;
  config->threads = s.threads;
}

bcvnn_status bcvnn_search(bcvnn_evaluator* evaluator, const bcvnn_search_config* config,
                          const char* history_csv_path, const char* pareto_csv_path, unsigned flags,
                          bcvnn_record* best) {
  return guarded([&] {
    auto& ev = deref(evaluator, "evaluator");
    const auto result = bcvnn::run_search(search_config(deref(config, "config")), ev.memo);
    write_file(history_csv_path, flags, [&](std::ostream& out) { bcvnn::write_history_csv(out, result.history); });
    write_file(pareto_csv_path, flags, [&](std::ostream& out) { bcvnn::write_records_csv(out, result.pareto); });
    fill_record(result.best, best);
  });
}

bcvnn_status bcvnn_enumerate(bcvnn_evaluator* evaluator, const bcvnn_search_config* config, const char* csv_path,
                             unsigned flags, bcvnn_record* best, size_t* count) {
  return guarded([&] {
    auto& ev = deref(evaluator, "evaluator");
    const auto& c = deref(config, "config");
    const auto s = search_config(c);
    const auto records = bcvnn::enumerate_all(c.genome_length, ev.memo, s.objective, s.constraint);
    write_file(csv_path, flags, [&](std::ostream& out) { bcvnn::write_records_csv(out, records); });
    if (count) *count = records.size();
    fill_record(records.front(), best);
  });
}

bcvnn_status bcvnn_dropout_count(const char* genome, int* count) {
  return guarded([&] { deref(count, "count") = bcvnn::dropout_count(bcvnn::parse_genome(str(genome, "genome"))); });
}

bcvnn_status bcvnn_estimate(const bcvnn_network* net, const char* genome, bcvnn_scheme scheme, const char* csv_path,
                            unsigned flags, bcvnn_cost* total) {
  return guarded([&] {
    const auto& n = deref(net, "net");
    bcvnn::require(scheme == BCVNN_SCHEME_LATENCY_OPT || scheme == BCVNN_SCHEME_RESOURCE_OPT,
                   bcvnn::ErrorCode::InvalidArgument, "unknown mapping scheme");
    const auto cost = bcvnn::estimate_network(n.spec, genome_or_default(n, genome),
                                              scheme == BCVNN_SCHEME_LATENCY_OPT ? bcvnn::MappingScheme::LatencyOpt
                                                                                 : bcvnn::MappingScheme::ResourceOpt);
    write_file(csv_path, flags, [&](std::ostream& out) { bcvnn::write_cost_csv(out, cost); });
    fill_cost(cost.total, total);
  });
}

bcvnn_status bcvnn_compare_schemes(const bcvnn_network* net, const char* genome, const char* csv_path, unsigned flags,
                                   bcvnn_cost* latency_opt, bcvnn_cost* resource_opt) {
  return guarded([&] {
    const auto& n = deref(net, "net");
    const auto cmp = bcvnn::compare_schemes(n.spec, genome_or_default(n, genome));
    write_file(csv_path, flags, [&](std::ostream& out) { bcvnn::write_cost_csv(out, cmp); });
    fill_cost(cmp.latency_opt.total, latency_opt);
    fill_cost(cmp.resource_opt.total, resource_opt);
  });
}

}  // extern "C"
