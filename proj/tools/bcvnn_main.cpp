// bcvnn-cli: train, predict, search, enumerate, estimate and gendata on top
// of the bcvnn C API.
#include <algorithm>
#include <bcvnn/bcvnn.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitInvalid = 2;
constexpr int kConfigSchemaVersion = 1;

struct Failure {
  int exit_code;
  std::string code;
  std::string message;
};

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

[[noreturn]] void invalid(const std::string& message) { throw Failure{kExitInvalid, "invalid_argument", message}; }

void check(bcvnn_status status) {
  if (status == BCVNN_OK) return;
  const int exit_code = status == BCVNN_ERR_INVALID_ARGUMENT ? kExitInvalid : kExitRuntime;
  throw Failure{exit_code, bcvnn_status_name(status), bcvnn_last_error()};
}

// JSON config files: {"schema_version": 1, <global flags>, "<subcommand>": {<flags>}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConfigError("config must be a JSON object");
    const auto version = doc.find("schema_version");
    if (version == doc.end() || !version->is_number_integer() || version->get<int>() != kConfigSchemaVersion) {
      throw CLI::ConfigError("config schema_version must be " + std::to_string(kConfigSchemaVersion));
    }
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      if (key == "schema_version") continue;
      if (value.is_object()) {
        for (const auto& [sub_key, sub_value] : value.items()) items.push_back(item({key}, sub_key, sub_value));
      } else {
        items.push_back(item({}, key, value));
      }
    }
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v, const std::string& name) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConfigError("config value for '" + name + "' must be a scalar or a list of scalars");
  }

  static CLI::ConfigItem item(std::vector<std::string> parents, const std::string& name, const nlohmann::json& v) {
    CLI::ConfigItem out;
    out.parents = std::move(parents);
    // JSON keys may use underscores for the dashed flag names.
    out.name = name;
    std::replace(out.name.begin(), out.name.end(), '_', '-');
    if (v.is_array()) {
      for (const auto& e : v) out.inputs.push_back(scalar(e, name));
    } else {
      out.inputs.push_back(scalar(v, name));
    }
    return out;
  }
};

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using Network = Handle<bcvnn_network, bcvnn_network_free>;
using Dataset = Handle<bcvnn_dataset, bcvnn_dataset_free>;
using Evaluator = Handle<bcvnn_evaluator, bcvnn_evaluator_free>;

struct Global {
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool no_timestamp = false;
  std::string out_dir = ".";

  unsigned flags() const { return no_timestamp ? 0u : BCVNN_WRITE_TIMESTAMP; }

  std::uint64_t require_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("BCVNN_SEED"); env != nullptr && *env != '\0') {
      try {
        std::size_t used = 0;
        const auto v = std::stoull(env, &used);
        if (used == std::string(env).size()) return v;
      } catch (const std::exception&) {
      }
      invalid(std::string("BCVNN_SEED is not an unsigned integer: ") + env);
    }
    invalid("a seed is required: pass --seed or set BCVNN_SEED");
  }

  std::string path(const std::string& name) const {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Failure{kExitRuntime, "io", "cannot create output directory " + out_dir + ": " + ec.message()};
    return (fs::path(out_dir) / name).string();
  }
};

struct TrainFlags {
  bcvnn_train_config cfg = [] {
    bcvnn_train_config c;
    bcvnn_train_config_default(&c);
    return c;
  }();
  std::string optimizer = "momentum";

  void add(CLI::App* cmd) {
    cmd->add_option("--epochs", cfg.epochs, "Training epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--batch-size", cfg.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    cmd->add_option("--lr", cfg.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
    cmd->add_option("--weight-decay", cfg.weight_decay, "L2 penalty on weights (biases excluded)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--momentum", cfg.momentum, "Momentum coefficient")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--optimizer", optimizer, "sgd or momentum")->check(CLI::IsMember({"sgd", "momentum"}));
  }

  bcvnn_train_config config(std::uint64_t seed) const {
    auto c = cfg;
    c.use_momentum = optimizer == "momentum";
    c.seed = seed;
    return c;
  }
};

struct SearchFlags {
  std::string table;
  std::string spec;
  std::string train_data;
  std::string test_data;
  std::size_t samples = 3;
  std::size_t ece_bins = 15;
  std::size_t genome_length = 0;
  std::size_t population = 8;
  double mutation_portion = 0.5;
  double mutation_prob = 0.5;
  double crossover_prob = 0.5;
  std::size_t iterations = 10;
  std::string objective = "max-acc";
  double w_acc = 1.0;
  double w_ece = 1.0;
  int max_dropout = -1;
  int min_dropout = -1;
  TrainFlags train;

  void add(CLI::App* cmd, bool search_params) {
    auto* table_opt = cmd->add_option("--table", table, "Cached fitness CSV with genome,accuracy,ece columns")
                          ->check(CLI::ExistingFile);
    auto* spec_opt = cmd->add_option("--spec", spec, "Network spec JSON (train-and-evaluate fitness)")
                         ->check(CLI::ExistingFile);
    cmd->add_option("--train-data", train_data, "Training dataset prefix")->needs(spec_opt);
    cmd->add_option("--test-data", test_data, "Held-out dataset prefix")->needs(spec_opt);
    table_opt->excludes(spec_opt);
    cmd->add_option("--samples", samples, "MC samples per prediction")->check(CLI::PositiveNumber);
    cmd->add_option("--ece-bins", ece_bins, "Calibration bins")->check(CLI::PositiveNumber);
    cmd->add_option("--genome-length", genome_length,
                    "Number of Bayesian layers (0: from --spec, else 3)")
        ->check(CLI::PositiveNumber);
    if (search_params) {
      cmd->add_option("--population", population, "Population size")->check(CLI::Range(2, 100000));
      cmd->add_option("--mutation-portion", mutation_portion, "Fraction of offspring made by mutation")
          ->check(CLI::Range(0.0, 1.0));
      cmd->add_option("--mutation-prob", mutation_prob, "Per-gene mutation probability")->check(CLI::Range(0.0, 1.0));
      cmd->add_option("--crossover-prob", crossover_prob, "Per-gene probability of taking the second parent")
          ->check(CLI::Range(0.0, 1.0));
      cmd->add_option("--iterations", iterations, "Generations")->check(CLI::NonNegativeNumber);
    }
    cmd->add_option("--objective", objective, "max-acc, min-ece or weighted")
        ->check(CLI::IsMember({"max-acc", "min-ece", "weighted"}));
    cmd->add_option("--w-acc", w_acc, "Accuracy weight for the weighted objective");
    cmd->add_option("--w-ece", w_ece, "ECE weight for the weighted objective");
    cmd->add_option("--max-dropout", max_dropout, "Upper bound on dropout count, inclusive (-1: none)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--min-dropout", min_dropout, "Lower bound on dropout count, inclusive (-1: none)")
        ->check(CLI::NonNegativeNumber);
    train.add(cmd);
  }

  // Builds the evaluator and fills genome_length when it was not given.
  void make_evaluator(const Global& g, Evaluator& out, bcvnn_search_config& cfg) const {
    bcvnn_search_config_default(&cfg);
    cfg.genome_length = genome_length ? genome_length : 3;
    if (!table.empty()) {
      check(bcvnn_evaluator_from_table(table.c_str(), out.out()));
    } else if (!spec.empty()) {
      if (train_data.empty() || test_data.empty()) invalid("--spec needs --train-data and --test-data");
      const auto seed = g.require_seed();
      Network net;
      check(bcvnn_network_load_spec(spec.c_str(), net.out()));
      std::size_t layers = 0, classes = 0;
      check(bcvnn_network_bayesian_layers(net.get(), &layers));
      check(bcvnn_network_classes(net.get(), &classes));
      if (genome_length && genome_length != layers) {
        invalid("--genome-length " + std::to_string(genome_length) + " does not match the spec's " +
                std::to_string(layers) + " Bayesian layers");
      }
      cfg.genome_length = layers;
      Dataset tr, te;
      check(bcvnn_dataset_load(train_data.c_str(), classes, tr.out()));
      check(bcvnn_dataset_load(test_data.c_str(), classes, te.out()));
      const auto tc = train.config(seed);
      check(bcvnn_evaluator_from_training(net.get(), tr.get(), te.get(), &tc, samples, seed, ece_bins, out.out()));
    } else {
      invalid("pass either --table or --spec with --train-data and --test-data");
    }
    cfg.population_size = population;
    cfg.mutation_portion = mutation_portion;
    cfg.mutation_prob = mutation_prob;
    cfg.crossover_prob = crossover_prob;
    cfg.iterations = iterations;
    cfg.objective = objective == "max-acc"   ? BCVNN_OBJECTIVE_MAX_ACC
                    : objective == "min-ece" ? BCVNN_OBJECTIVE_MIN_ECE
                                             : BCVNN_OBJECTIVE_WEIGHTED;
    cfg.w_acc = w_acc;
    cfg.w_ece = w_ece;
    cfg.max_dropout = max_dropout;
    cfg.min_dropout = min_dropout;
    cfg.threads = g.threads;
  }
};

void print_record(const char* label, const bcvnn_record& r) {
  std::printf("%s genome=%s accuracy=%.6f ece=%.6f fitness=%.6f dropout_count=%d feasible=%d\n", label, r.genome,
              r.accuracy, r.ece, r.fitness, r.dropout_count, r.feasible);
}

void print_cost(const char* scheme, const bcvnn_cost& c) {
  std::printf("%s latency_units=%.0f engines=%llu mac_ops=%llu dropout_engines=%llu memory_words=%llu\n", scheme,
              c.latency_units, static_cast<unsigned long long>(c.engine_count),
              static_cast<unsigned long long>(c.mac_ops), static_cast<unsigned long long>(c.dropout_engines),
              static_cast<unsigned long long>(c.memory_words));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian complex-valued neural networks: training, MC-dropout prediction, "
               "dropout-configuration search and hardware cost estimation",
               "bcvnn-cli"};
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", std::string(bcvnn_version()));
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file (schema_version 1); command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  Global g;
  app.add_option("--seed", g.seed, "Seed for every stochastic step (fallback: BCVNN_SEED)");
  app.add_option("--threads", g.threads, "Worker threads for per-genome and per-input work")
      ->check(CLI::PositiveNumber);
  app.add_flag("--no-timestamp", g.no_timestamp, "Omit the '# generated' header line from CSV outputs");
  app.add_option("--out-dir", g.out_dir, "Directory for output files");

  // train
  auto* train = app.add_subcommand("train", "Train a network; writes checkpoint/ and trace.csv");
  std::string train_spec, train_data, train_genome;
  TrainFlags train_flags;
  train->add_option("--spec", train_spec, "Network spec JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--data", train_data, "Dataset prefix (<prefix>.bcvt + <prefix>.labels.csv)")->required();
  train->add_option("--genome", train_genome, "Override part modes, e.g. R-B-I");
  train_flags.add(train);

  // predict
  auto* predict = app.add_subcommand("predict", "MC-dropout prediction; writes predictions.csv");
  std::string predict_ckpt, predict_data, predict_genome;
  std::size_t predict_samples = 3, predict_bins = 15;
  predict->add_option("--checkpoint", predict_ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  predict->add_option("--data", predict_data, "Dataset prefix")->required();
  predict->add_option("--samples", predict_samples, "MC samples T")->check(CLI::PositiveNumber);
  predict->add_option("--ece-bins", predict_bins, "Calibration bins")->check(CLI::PositiveNumber);
  predict->add_option("--genome", predict_genome, "Override part modes at inference time");

  // search / enumerate
  auto* search = app.add_subcommand("search", "Evolutionary search; writes history.csv and pareto.csv");
  SearchFlags search_flags;
  search_flags.add(search, true);
  auto* enumerate = app.add_subcommand("enumerate", "Evaluate all 3^N genomes (N <= 10); writes enumerate.csv");
  SearchFlags enum_flags;
  enum_flags.add(enumerate, false);

  // estimate
  auto* estimate = app.add_subcommand("estimate", "Hardware cost report; writes cost_<scheme>.csv");
  std::string est_spec, est_ckpt, est_genome, est_scheme = "both";
  auto* est_spec_opt = estimate->add_option("--spec", est_spec, "Network spec JSON")->check(CLI::ExistingFile);
  estimate->add_option("--checkpoint", est_ckpt, "Checkpoint directory (alternative to --spec)")
      ->check(CLI::ExistingDirectory)
      ->excludes(est_spec_opt);
  estimate->add_option("--genome", est_genome, "Part modes to cost (default: the spec's)");
  estimate->add_option("--scheme", est_scheme, "latency-opt, resource-opt or both")
      ->check(CLI::IsMember({"latency-opt", "resource-opt", "both"}));

  // gendata
  auto* gendata = app.add_subcommand("gendata", "Write a dataset as <out>.bcvt + <out>.labels.csv");
  std::string gen_kind = "synthetic", gen_out, gen_images, gen_labels, gen_mode = "zero-imag";
  std::size_t gen_classes = 2, gen_spc = 50, gen_test_pc = 0, gen_offset = 0, gen_limit = 0;
  std::vector<std::size_t> gen_shape{8};
  double gen_sep = 1.0;
  gendata->add_option("--kind", gen_kind, "synthetic or mnist")->check(CLI::IsMember({"synthetic", "mnist"}));
  gendata->add_option("--out", gen_out, "Output prefix")->required();
  gendata->add_option("--classes", gen_classes, "synthetic: class count")->check(CLI::Range(2, 1000000));
  gendata->add_option("--samples-per-class", gen_spc, "synthetic: samples per class")->check(CLI::PositiveNumber);
  gendata->add_option("--test-per-class", gen_test_pc,
                      "synthetic: also write a held-out split from the same centroids to <out>-test; "
                      "the training split goes to <out>-train");
  gendata->add_option("--feature-shape", gen_shape, "synthetic: per-sample shape, e.g. 1 8 8")
      ->check(CLI::PositiveNumber);
  gendata->add_option("--separation", gen_sep, "synthetic: centroid radius scale")->check(CLI::PositiveNumber);
  gendata->add_option("--images", gen_images, "mnist: IDX image file")->check(CLI::ExistingFile);
  gendata->add_option("--labels", gen_labels, "mnist: IDX label file")->check(CLI::ExistingFile);
  gendata->add_option("--mode", gen_mode, "mnist: zero-imag or dft")->check(CLI::IsMember({"zero-imag", "dft"}));
  gendata->add_option("--offset", gen_offset, "mnist: first image");
  gendata->add_option("--limit", gen_limit, "mnist: image count (0 = all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: code=invalid_argument message=%s\n", one_line(e.what()).c_str());
    return kExitInvalid;
  }

  try {
    if (*train) {
      const auto seed = g.require_seed();
      Network net;
      check(bcvnn_network_load_spec(train_spec.c_str(), net.out()));
      if (!train_genome.empty()) check(bcvnn_network_set_genome(net.get(), train_genome.c_str()));
      std::size_t classes = 0;
      check(bcvnn_network_classes(net.get(), &classes));
      Dataset data;
      check(bcvnn_dataset_load(train_data.c_str(), classes, data.out()));
      const auto cfg = train_flags.config(seed);
      const auto trace = g.path("trace.csv");
      check(bcvnn_train(net.get(), data.get(), &cfg, trace.c_str(), g.flags()));
      const auto ckpt = g.path("checkpoint");
      check(bcvnn_network_save_checkpoint(net.get(), ckpt.c_str()));
      char genome[BCVNN_GENOME_MAX];
      check(bcvnn_network_genome(net.get(), genome, sizeof genome));
      std::printf("trained genome=%s checkpoint=%s trace=%s\n", genome, ckpt.c_str(), trace.c_str());
    } else if (*predict) {
      const auto seed = g.require_seed();
      Network net;
      check(bcvnn_network_load_checkpoint(predict_ckpt.c_str(), net.out()));
      if (!predict_genome.empty()) check(bcvnn_network_set_genome(net.get(), predict_genome.c_str()));
      std::size_t classes = 0;
      check(bcvnn_network_classes(net.get(), &classes));
      Dataset data;
      check(bcvnn_dataset_load(predict_data.c_str(), classes, data.out()));
      const auto csv = g.path("predictions.csv");
      bcvnn_eval_summary s{};
      check(bcvnn_predict(net.get(), data.get(), predict_samples, seed, predict_bins, g.threads, csv.c_str(),
                          g.flags(), &s));
      std::printf("predicted count=%zu accuracy=%.6f ece=%.6f mean_std=%.6f csv=%s\n", s.count, s.accuracy, s.ece,
                  s.mean_std, csv.c_str());
    } else if (*search) {
      const auto seed = g.require_seed();
      Evaluator ev;
      bcvnn_search_config cfg;
      search_flags.make_evaluator(g, ev, cfg);
      cfg.seed = seed;
      const auto history = g.path("history.csv"), pareto = g.path("pareto.csv");
      bcvnn_record best{};
      check(bcvnn_search(ev.get(), &cfg, history.c_str(), pareto.c_str(), g.flags(), &best));
      std::size_t calls = 0;
      check(bcvnn_evaluator_calls(ev.get(), &calls));
      print_record("best", best);
      std::printf("evaluations=%zu history=%s pareto=%s\n", calls, history.c_str(), pareto.c_str());
    } else if (*enumerate) {
      Evaluator ev;
      bcvnn_search_config cfg;
      enum_flags.make_evaluator(g, ev, cfg);
      const auto csv = g.path("enumerate.csv");
      bcvnn_record best{};
      std::size_t count = 0;
      check(bcvnn_enumerate(ev.get(), &cfg, csv.c_str(), g.flags(), &best, &count));
      print_record("best", best);
      std::printf("records=%zu csv=%s\n", count, csv.c_str());
    } else if (*estimate) {
      Network net;
      if (!est_spec.empty()) {
        check(bcvnn_network_load_spec(est_spec.c_str(), net.out()));
      } else if (!est_ckpt.empty()) {
        check(bcvnn_network_load_checkpoint(est_ckpt.c_str(), net.out()));
      } else {
        invalid("estimate needs --spec or --checkpoint");
      }
      const char* genome = est_genome.empty() ? nullptr : est_genome.c_str();
      for (const auto& [name, scheme] : {std::pair{"latency-opt", BCVNN_SCHEME_LATENCY_OPT},
                                         std::pair{"resource-opt", BCVNN_SCHEME_RESOURCE_OPT}}) {
        if (est_scheme != "both" && est_scheme != name) continue;
        const auto csv = g.path(std::string("cost_") + name + ".csv");
        bcvnn_cost total{};
        check(bcvnn_estimate(net.get(), genome, scheme, csv.c_str(), g.flags(), &total));
        print_cost(name, total);
      }
    } else if (*gendata) {
      Dataset data;
      if (gen_kind == "synthetic") {
        const auto seed = g.require_seed();
        check(bcvnn_dataset_generate(gen_classes, gen_spc + gen_test_pc, gen_shape.data(), gen_shape.size(), gen_sep,
                                     seed, data.out()));
      } else {
        if (gen_images.empty() || gen_labels.empty()) invalid("--kind mnist needs --images and --labels");
        if (gen_test_pc) invalid("--test-per-class applies to synthetic data only");
        check(bcvnn_dataset_load_mnist(gen_images.c_str(), gen_labels.c_str(), gen_mode == "dft" ? 1 : 0,
                                       gen_offset, gen_limit, data.out()));
      }
      if (const auto parent = fs::path(gen_out).parent_path(); !parent.empty()) {
        std::error_code ec;
        fs::create_directories(parent, ec);
      }
      auto save = [](const bcvnn_dataset* d, const std::string& prefix) {
        check(bcvnn_dataset_save(d, prefix.c_str()));
        std::size_t n = 0;
        check(bcvnn_dataset_size(d, &n));
        std::printf("wrote samples=%zu prefix=%s\n", n, prefix.c_str());
      };
      if (gen_test_pc == 0) {
        save(data.get(), gen_out);
      } else {
        // Samples are class-interleaved, so both slices stay balanced.
        Dataset tr, te;
        check(bcvnn_dataset_slice(data.get(), 0, gen_classes * gen_spc, tr.out()));
        check(bcvnn_dataset_slice(data.get(), gen_classes * gen_spc, gen_classes * gen_test_pc, te.out()));
        save(tr.get(), gen_out + "-train");
        save(te.get(), gen_out + "-test");
      }
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: code=%s message=%s\n", f.code.c_str(), one_line(f.message).c_str());
    return f.exit_code;
  }
  return 0;
}
