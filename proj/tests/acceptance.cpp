// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero if
// any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bcvnn/data.hpp"
#include "bcvnn/error.hpp"
#include "bcvnn/hw_model.hpp"
#include "bcvnn/inference.hpp"
#include "bcvnn/pipeline.hpp"
#include "bcvnn/search.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace bcvnn;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Outcome criterion1() {
  Outcome o;
  Rng rng(101);
  double worst = 0.0;
  auto close = [&](const ComplexTensor& got, const std::vector<oracle::cd>& want) {
    const auto g = oracle::to_complex(got);
    if (g.size() != want.size()) return false;
    for (std::size_t i = 0; i < want.size(); ++i) {
      worst = std::max(worst, std::abs(g[i] - want[i]) / std::max(std::abs(want[i]), 1e-12));
    }
    return true;
  };
  for (int trial = 0; trial < 120; ++trial) {
    // shapes up to 4x4x8x8
    const std::size_t n = 1 + rng.below(4), c = 1 + rng.below(4), h = 1 + rng.below(8), w = 1 + rng.below(8);
    const std::size_t kh = 1 + rng.below(h), kw = 1 + rng.below(w), out = 1 + rng.below(4), stride = 1 + rng.below(2);
    const auto x = oracle::random_tensor({n, c, h, w}, rng);
    const ComplexWeights cw{oracle::random_tensor({out, c, kh, kw}, rng), oracle::random_tensor({out}, rng)};
    o.require(close(complex_conv2d(x, cw, stride),
                    oracle::conv2d(oracle::to_complex(x), n, c, h, w, oracle::to_complex(cw.weight), out, kh, kw,
                                   oracle::to_complex(cw.bias), stride)),
              "conv shape");
    const std::size_t in = c * h * w;
    const ComplexWeights dw{oracle::random_tensor({out, in}, rng), oracle::random_tensor({out}, rng)};
    const ComplexTensor flat = x.reshaped({n, in});
    o.require(close(complex_dense(flat, dw), oracle::dense(oracle::to_complex(flat), n, in,
                                                           oracle::to_complex(dw.weight), out,
                                                           oracle::to_complex(dw.bias))),
              "dense shape");
  }
  o.require(worst <= 1e-9, "max rel err " + std::to_string(worst));
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("240 instances, max rel err ") + std::to_string(worst);
  return o;
}

Outcome criterion2() {
  Outcome o;
  Rng rng(202);
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& kind : gradcheck::kKinds) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto spec = gradcheck::network_for(kind, rng);
      const auto r = gradcheck::run(spec, 5000 + trial, 2, 1e-3, kind == "dropout", 1e-5);
      o.require(r.checked > 0, kind + ": nothing checked");
      worst = std::max(worst, r.max_rel_err);
      checked += r.checked;
    }
  }
  o.require(worst <= 1e-4, "max rel err " + std::to_string(worst));
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(gradcheck::kKinds.size()) + " kinds x 20 configs, " +
              std::to_string(checked) + " parameters, max rel err " + std::to_string(worst);
  return o;
}

Outcome criterion3() {
  Outcome o;
  constexpr std::size_t kDraws = 10000, kChannels = 4;
  double worst_z = 0.0;
  for (double keep : {0.5, 0.8, 0.95}) {
    Rng rng(Rng::derive(303, {static_cast<std::uint64_t>(keep * 100)}));
    // samples x channels x 2 x 3, all entries nonzero
    ComplexTensor x({2, kChannels, 2, 3});
    for (std::size_t i = 0; i < x.size(); ++i) {
      x.real()[i] = static_cast<Scalar>(1.0 + 0.01 * static_cast<double>(i));
      x.imag()[i] = static_cast<Scalar>(-2.0 - 0.01 * static_cast<double>(i));
    }
    const std::size_t block = 6;
    std::vector<std::size_t> kept_re(kChannels), kept_im(kChannels);
    for (std::size_t d = 0; d < kDraws; ++d) {
      const auto mode = static_cast<PartMode>(d % 3);
      const auto y = bernoulli_channel_dropout(x, keep, mode, rng);
      const std::size_t bytes = x.size() * sizeof(Scalar);
      if (mode == PartMode::Real) o.require(!std::memcmp(y.imag().data(), x.imag().data(), bytes), "imag touched");
      if (mode == PartMode::Imag) o.require(!std::memcmp(y.real().data(), x.real().data(), bytes), "real touched");
      for (std::size_t s = 0; s < 2; ++s) {
        for (std::size_t c = 0; c < kChannels; ++c) {
          for (int part = 0; part < 2; ++part) {
            const bool masked = part == 0 ? mode != PartMode::Imag : mode != PartMode::Real;
            if (!masked) continue;
            const auto& xs = part ? x.imag() : x.real();
            const auto& ys = part ? y.imag() : y.real();
            const std::size_t base = (s * kChannels + c) * block;
            const bool kept = ys[base] != 0;
            for (std::size_t k = 0; k < block; ++k) {
              const Scalar want = kept ? static_cast<Scalar>(xs[base + k] / keep) : Scalar{0};
              // whole channel kept (scaled) or whole channel zero
              if (std::abs(ys[base + k] - want) > 1e-12 * std::abs(xs[base + k])) {
                o.require(false, "channel granularity broken");
              }
            }
            if (s == 0) (part ? kept_im : kept_re)[c] += kept;
          }
        }
      }
    }
    const double trials_re = 2.0 * kDraws / 3.0, trials_im = 2.0 * kDraws / 3.0;
    for (std::size_t c = 0; c < kChannels; ++c) {
      for (auto [count, trials] : {std::pair{kept_re[c], trials_re}, {kept_im[c], trials_im}}) {
        const double se = std::sqrt(keep * (1 - keep) / trials);
        const double z = std::abs(static_cast<double>(count) / trials - keep) / se;
        worst_z = std::max(worst_z, z);
      }
    }
  }
  o.require(worst_z <= 3.0, "keep frequency off by " + std::to_string(worst_z) + " SE");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("worst deviation ") + std::to_string(worst_z) + " SE";
  return o;
}

NetworkSpec mc_net(double keep) {
  return {{1, 6, 6},
          3,
          {Conv2DSpec{3, 3, 3, 1}, ActivationSpec{}, DropoutSpec{keep, PartMode::Both}, PoolSpec{2, PoolReduction::Avg},
           DenseSpec{8}, ActivationSpec{}, DropoutSpec{keep, PartMode::Real}, DenseSpec{8},
           DropoutSpec{keep, PartMode::Imag}, DenseSpec{3}}};
}

Outcome criterion4() {
  Outcome o;
  const auto data = generate_synthetic({3, 20, {1, 6, 6}, 2.0, 44});
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 4;
  const auto det = mc_net(1.0);
  const auto w1 = train(det, data, cfg).weights;
  for (const auto& p : mc_predict_dataset(det, w1, data, 5, 9)) {
    for (double s : p.std_probs) o.require(s == 0.0, "nonzero std at keep rate 1");
  }
  o.require(kDefaultMcSamples == 3, "default sampling number is not 3");
  const auto stoch = mc_net(0.7);
  const auto a = train(stoch, data, cfg), b = train(stoch, data, cfg);
  o.require(a.weights == b.weights, "training not reproducible");
  const auto pa = mc_predict_dataset(stoch, a.weights, data, kDefaultMcSamples, 12, 1);
  const auto pb = mc_predict_dataset(stoch, b.weights, data, kDefaultMcSamples, 12, 3);
  o.require(pa == pb, "MC prediction not reproducible");
  o.require(pa.front().samples_used == 3, "default T not used");
  bool spread = false;
  for (const auto& p : pa) spread = spread || p.mean_std() > 0;
  o.require(spread, "no spread with active dropout");
  return o;
}

Outcome criterion5() {
  Outcome o;
  {
    const double conf[] = {0.8, 0.6};
    const bool ok[] = {true, false};
    o.require(std::abs(ece(conf, ok, 1) - 0.2) <= 1e-12, "single-bin fixture");
  }
  {
    const double conf[] = {0.4, 0.9, 0.9};
    const bool ok[] = {false, true, true};
    o.require(std::abs(ece(conf, ok, 2) - 0.2) <= 1e-12, "two-bin fixture");
  }
  Rng rng(505);
  std::vector<double> conf;
  std::unique_ptr<bool[]> ok(new bool[10000]);
  for (std::size_t i = 0; i < 10000; ++i) {
    conf.push_back(rng.uniform());
    ok[i] = rng.bernoulli(conf.back());
  }
  const double e = ece(conf, std::span<const bool>(ok.get(), 10000));
  o.require(e < 0.03, "calibrated stream ECE " + std::to_string(e));
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("calibrated stream ECE ") + std::to_string(e);
  return o;
}

Outcome criterion6() {
  Outcome o;
  MemoizedEvaluator ev([](const Genome&) { return Metrics{0.5, 0.1}; });
  o.require(enumerate_all(3, ev).size() == 27, "N=3 count");
  o.require(enumerate_all(6, ev).size() == 729, "N=6 count");
  const std::map<std::string, int> table{{"B-B-B", 6}, {"I-I-B", 4}, {"I-R-I", 3}, {"R-B-R", 4}};
  for (const auto& [g, count] : table) o.require(dropout_count(parse_genome(g)) == count, g);
  return o;
}

Outcome criterion7() {
  Outcome o;
  Rng rng(707);
  int matched = 0;
  for (int trial = 0; trial < 24; ++trial) {
    const std::size_t n = 1 + trial % 4;
    std::map<std::string, Metrics> table;
    MemoizedEvaluator fill([](const Genome&) { return Metrics{}; });
    for (const auto& r : enumerate_all(n, fill)) {
      table[genome_to_string(r.genome)] = {std::round(rng.uniform(0.5, 1.0) * 40) / 40,
                                           std::round(rng.uniform(0.0, 0.2) * 40) / 40};
    }
    SearchConfig cfg;
    cfg.genome_length = n;
    cfg.population_size = 8;
    cfg.mutation_portion = 0.5;
    cfg.mutation_prob = 0.5;
    cfg.crossover_prob = 0.5;
    cfg.iterations = 40;
    cfg.seed = 7000 + trial;
    if (trial % 3 == 1) cfg.constraint.max_dropout = static_cast<int>(n) + 1;
    if (trial % 3 == 2) cfg.objective = Objective::weighted(1.0, 2.0);
    MemoizedEvaluator a(table_evaluator(table)), b(table_evaluator(table));
    const auto best = run_search(cfg, a).best;
    const auto all = enumerate_all(n, b, cfg.objective, cfg.constraint);
    const bool same = genome_to_string(best.genome) == genome_to_string(all.front().genome);
    o.require(same, "trial " + std::to_string(trial) + " optimum differs");
    o.require(best.feasible && cfg.constraint.satisfied(best.genome), "constraint violated");
    matched += same;
  }
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(matched) + "/24 tables matched";
  return o;
}

NetworkSpec mnist_net(Genome genome) {
  NetworkSpec s{{1, 28, 28},
                10,
                {Conv2DSpec{6, 5, 5, 1}, ActivationSpec{}, DropoutSpec{0.9, PartMode::Both}, PoolSpec{2, PoolReduction::Max},
                 Conv2DSpec{12, 5, 5, 1}, ActivationSpec{}, DropoutSpec{0.9, PartMode::Both}, PoolSpec{2, PoolReduction::Max},
                 DenseSpec{64}, ActivationSpec{}, DropoutSpec{0.9, PartMode::Both}, DenseSpec{10}}};
  return with_genome(s, genome);
}

Outcome criterion8() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::string dir = BCVNN_TEST_DATA "/mnist/";
  const auto train_set =
      load_mnist_complex(dir + "train-images-idx3-ubyte", dir + "train-labels-idx1-ubyte", MnistMode::ZeroImag);
  const auto test_set =
      load_mnist_complex(dir + "t10k-images-idx3-ubyte", dir + "t10k-labels-idx1-ubyte", MnistMode::ZeroImag);
  o.require(train_set.size() == 2000 && test_set.size() == 1000, "MNIST subset sizes");

  PipelineConfig full;
  full.train.epochs = 10;
  full.train.learning_rate = 0.02;
  full.train.seed = 8;
  full.eval_seed = 88;
  const Genome all_both = parse_genome("B-B-B");
  const auto manual = train_and_evaluate(mnist_net(all_both), all_both, train_set, test_set, full);
  o.require(manual.accuracy >= 0.90, "B-B-B test accuracy " + std::to_string(manual.accuracy));

  // Search on a validation split carved from the training images only.
  PipelineConfig quick = full;
  quick.train.epochs = 3;
  SearchConfig cfg;
  cfg.genome_length = 3;
  cfg.iterations = 3;
  cfg.seed = 808;
  cfg.constraint.max_dropout = 5;
  MemoizedEvaluator ev(training_evaluator(mnist_net(all_both), slice(train_set, 0, 1500), slice(train_set, 1500, 500),
                                          quick));
  const auto found = run_search(cfg, ev).best;
  const auto searched = train_and_evaluate(mnist_net(found.genome), found.genome, train_set, test_set, full);
  o.require(searched.accuracy >= manual.accuracy - 0.01,
            "searched " + std::to_string(searched.accuracy) + " vs B-B-B " + std::to_string(manual.accuracy));
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 900, "runtime " + std::to_string(elapsed) + " s");
  char buf[256];
  std::snprintf(buf, sizeof buf, "B-B-B acc %.4f; searched %s (%zu evals) acc %.4f; %.0f s", manual.accuracy,
                genome_to_string(found.genome).c_str(), ev.calls(), searched.accuracy, elapsed);
  o.detail += (o.detail.empty() ? "" : "; ") + std::string(buf);
  return o;
}

Outcome criterion9() {
  Outcome o;
  const auto spec = mnist_net(parse_genome("B-B-B"));
  const auto cmp = compare_schemes(spec, parse_genome("I-B-R"));
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& lo = cmp.latency_opt.layers[i];
    const auto& ro = cmp.resource_opt.layers[i];
    o.require(lo.cost.mac_ops == ro.cost.mac_ops, "mac_ops differ at layer " + std::to_string(i));
    if (lo.layer_class != LayerClass::Class3) {
      o.require(ro.cost.latency_units == 2 * lo.cost.latency_units, "latency ratio at layer " + std::to_string(i));
    }
  }
  double prev_lo = 0, prev_ro = 0, prev_gap = -1;
  for (std::size_t out : {128, 256, 512, 1024}) {
    const NetworkSpec net{{128}, out, {DenseSpec{out}}};
    const auto c = compare_schemes(net, {});
    const double lo = c.latency_opt.total.latency_units, ro = c.resource_opt.total.latency_units;
    o.require(lo > prev_lo && ro > prev_ro, "sweep latency not monotone");
    o.require(ro - lo > prev_gap, "sweep gap not widening");
    prev_lo = lo;
    prev_ro = ro;
    prev_gap = ro - lo;
  }
  MemoizedEvaluator dummy([](const Genome&) { return Metrics{}; });
  const auto genomes = enumerate_all(3, dummy);
  for (auto scheme : {MappingScheme::LatencyOpt, MappingScheme::ResourceOpt}) {
    for (const auto& a : genomes) {
      for (const auto& b : genomes) {
        if (a.dropout_count >= b.dropout_count) continue;
        const auto ca = estimate_network(spec, a.genome, scheme).total;
        const auto cb = estimate_network(spec, b.genome, scheme).total;
        o.require(ca.latency_units <= cb.latency_units && ca.engine_count <= cb.engine_count &&
                      ca.dropout_engines < cb.dropout_engines && ca.memory_words <= cb.memory_words,
                  "cost not monotone in dropout count");
      }
    }
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"complex kernels match the naive oracle", criterion1},
      {"analytic gradients match central differences", criterion2},
      {"dropout keep statistics, part isolation, channel granularity", criterion3},
      {"MC-dropout sanity", criterion4},
      {"ECE fixtures and calibrated stream", criterion5},
      {"design-space combinatorics", criterion6},
      {"search matches exhaustive enumeration", criterion7},
      {"desk-scale MNIST learning and searched genome", criterion8},
      {"hardware model properties", criterion9},
  };
  const std::vector<double> limits{10, 60, 0, 0, 0, 0, 30, 900, 0};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double t = seconds_since(t0);
    if (limits[i] > 0 && t >= limits[i]) {
      o.pass = false;
      o.detail += "; over time limit";
    }
    failed += !o.pass;
    std::printf("%s %zu %s (%.2f s)%s%s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), t,
                o.detail.empty() ? "" : ": ", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
