#include <memory>
#include <sstream>

#include "bcvnn/data.hpp"
#include "bcvnn/error.hpp"
#include "bcvnn/inference.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bcvnn;

namespace {

NetworkSpec net(double keep) {
  return {{6}, 3, {DenseSpec{8}, ActivationSpec{}, DropoutSpec{keep, PartMode::Both}, DenseSpec{8},
                   DropoutSpec{keep, PartMode::Real}, DenseSpec{3}}};
}

MCPrediction prediction(std::vector<double> probs) {
  MCPrediction p;
  p.mean_probs = probs;
  p.std_probs.assign(probs.size(), 0.0);
  p.predicted_class = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
  p.samples_used = 1;
  return p;
}

}  // namespace

TEST_CASE("keep rate one gives exactly zero spread") {
  const auto spec = net(1.0);
  const auto w = init_weights(spec, 1);
  Rng data_rng(2);
  for (std::size_t t : {1, 3, 7}) {
    Rng rng(5);
    const auto p = mc_predict(spec, w, oracle::random_tensor({6}, data_rng), t, rng);
    CHECK(p.samples_used == t);
    for (auto s : p.std_probs) CHECK(s == 0.0);
  }
  const NetworkSpec plain{{6}, 3, {DenseSpec{3}}};
  Rng rng(1);
  const auto p = mc_predict(plain, init_weights(plain, 1), oracle::random_tensor({6}, data_rng), 4, rng);
  for (auto s : p.std_probs) CHECK(s == 0.0);
}

TEST_CASE("a single sample has zero spread under the population convention") {
  const auto spec = net(0.5);
  const auto w = init_weights(spec, 1);
  Rng data_rng(3), rng(4);
  const auto p = mc_predict(spec, w, oracle::random_tensor({6}, data_rng), 1, rng);
  for (auto s : p.std_probs) CHECK(s == 0.0);
}

TEST_CASE("default sampling number is three") { CHECK(kDefaultMcSamples == 3); }

TEST_CASE("mean and std match a direct recomputation from the same draws") {
  const auto spec = net(0.6);
  const auto w = init_weights(spec, 8);
  Rng data_rng(9);
  const auto x = oracle::random_tensor({6}, data_rng);
  Rng rng(10), replay(10);
  const auto p = mc_predict(spec, w, x, 5, rng);
  std::vector<std::vector<double>> draws;
  for (int t = 0; t < 5; ++t) draws.push_back(oracle::softmax_of_magnitudes(oracle::to_complex(forward(spec, w, x, true, replay))));
  double total = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    double mean = 0.0;
    for (const auto& d : draws) mean += d[k] / 5.0;
    double var = 0.0;
    for (const auto& d : draws) var += (d[k] - mean) * (d[k] - mean) / 5.0;
    CHECK(p.mean_probs[k] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(p.std_probs[k] == doctest::Approx(std::sqrt(var)).epsilon(1e-9));
    CHECK(p.std_probs[k] >= 0.0);
    total += p.mean_probs[k];
  }
  CHECK(std::abs(total - 1.0) <= 1e-9);
  CHECK(p.predicted_class == static_cast<std::size_t>(std::max_element(p.mean_probs.begin(), p.mean_probs.end()) -
                                                      p.mean_probs.begin()));
}

TEST_CASE("seeded prediction is reproducible and independent of threads") {
  const auto spec = net(0.7);
  const auto w = init_weights(spec, 3);
  const auto data = generate_synthetic({3, 10, {6}, 1.0, 4});
  const auto a = mc_predict_dataset(spec, w, data, 3, 77, 1);
  CHECK(a == mc_predict_dataset(spec, w, data, 3, 77, 1));
  CHECK(a == mc_predict_dataset(spec, w, data, 3, 77, 4));
  CHECK_FALSE(a == mc_predict_dataset(spec, w, data, 3, 78, 1));
  Rng rng(1);
  CHECK_THROWS_AS(mc_predict(spec, w, data.inputs[0], 0, rng), Error);
}

TEST_CASE("accuracy") {
  const std::vector<MCPrediction> preds{prediction({0.9, 0.1}), prediction({0.2, 0.8}), prediction({0.6, 0.4})};
  CHECK(accuracy(preds, std::vector<int>{0, 1, 0}) == 1.0);
  CHECK(accuracy(preds, std::vector<int>{1, 0, 1}) == 0.0);
  CHECK(accuracy(preds, std::vector<int>{0, 0, 0}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("ECE hand-evaluated fixtures") {
  const bool t = true, f = false;
  {
    const double conf[] = {1.0, 1.0, 1.0};
    const bool ok[] = {t, t, t};
    CHECK(ece(conf, ok) == 0.0);
  }
  {
    // One bin: accuracy 0.5, mean confidence 0.7.
    const double conf[] = {0.8, 0.6};
    const bool ok[] = {t, f};
    CHECK(ece(conf, ok, 1) == doctest::Approx(0.2).epsilon(1e-12));
  }
  {
    // Two bins: |0 - 0.4| / 3 + |1 - 0.9| * 2 / 3.
    const double conf[] = {0.4, 0.9, 0.9};
    const bool ok[] = {f, t, t};
    CHECK(ece(conf, ok, 2) == doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("calibration bins") {
  CHECK(calibration_bin(0.0, 10) == 0);
  CHECK(calibration_bin(0.1, 10) == 0);
  CHECK(calibration_bin(0.1000001, 10) == 1);
  CHECK(calibration_bin(1.0, 10) == 9);
  CHECK(calibration_bin(0.5, 2) == 0);
  const double conf[] = {0.05, 0.5, 0.55, 1.0};
  const bool ok[] = {true, false, true, true};
  const auto bins = calibration_bins(conf, ok, 2);
  REQUIRE(bins.size() == 2);
  CHECK(bins[0].count == 2);
  CHECK(bins[1].count == 2);
  CHECK(bins[0].accuracy == 0.5);
  CHECK(bins[1].confidence == doctest::Approx(0.775));
}

TEST_CASE("a calibrated stream has small ECE") {
  Rng rng(2024);
  std::vector<double> conf;
  std::unique_ptr<bool[]> ok(new bool[10000]);
  for (std::size_t i = 0; i < 10000; ++i) {
    conf.push_back(rng.uniform());
    ok[i] = rng.bernoulli(conf.back());
  }
  const double e = ece(conf, std::span<const bool>(ok.get(), 10000));
  CHECK(e >= 0.0);
  CHECK(e < 0.03);
}

TEST_CASE("evaluate and the predictions CSV") {
  const std::vector<MCPrediction> preds{prediction({0.8, 0.2}), prediction({0.4, 0.6})};
  const std::vector<int> labels{0, 0};
  const auto report = evaluate(preds, labels, 15);
  CHECK(report.accuracy == 0.5);
  std::size_t total = 0;
  for (const auto& b : report.bins) total += b.count;
  CHECK(total == 2);
  std::ostringstream out;
  write_predictions_csv(out, preds, labels, report);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "index,predicted_class,label,confidence,mean_std\r");
  CHECK(out.str().find("summary,accuracy,0.5,ece,") != std::string::npos);
}
