// Copyright 2026 The pvkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pvkit/autodiff/layers.hpp"
#include "pvkit/nas/supernet.hpp"

namespace pvkit::nas {

struct LatencySample {
  std::vector<double> vector;  // encoded architecture
  double latency_ms = 0.0;
};

// Text format, one pair per line: "<latency_ms>,<v0>,<v1>,...". Blank lines
// and lines starting with '#' are skipped. Malformed lines raise ParseError
// with the 1-based line number.
std::vector<LatencySample> read_latency_pairs(std::istream& in);
std::vector<LatencySample> load_latency_pairs(const std::string& path);
void write_latency_pairs(std::ostream& out, std::span<const LatencySample> samples);
void save_latency_pairs(const std::string& path, std::span<const LatencySample> samples);

struct MeasureConfig {
  int warmup = 1;
  int repetitions = 5;
  int rounds = 5;  // campaign passes over all candidates, in shuffled order
};

// Fastest eval-mode forward time of one candidate on one scene (warmup and
// repetitions only; rounds are a campaign setting). Interference from other
// load only ever adds time, so the minimum is the least noisy estimate.
double measure_latency_ms(SuperNet& net, const ArchSpec& arch, const cloud::PointCloud& pc,
                          const SceneGeometry& geometry, const MeasureConfig& config = {});

// `count` uniformly sampled candidates timed on `pc`. Each round measures
// every candidate once in a fresh random order and the reported latency is
// the minimum over rounds, so a slow spell of the machine cannot bias
// whichever candidates happened to run during it.
std::vector<LatencySample> latency_campaign(SuperNet& net, const cloud::PointCloud& pc, std::size_t count,
                                            std::uint64_t seed, const MeasureConfig& config = {});

struct PredictorConfig {
  std::vector<std::size_t> hidden = {16, 16};
  int epochs = 3000;
  double lr = 3e-2;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct PredictorReport {
  std::size_t train_size = 0;
  std::size_t holdout_size = 0;
  double train_mre = 0.0;
  double holdout_mre = 0.0;  // NaN when the holdout split is empty
  std::vector<std::string> warnings;
};

// MLP regressor from the architecture vector to latency. Inputs are
// standardized, the network predicts a log-ratio against the geometric mean
// latency, and training minimizes mean relative error with Adam.
class LatencyPredictor {
 public:
  static LatencyPredictor fit(std::span<const LatencySample> samples, const PredictorConfig& config,
                              PredictorReport* report = nullptr);

  double predict(std::span<const double> vector) const;
  double mean_relative_error(std::span<const LatencySample> samples) const;
  std::size_t input_length() const { return mean_.size(); }

  nlohmann::json to_json() const;
  static LatencyPredictor from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static LatencyPredictor load(const std::string& path);

 private:
  ad::Tensor<double> forward(const ad::Tensor<double>& x) const;
  ad::Tensor<double> standardize(std::span<const LatencySample> samples) const;

  std::vector<double> mean_;
  std::vector<double> scale_;
  double base_ms_ = 1.0;
  double slope_ = 0.1;
  std::vector<ad::Linear<double>> layers_;
};

}  // namespace pvkit::nas
