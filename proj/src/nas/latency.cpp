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

#include "pvkit/nas/latency.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "pvkit/autodiff/optimizer.hpp"
#include "pvkit/common/errors.hpp"
#include "pvkit/common/timing.hpp"

namespace pvkit::nas {

using ad::Tensor;

namespace {

double parse_number(std::string_view field, std::size_t line) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(line, "not a number: '" + std::string(field) + "'");
  }
  if (!std::isfinite(v)) throw ParseError(line, "non-finite value");
  return v;
}

}  // namespace

std::vector<LatencySample> read_latency_pairs(std::istream& in) {
  std::vector<LatencySample> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::vector<double> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(parse_number(rest.substr(0, comma), number));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() < 2) throw ParseError(number, "expected a latency followed by an architecture vector");
    if (!(fields[0] > 0.0)) throw ParseError(number, "latency must be positive");
    LatencySample s{std::vector<double>(fields.begin() + 1, fields.end()), fields[0]};
    if (!out.empty() && s.vector.size() != out.front().vector.size()) {
      throw ParseError(number, "vector has " + std::to_string(s.vector.size()) + " entries, earlier lines have " +
                                   std::to_string(out.front().vector.size()));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<LatencySample> load_latency_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorKind::kOpen, "cannot open latency pairs " + path);
  try {
    return read_latency_pairs(in);
  } catch (const ParseError& e) {
    throw ParseError(path, e.line(), e.reason());
  }
}

void write_latency_pairs(std::ostream& out, std::span<const LatencySample> samples) {
  out << "# latency_ms,arch_vector...\n";
  out.precision(17);
  for (const auto& s : samples) {
    out << s.latency_ms;
    for (double v : s.vector) out << ',' << v;
    out << '\n';
  }
}

void save_latency_pairs(const std::string& path, std::span<const LatencySample> samples) {
  std::ofstream out(path);
  if (!out) throw IoError(IoErrorKind::kOpen, "cannot write latency pairs " + path);
  write_latency_pairs(out, samples);
}

double measure_latency_ms(SuperNet& net, const ArchSpec& arch, const cloud::PointCloud& pc,
                          const SceneGeometry& geometry, const MeasureConfig& config) {
  if (config.repetitions < 1 || config.warmup < 0) throw ConfigError("latency measurement needs repetitions >= 1");
  for (int i = 0; i < config.warmup; ++i) net.forward(arch, pc, geometry, ad::Mode::kEval);
  std::vector<double> ms;
  for (int i = 0; i < config.repetitions; ++i) {
    const auto t0 = now_ns();
    net.forward(arch, pc, geometry, ad::Mode::kEval);
    ms.push_back(static_cast<double>(now_ns() - t0) * 1e-6);
  }
  return *std::min_element(ms.begin(), ms.end());
}

std::vector<LatencySample> latency_campaign(SuperNet& net, const cloud::PointCloud& pc, std::size_t count,
                                            std::uint64_t seed, const MeasureConfig& config) {
  if (config.rounds < 1) throw ConfigError("latency campaign needs rounds >= 1");
  pin_allocator_for_timing();
  const auto geometry = scene_geometry(net.config(), pc);
  Rng rng(seed);
  std::vector<ArchSpec> archs;
  for (std::size_t i = 0; i < count; ++i) archs.push_back(sample_uniform(net.space(), full_depth_floors(net.space()), rng));

  std::vector<std::vector<double>> ms(count);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle(derive_seed(seed, 1));
  for (int r = 0; r < config.rounds; ++r) {
    for (std::size_t i = count; i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(shuffle, 0, static_cast<std::int64_t>(i) - 1))]);
    }
    for (auto i : order) ms[i].push_back(measure_latency_ms(net, archs[i], pc, geometry, config));
  }
  std::vector<LatencySample> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back({encode(net.space(), archs[i]), *std::min_element(ms[i].begin(), ms[i].end())});
  }
  return out;
}

Tensor<double> LatencyPredictor::standardize(std::span<const LatencySample> samples) const {
  const std::size_t d = mean_.size();
  std::vector<double> x(samples.size() * d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].vector.size() != d) {
      throw DimensionError("latency predictor expects vectors of length " + std::to_string(d) + ", got " +
                           std::to_string(samples[i].vector.size()));
    }
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = (samples[i].vector[j] - mean_[j]) / scale_[j];
  }
  return Tensor<double>({samples.size(), d}, std::move(x));
}

Tensor<double> LatencyPredictor::forward(const Tensor<double>& x) const {
  Tensor<double> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) h = ad::leaky_relu(h, slope_);
  }
  return ad::scale(ad::exp(h), base_ms_);
}

LatencyPredictor LatencyPredictor::fit(std::span<const LatencySample> samples, const PredictorConfig& config,
                                       PredictorReport* report) {
  if (samples.size() < 2) throw ConfigError("latency predictor needs at least two samples");
  if (config.epochs < 0) throw ConfigError("predictor epochs must be non-negative");
  if (!(config.holdout_fraction >= 0.0 && config.holdout_fraction < 1.0)) {
    throw ConfigError("holdout fraction must lie in [0, 1)");
  }
  const std::size_t d = samples.front().vector.size();
  for (const auto& s : samples) {
    if (s.vector.size() != d) throw DimensionError("latency samples have inconsistent vector lengths");
    if (!(s.latency_ms > 0.0)) throw ConfigError("latencies must be positive");
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1)]);
  }
  const auto holdout = static_cast<std::size_t>(std::floor(config.holdout_fraction * samples.size()));
  std::vector<LatencySample> train, test;
  for (std::size_t i = 0; i < order.size(); ++i) (i < order.size() - holdout ? train : test).push_back(samples[order[i]]);

  PredictorReport local;
  PredictorReport& rep = report ? *report : local;
  rep = PredictorReport{};
  rep.train_size = train.size();
  rep.holdout_size = test.size();

  LatencyPredictor p;
  p.mean_.assign(d, 0.0);
  p.scale_.assign(d, 0.0);
  double log_sum = 0.0, lo = train.front().latency_ms, hi = lo;
  for (const auto& s : train) {
    for (std::size_t j = 0; j < d; ++j) p.mean_[j] += s.vector[j];
    log_sum += std::log(s.latency_ms);
    lo = std::min(lo, s.latency_ms);
    hi = std::max(hi, s.latency_ms);
  }
  for (auto& m : p.mean_) m /= static_cast<double>(train.size());
  for (const auto& s : train)
    for (std::size_t j = 0; j < d; ++j) p.scale_[j] += (s.vector[j] - p.mean_[j]) * (s.vector[j] - p.mean_[j]);
  for (auto& v : p.scale_) {
    v = std::sqrt(v / static_cast<double>(train.size()));
    if (v < 1e-12) v = 1.0;
  }
  p.base_ms_ = std::exp(log_sum / static_cast<double>(train.size()));
  if (hi - lo <= 1e-12 * hi) {
    rep.warnings.push_back("all training latencies are equal; the predictor will return a constant");
  }

  std::size_t prev = d;
  for (auto w : config.hidden) {
    p.layers_.emplace_back(prev, w, true, rng);
    prev = w;
  }
  p.layers_.emplace_back(prev, 1, true, rng);
  // Start from the geometric-mean prediction.
  auto out_w = p.layers_.back().weight().mutable_data();
  std::fill(out_w.begin(), out_w.end(), 0.0);

  std::vector<ad::NamedParameter<double>> params;
  for (std::size_t i = 0; i < p.layers_.size(); ++i) p.layers_[i].collect("layer" + std::to_string(i), params);
  ad::OptimizerConfig oc;
  oc.lr = config.lr;
  ad::Optimizer<double> opt(oc);
  const auto x = p.standardize(train);
  std::vector<double> targets;
  for (const auto& s : train) targets.push_back(s.latency_ms);
  for (int e = 0; e < config.epochs; ++e) {
    // Cosine decay keeps the last epochs from oscillating around the L1 minimum.
    opt.set_lr(config.lr * 0.5 * (1.0 + std::cos(M_PI * e / std::max(1, config.epochs))));
    const auto loss = ad::mean_abs_relative_error(p.forward(x), std::span<const double>(targets));
    if (!std::isfinite(loss.item())) throw TrainingError("latency predictor loss diverged at epoch " + std::to_string(e));
    ad::backward(loss);
    opt.step(params);
  }
  rep.train_mre = p.mean_relative_error(train);
  rep.holdout_mre = test.empty() ? std::numeric_limits<double>::quiet_NaN() : p.mean_relative_error(test);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  return p;
}

double LatencyPredictor::predict(std::span<const double> vector) const {
  LatencySample s{std::vector<double>(vector.begin(), vector.end()), 1.0};
  return forward(standardize(std::span<const LatencySample>(&s, 1))).item();
}

double LatencyPredictor::mean_relative_error(std::span<const LatencySample> samples) const {
  if (samples.empty()) return 0.0;
  const auto pred = forward(standardize(samples));
  double err = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    err += std::abs(pred.at(i) - samples[i].latency_ms) / samples[i].latency_ms;
  }
  return err / static_cast<double>(samples.size());
}

nlohmann::json LatencyPredictor::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    layers.push_back({{"in", l.in_features()},
                      {"out", l.out_features()},
                      {"weight", std::vector<double>(l.weight().data().begin(), l.weight().data().end())},
                      {"bias", std::vector<double>(l.bias().data().begin(), l.bias().data().end())}});
  }
  return {{"format", "pvkit-latency-predictor"}, {"version", 1},     {"mean", mean_},
          {"scale", scale_},                     {"base_ms", base_ms_}, {"slope", slope_},
          {"layers", layers}};
}

LatencyPredictor LatencyPredictor::from_json(const nlohmann::json& j) {
  LatencyPredictor p;
  try {
    if (j.at("format") != "pvkit-latency-predictor") throw ConfigError("not a latency predictor file");
    if (j.at("version").get<int>() != 1) throw ConfigError("unsupported latency predictor version");
    p.mean_ = j.at("mean").get<std::vector<double>>();
    p.scale_ = j.at("scale").get<std::vector<double>>();
    p.base_ms_ = j.at("base_ms").get<double>();
    p.slope_ = j.at("slope").get<double>();
    Rng unused(0);
    std::size_t prev = p.mean_.size();
    for (const auto& l : j.at("layers")) {
      const auto in = l.at("in").get<std::size_t>(), out = l.at("out").get<std::size_t>();
      if (in != prev) throw ConfigError("latency predictor layers do not chain");
      ad::Linear<double> lin(in, out, true, unused);
      const auto w = l.at("weight").get<std::vector<double>>();
      const auto b = l.at("bias").get<std::vector<double>>();
      if (w.size() != in * out || b.size() != out) throw ConfigError("latency predictor layer size mismatch");
      std::copy(w.begin(), w.end(), lin.weight().mutable_data().begin());
      auto bias = lin.bias();
      std::copy(b.begin(), b.end(), bias.mutable_data().begin());
      p.layers_.push_back(lin);
      prev = out;
    }
    if (p.scale_.size() != p.mean_.size() || p.layers_.empty() || prev != 1) {
      throw ConfigError("latency predictor file is inconsistent");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("latency predictor: ") + e.what());
  }
  return p;
}

void LatencyPredictor::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError(IoErrorKind::kOpen, "cannot write predictor " + path);
  out << to_json().dump(1) << '\n';
}

LatencyPredictor LatencyPredictor::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorKind::kOpen, "cannot open predictor " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoErrorKind::kFormat, path + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace pvkit::nas
