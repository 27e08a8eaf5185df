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

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "pvkit/common/counters.hpp"
#include "pvkit/common/errors.hpp"
#include "pvkit/nas/evolution.hpp"
#include "pvkit/nas/latency.hpp"
#include "pvkit/nas/search_space.hpp"
#include "pvkit/nas/supernet.hpp"
#include "pvkit/pointcloud/synthetic.hpp"

namespace pvkit::nas {
namespace {

SearchSpace toy_space() { return SearchSpace({{3, {4, 8, 12}, 1}, {3, {8, 12, 16}, 2}}); }

SupernetConfig small_config() {
  SupernetConfig c;
  c.space = SearchSpace({{2, {4, 8}, 1}, {2, {8, 12}, 2}});
  c.voxel_size = 1.0 / 8;
  return c;
}

std::vector<cloud::PointCloud> scenes(std::size_t n, std::uint64_t seed) {
  std::vector<cloud::PointCloud> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(cloud::normalize(cloud::generate_synthetic_scene(cloud::default_scene_config(), seed + i)));
  }
  return out;
}

std::vector<std::vector<float>> snapshot(const SuperNet& net) {
  std::vector<std::vector<float>> out;
  for (const auto& p : net.parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

ad::OptimizerConfig sgd(double lr) {
  ad::OptimizerConfig c;
  c.kind = ad::OptimizerKind::kSgd;
  c.lr = lr;
  return c;
}

TEST(SearchSpace, RejectsMalformedStages) {
  EXPECT_THROW(SearchSpace(std::vector<StageSpec>{}), ConfigError);
  EXPECT_THROW(SearchSpace({{0, {4}, 1}}), ConfigError);
  EXPECT_THROW(SearchSpace({{1, {}, 1}}), ConfigError);
  EXPECT_THROW(SearchSpace({{1, {8, 4}, 1}}), ConfigError);
  EXPECT_THROW(SearchSpace({{1, {4, 4}, 1}}), ConfigError);
  EXPECT_THROW(SearchSpace({{1, {4}, 3}}), ConfigError);
}

TEST(SearchSpace, DefaultChannelsSpanQuarterToFull) {
  EXPECT_EQ(SearchSpace::default_channels(16), (std::vector<std::size_t>{4, 8, 12, 16}));
  EXPECT_EQ(SearchSpace::default_channels(24), (std::vector<std::size_t>{8, 12, 16, 20, 24}));
}

TEST(SearchSpace, SizeMatchesEnumeration) {
  const auto space = toy_space();
  const auto all = enumerate(space);
  EXPECT_EQ(static_cast<double>(all.size()), space.size());
  EXPECT_EQ(all.size(), 39u * 39u);
  std::set<std::vector<double>> unique;
  for (const auto& a : all) unique.insert(encode(space, a));
  EXPECT_EQ(unique.size(), all.size());
}

TEST(ArchVector, RoundTripsAndZeroesUnusedSlots) {
  const auto space = toy_space();
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto a = sample_uniform(space, full_depth_floors(space), rng);
    const auto v = encode(space, a);
    ASSERT_EQ(v.size(), space.vector_length());
    EXPECT_EQ(decode(space, v), a);
    EXPECT_EQ(encode(space, decode(space, v)), v);
    std::size_t pos = space.num_stages();
    for (std::size_t s = 0; s < space.num_stages(); ++s) {
      EXPECT_DOUBLE_EQ(v[s], static_cast<double>(a.depths[s]) / 3.0);
      for (int l = 0; l < 3; ++l, ++pos) {
        if (l >= a.depths[s]) {
          EXPECT_EQ(v[pos], 0.0);
        }
      }
    }
  }
}

TEST(ArchVector, DecodeRejectsInvalidVectors) {
  const auto space = toy_space();
  auto v = encode(space, maximal_arch(space));
  EXPECT_THROW(decode(space, std::vector<double>(v.begin(), v.end() - 1)), ContractError);
  auto bad_depth = v;
  bad_depth[0] = 0.5;
  EXPECT_THROW(decode(space, bad_depth), ContractError);
  auto bad_channel = v;
  bad_channel[2] = 0.5;  // 6 channels is not a choice
  EXPECT_THROW(decode(space, bad_channel), ContractError);
  ArchSpec shallow{{1, 1}, {{4}, {8}}};
  auto unused = encode(space, shallow);
  unused[3] = 1.0;
  EXPECT_THROW(decode(space, unused), ContractError);
}

TEST(ArchSpec, ValidateNamesOffendingGene) {
  const auto space = toy_space();
  try {
    validate(space, ArchSpec{{1, 1}, {{5}, {8}}});
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("channel count 5"), std::string::npos);
  }
  EXPECT_THROW(validate(space, ArchSpec{{4, 1}, {{4, 4, 4, 4}, {8}}}), ContractError);
  EXPECT_THROW(validate(space, ArchSpec{{2, 1}, {{4}, {8}}}), ContractError);
  EXPECT_THROW(validate(space, ArchSpec{{1}, {{4}}}), ContractError);
}

TEST(Sampling, IsDeterministicAndRespectsFloors) {
  const auto space = toy_space();
  EXPECT_EQ(sample_uniform(space, {1, 1}, 42), sample_uniform(space, {1, 1}, 42));
  Rng rng(1);
  std::vector<int> depth_counts(4, 0);
  for (int i = 0; i < 3000; ++i) {
    const auto a = sample_uniform(space, {2, 3}, rng);
    EXPECT_GE(a.depths[0], 2);
    EXPECT_EQ(a.depths[1], 3);
    ++depth_counts[static_cast<std::size_t>(a.depths[0])];
  }
  EXPECT_EQ(depth_counts[1], 0);
  EXPECT_NEAR(depth_counts[2], 1500, 150);
  EXPECT_NEAR(depth_counts[3], 1500, 150);
  EXPECT_THROW(sample_uniform(space, {0, 1}, 1), ContractError);
  EXPECT_THROW(sample_uniform(space, {1}, 1), ContractError);
}

TEST(DepthShrink, SplitsEpochsIntoShrinkingFloors) {
  EXPECT_EQ(depth_shrink_schedule(3, 7), (std::vector<int>{3, 3, 3, 2, 2, 1, 1}));
  EXPECT_EQ(depth_shrink_schedule(2, 4), (std::vector<int>{2, 2, 1, 1}));
  EXPECT_EQ(depth_shrink_schedule(1, 3), (std::vector<int>{1, 1, 1}));
  EXPECT_THROW(depth_shrink_schedule(3, 2), ContractError);
  const auto space = toy_space();
  EXPECT_EQ(depth_floors_for_epoch(space, 0, 3, true), (std::vector<int>{3, 3}));
  EXPECT_EQ(depth_floors_for_epoch(space, 2, 3, true), (std::vector<int>{1, 1}));
  EXPECT_EQ(depth_floors_for_epoch(space, 0, 3, false), (std::vector<int>{1, 1}));
}

TEST(SuperNet, CandidateForwardShapes) {
  SuperNet net(small_config(), 1);
  const auto pcs = scenes(1, 10);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto arch = sample_uniform(net.space(), full_depth_floors(net.space()), seed);
    const auto logits = net.forward(arch, pcs[0], ad::Mode::kEval);
    EXPECT_EQ(logits.shape(), (ad::Shape{pcs[0].size(), 4}));
    for (float v : logits.data()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(SuperNet, CandidateUpdatesOnlyItsSlice) {
  SuperNet net(small_config(), 2);
  const auto pcs = scenes(1, 20);
  const ArchSpec arch{{1, 1}, {{4}, {8}}};
  const auto before = snapshot(net);
  ad::Optimizer<float> opt(sgd(0.1));
  supernet_train_step(net, opt, std::vector<ArchSpec>{arch}, pcs);
  const auto after = snapshot(net);
  const auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params[i].name;
    const auto& shape = params[i].tensor.shape();
    for (std::size_t j = 0; j < before[i].size(); ++j) {
      bool inside = true;
      if (name == "stage0.layer0.weight") {
        inside = (j / shape[2]) % shape[1] < 3 && j % shape[2] < 4;
      } else if (name == "stage1.layer0.weight") {
        inside = (j / shape[2]) % shape[1] < 4 && j % shape[2] < 8;
      } else if (name.rfind("stage0.layer0.bn", 0) == 0) {
        inside = j < 4;
      } else if (name.rfind("stage1.layer0.bn", 0) == 0 || name.rfind("point.bn", 0) == 0) {
        inside = j < 8;
      } else if (name == "point.weight") {
        inside = j % shape[1] < 8;
      } else if (name == "head.weight") {
        inside = j / shape[1] < 8;
      } else if (name.find("layer1") != std::string::npos) {
        inside = false;
      }
      if (!inside) {
        EXPECT_EQ(before[i][j], after[i][j]) << name << "[" << j << "]";
      }
    }
  }
  EXPECT_NE(before[0], after[0]);
}

TEST(SuperNet, DuplicatedCandidateMatchesSingle) {
  const auto pcs = scenes(1, 30);
  const ArchSpec arch{{2, 1}, {{8, 4}, {12}}};
  SuperNet a(small_config(), 5), b(small_config(), 5);
  ad::Optimizer<float> oa(sgd(0.05)), ob(sgd(0.05));
  supernet_train_step(a, oa, std::vector<ArchSpec>{arch}, pcs);
  supernet_train_step(b, ob, std::vector<ArchSpec>{arch, arch}, pcs);
  const auto sa = snapshot(a), sb = snapshot(b);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    for (std::size_t j = 0; j < sa[i].size(); ++j) EXPECT_NEAR(sa[i][j], sb[i][j], 1e-6);
  }
}

TEST(SuperNet, TrainingIsDeterministic) {
  const auto pcs = scenes(2, 40);
  SupernetTrainConfig config;
  config.epochs = 2;
  config.candidates = 2;
  config.seed = 9;
  SuperNet a(small_config(), 7), b(small_config(), 7);
  ad::Optimizer<float> oa(config.optimizer), ob(config.optimizer);
  const auto ma = train_supernet(a, oa, pcs, config);
  const auto mb = train_supernet(b, ob, pcs, config);
  EXPECT_EQ(snapshot(a), snapshot(b));
  ASSERT_EQ(ma.size(), 2u);
  EXPECT_EQ(ma[0].loss, mb[0].loss);
  EXPECT_EQ(ma[0].depth_floor, 2);
  EXPECT_EQ(ma[1].depth_floor, 1);
}

TEST(SuperNet, NonFiniteLossNamesCandidate) {
  SuperNet net(small_config(), 3);
  const auto pcs = scenes(1, 50);
  auto w = net.slot_weight(0, 0).mutable_data();
  std::fill(w.begin(), w.end(), std::nanf(""));
  ad::Optimizer<float> opt(sgd(0.1));
  const ArchSpec arch{{1, 1}, {{4}, {8}}};
  try {
    supernet_train_step(net, opt, std::vector<ArchSpec>{arch}, pcs);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find(to_string(arch)), std::string::npos);
  }
}

TEST(SuperNet, CalibrationAveragesBatchStatistics) {
  SuperNet net(small_config(), 4);
  const auto pcs = scenes(2, 60);
  const auto arch = maximal_arch(net.space());
  auto running = [&]() {
    std::vector<std::vector<float>> out;
    for (auto& b : net.buffers()) out.push_back(*b.values);
    return out;
  };
  net.calibrate_bn(arch, std::span(pcs).first(1));
  const auto ra = running();
  net.calibrate_bn(arch, std::span(pcs).last(1));
  const auto rb = running();
  net.calibrate_bn(arch, pcs);
  const auto both = running();
  for (std::size_t i = 0; i < both.size(); ++i) {
    for (std::size_t j = 0; j < both[i].size(); ++j) {
      EXPECT_NEAR(both[i][j], 0.5f * (ra[i][j] + rb[i][j]), 1e-4f * (1.0f + std::abs(both[i][j])));
    }
  }
}

TEST(MacsEstimator, MatchesInstrumentedCounts) {
  const auto config = small_config();
  SuperNet net(config, 6);
  const auto pcs = scenes(20, 70);
  MacsEstimator estimator(config, pcs);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto arch = sample_uniform(net.space(), full_depth_floors(net.space()), seed);
    double measured = 0.0;
    for (const auto& pc : pcs) {
      ScopedMacCount count;
      net.forward(arch, pc, ad::Mode::kEval);
      measured += static_cast<double>(count.elapsed());
    }
    measured /= static_cast<double>(pcs.size());
    EXPECT_LT(std::abs(estimator.estimate(arch) - measured) / measured, 1e-6) << to_string(arch);
  }
}

TEST(MacsEstimator, MonotoneInEveryGene) {
  const auto config = small_config();
  MacsEstimator estimator(config, scenes(3, 80));
  const ArchSpec base{{1, 1}, {{4}, {8}}};
  const double m = estimator.estimate(base);
  EXPECT_GT(estimator.estimate(ArchSpec{{1, 1}, {{8}, {8}}}), m);
  EXPECT_GT(estimator.estimate(ArchSpec{{1, 1}, {{4}, {12}}}), m);
  EXPECT_GT(estimator.estimate(ArchSpec{{2, 1}, {{4, 4}, {8}}}), m);
  EXPECT_GT(estimator.estimate(ArchSpec{{1, 2}, {{4}, {8, 8}}}), m);
}

TEST(LatencyPairs, ParsesAndReportsLineNumbers) {
  std::istringstream good("# header\n1.5,0.5,1\n\n2.25, 1 ,0.5\n");
  const auto s = read_latency_pairs(good);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s[1].latency_ms, 2.25);
  EXPECT_EQ(s[1].vector, (std::vector<double>{1.0, 0.5}));

  auto line_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_latency_pairs(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  EXPECT_EQ(line_of("1,0.5\n2,0.25\n3,abc\n"), 3u);
  EXPECT_EQ(line_of("1,0.5\n\n2,0.25,1\n"), 3u);
  EXPECT_EQ(line_of("-1,0.5\n"), 1u);
  EXPECT_EQ(line_of("1\n"), 1u);

  std::stringstream round;
  write_latency_pairs(round, s);
  const auto back = read_latency_pairs(round);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].vector, s[0].vector);
  EXPECT_EQ(back[1].latency_ms, s[1].latency_ms);
}

TEST(LatencyPredictor, FitsLinearOracle) {
  const auto space = toy_space();
  Rng rng(11);
  std::vector<LatencySample> samples;
  for (int i = 0; i < 300; ++i) {
    const auto v = encode(space, sample_uniform(space, full_depth_floors(space), rng));
    double t = 2.0;
    for (std::size_t j = 0; j < v.size(); ++j) t += (0.5 + 0.25 * static_cast<double>(j)) * v[j];
    samples.push_back({v, t});
  }
  PredictorReport report;
  const auto p = LatencyPredictor::fit(samples, PredictorConfig{}, &report);
  EXPECT_EQ(report.holdout_size, 60u);
  EXPECT_LT(report.holdout_mre, 0.01);
  EXPECT_TRUE(report.warnings.empty());

  const auto again = LatencyPredictor::from_json(p.to_json());
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(again.predict(samples[i].vector), p.predict(samples[i].vector));
}

TEST(LatencyPredictor, ConstantTargetsWarnAndStayConstant) {
  const auto space = toy_space();
  Rng rng(12);
  std::vector<LatencySample> samples;
  for (int i = 0; i < 50; ++i) samples.push_back({encode(space, sample_uniform(space, {1, 1}, rng)), 4.0});
  PredictorConfig config;
  config.epochs = 200;
  PredictorReport report;
  const auto p = LatencyPredictor::fit(samples, config, &report);
  EXPECT_FALSE(report.warnings.empty());
  for (const auto& s : samples) EXPECT_NEAR(p.predict(s.vector), 4.0, 0.04);
}

TEST(LatencyPredictor, RejectsBadInput) {
  EXPECT_THROW(LatencyPredictor::fit(std::vector<LatencySample>{{{1.0}, 1.0}}, {}), ConfigError);
  EXPECT_THROW(LatencyPredictor::fit(std::vector<LatencySample>{{{1.0}, 1.0}, {{1.0, 2.0}, 1.0}}, {}),
               DimensionError);
  EXPECT_THROW(LatencyPredictor::from_json(nlohmann::json{{"format", "other"}}), ConfigError);
}

TEST(Evolution, MutationAndCrossoverKeepValidity) {
  const auto space = toy_space();
  Rng rng(5);
  const auto a = sample_uniform(space, {1, 1}, rng), b = sample_uniform(space, {1, 1}, rng);
  EXPECT_EQ(mutate(space, a, 0.0, {}, rng), a);
  EXPECT_EQ(crossover(space, a, a, rng), a);
  for (int i = 0; i < 200; ++i) {
    EXPECT_TRUE(is_valid(space, mutate(space, a, 0.5, {}, rng)));
    EXPECT_TRUE(is_valid(space, crossover(space, a, b, rng)));
  }
}

TEST(Evolution, SingleArchitectureSpace) {
  const SearchSpace space({{1, {8}, 1}});
  int calls = 0;
  EvolutionConfig config;
  config.generations = 1;
  const auto r = evolutionary_search(
      space, [&](const ArchSpec&) { return ++calls, 0.5; }, std::nullopt, config);
  EXPECT_EQ(r.best, maximal_arch(space));
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_EQ(calls, 1);
}

TEST(Evolution, FindsSyntheticOptimum) {
  const auto space = toy_space();
  const auto all = enumerate(space);
  int found = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(1000, seed));
    const auto target = encode(space, all[static_cast<std::size_t>(uniform_int(rng, 0, all.size() - 1))]);
    auto fitness = [&](const ArchSpec& a) {
      const auto v = encode(space, a);
      double d = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) d += (v[i] - target[i]) * (v[i] - target[i]);
      return -d;
    };
    EvolutionConfig config;
    config.seed = seed;
    const auto r = evolutionary_search(space, fitness, std::nullopt, config);
    found += encode(space, r.best) == target ? 1 : 0;
  }
  EXPECT_GE(found, 19);
}

TEST(Evolution, NeverAdmitsOverBudgetCandidates) {
  const auto space = toy_space();
  auto usage = [&](const ArchSpec& a) {
    double u = 0.0;
    for (const auto& st : a.channels)
      for (auto c : st) u += static_cast<double>(c);
    return u;
  };
  ResourceConstraint constraint{ResourceKind::kMacs, 40.0, usage};
  double worst = 0.0;
  EvolutionConfig config;
  config.seed = 3;
  const auto r = evolutionary_search(
      space,
      [&](const ArchSpec& a) {
        worst = std::max(worst, usage(a));
        return usage(a);
      },
      constraint, config);
  EXPECT_LE(worst, 40.0);
  EXPECT_LE(r.best_usage, 40.0);
  EXPECT_EQ(r.history.size(), 20u);
  for (std::size_t g = 1; g < r.history.size(); ++g) {
    EXPECT_GE(r.history[g].best_fitness, r.history[g - 1].best_fitness);
  }

  const auto again = evolutionary_search(space, [&](const ArchSpec& a) { return usage(a); }, constraint, config);
  EXPECT_EQ(again.best, r.best);

  constraint.budget = 1.0;
  EXPECT_THROW(evolutionary_search(space, [&](const ArchSpec& a) { return usage(a); }, constraint, config),
               InfeasibleError);
}

}  // namespace
}  // namespace pvkit::nas
