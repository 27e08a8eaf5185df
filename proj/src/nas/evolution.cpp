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

#include "pvkit/nas/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "pvkit/common/errors.hpp"

namespace pvkit::nas {

std::string resource_name(ResourceKind kind) { return kind == ResourceKind::kMacs ? "macs" : "latency_ms"; }

void EvolutionConfig::validate(const SearchSpace& space) const {
  if (population < 2) throw ConfigError("population must be at least 2");
  if (parents < 1 || parents > population) throw ConfigError("parents must lie in [1, population]");
  if (generations < 1) throw ConfigError("generations must be at least 1");
  if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) throw ConfigError("mutation probability must lie in [0, 1]");
  if (resample_budget < 1) throw ConfigError("resample budget must be at least 1");
  if (!depth_floors.empty() && depth_floors.size() != space.num_stages()) {
    throw ConfigError("one depth floor per stage is required");
  }
}

namespace {

std::size_t draw_channel(const StageSpec& st, Rng& rng) {
  return st.channels[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(st.channels.size()) - 1))];
}

}  // namespace

ArchSpec mutate(const SearchSpace& space, const ArchSpec& parent, double p, const std::vector<int>& floors,
                Rng& rng) {
  validate(space, parent);
  ArchSpec child;
  for (std::size_t s = 0; s < space.num_stages(); ++s) {
    const auto& st = space.stages()[s];
    const int lo = floors.empty() ? 1 : floors[s];
    int d = parent.depths[s];
    if (uniform01(rng) < p) d = static_cast<int>(uniform_int(rng, lo, st.max_depth));
    child.depths.push_back(d);
    child.channels.emplace_back();
    for (int l = 0; l < st.max_depth; ++l) {
      const bool inherited = l < parent.depths[s];
      std::size_t c = inherited ? parent.channels[s][static_cast<std::size_t>(l)] : 0;
      if (!inherited || uniform01(rng) < p) c = draw_channel(st, rng);
      if (l < d) child.channels[s].push_back(c);
    }
  }
  return child;
}

ArchSpec crossover(const SearchSpace& space, const ArchSpec& a, const ArchSpec& b, Rng& rng) {
  validate(space, a);
  validate(space, b);
  ArchSpec child;
  for (std::size_t s = 0; s < space.num_stages(); ++s) {
    const auto& st = space.stages()[s];
    const int d = uniform01(rng) < 0.5 ? a.depths[s] : b.depths[s];
    child.depths.push_back(d);
    child.channels.emplace_back();
    for (int l = 0; l < d; ++l) {
      const auto li = static_cast<std::size_t>(l);
      const bool in_a = l < a.depths[s], in_b = l < b.depths[s];
      const bool pick_a = uniform01(rng) < 0.5;
      if (in_a && (pick_a || !in_b)) {
        child.channels[s].push_back(a.channels[s][li]);
      } else if (in_b) {
        child.channels[s].push_back(b.channels[s][li]);
      } else {
        child.channels[s].push_back(draw_channel(st, rng));
      }
    }
  }
  return child;
}

SearchResult evolutionary_search(const SearchSpace& space, const FitnessFn& fitness,
                                 const std::optional<ResourceConstraint>& constraint, const EvolutionConfig& config,
                                 const std::function<void(const GenerationRecord&)>& on_generation) {
  config.validate(space);
  if (!fitness) throw ConfigError("search needs a fitness function");
  if (constraint && !constraint->usage) throw ConfigError("resource constraint needs a usage function");
  const auto floors = config.depth_floors.empty() ? full_depth_floors(space) : config.depth_floors;
  Rng rng(config.seed);

  struct Scored {
    ArchSpec arch;
    double fitness;
    double usage;
  };
  std::map<std::vector<double>, Scored> memo;
  SearchResult result;
  result.best_fitness = -std::numeric_limits<double>::infinity();

  auto usage_of = [&](const ArchSpec& a) { return constraint ? constraint->usage(a) : 0.0; };
  auto feasible = [&](double usage) { return !constraint || usage <= constraint->budget; };
  auto score = [&](const ArchSpec& a, double usage) -> const Scored& {
    auto key = encode(space, a);
    auto it = memo.find(key);
    if (it == memo.end()) {
      const double f = fitness(a);
      if (std::isnan(f)) throw TrainingError("fitness is NaN for candidate " + to_string(a));
      it = memo.emplace(std::move(key), Scored{a, f, usage}).first;
      if (f > result.best_fitness) {
        result.best_fitness = f;
        result.best = a;
        result.best_usage = usage;
      }
    }
    return it->second;
  };
  auto infeasible = [&](const std::string& stage, double lowest) {
    throw InfeasibleError("no candidate within the " + resource_name(constraint->kind) + " budget " +
                          std::to_string(constraint->budget) + " after " + std::to_string(config.resample_budget) +
                          " attempts (" + stage + "; lowest usage seen " + std::to_string(lowest) + ")");
  };

  std::vector<Scored> population;
  for (int i = 0; i < config.population; ++i) {
    double lowest = std::numeric_limits<double>::infinity();
    bool admitted = false;
    for (int attempt = 0; attempt < config.resample_budget && !admitted; ++attempt) {
      auto a = sample_uniform(space, floors, rng);
      const double u = usage_of(a);
      lowest = std::min(lowest, u);
      if (!feasible(u)) {
        ++result.rejected;
        continue;
      }
      population.push_back(score(a, u));
      admitted = true;
    }
    if (!admitted) infeasible("initial population", lowest);
  }

  auto record = [&](int generation) {
    GenerationRecord r;
    r.generation = generation;
    r.best_fitness = result.best_fitness;
    r.best_vector = encode(space, result.best);
    r.best_usage = result.best_usage;
    r.evaluations = memo.size();
    result.history.push_back(r);
    if (on_generation) on_generation(r);
  };
  record(0);

  const auto k = static_cast<std::size_t>(config.parents);
  for (int g = 1; g < config.generations; ++g) {
    std::stable_sort(population.begin(), population.end(),
                     [](const Scored& a, const Scored& b) { return a.fitness > b.fitness; });
    std::vector<Scored> parents(population.begin(), population.begin() + static_cast<std::ptrdiff_t>(k));
    auto pick = [&]() -> const Scored& {
      return parents[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(k) - 1))];
    };
    std::vector<Scored> next;
    const int mutants = config.population / 2;
    for (int i = 0; i < config.population; ++i) {
      double lowest = std::numeric_limits<double>::infinity();
      bool admitted = false;
      for (int attempt = 0; attempt < config.resample_budget && !admitted; ++attempt) {
        ArchSpec child;
        if (i < mutants) {
          child = mutate(space, pick().arch, config.mutation_prob, floors, rng);
        } else {
          const auto& a = pick();
          const auto& b = pick();
          child = crossover(space, a.arch, b.arch, rng);
        }
        const double u = usage_of(child);
        lowest = std::min(lowest, u);
        if (!feasible(u)) {
          ++result.rejected;
          continue;
        }
        next.push_back(score(child, u));
        admitted = true;
      }
      if (!admitted) infeasible("generation " + std::to_string(g), lowest);
    }
    population = std::move(next);
    record(g);
  }
  result.evaluations = memo.size();
  return result;
}

}  // namespace pvkit::nas
