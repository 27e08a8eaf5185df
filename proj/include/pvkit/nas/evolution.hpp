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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pvkit/nas/search_space.hpp"

namespace pvkit::nas {

enum class ResourceKind { kMacs, kLatency };
std::string resource_name(ResourceKind kind);

// Candidates with usage(arch) > budget are never admitted to a population.
struct ResourceConstraint {
  ResourceKind kind = ResourceKind::kMacs;
  double budget = 0.0;
  std::function<double(const ArchSpec&)> usage;
};

struct EvolutionConfig {
  int population = 32;
  int parents = 8;
  int generations = 20;        // including the initial random population
  double mutation_prob = 0.1;  // per gene
  int resample_budget = 1000;  // attempts per admitted candidate
  std::uint64_t seed = 0;
  std::vector<int> depth_floors;  // empty means 1 for every stage

  void validate(const SearchSpace& space) const;
};

struct GenerationRecord {
  int generation = 0;
  double best_fitness = 0.0;
  std::vector<double> best_vector;
  double best_usage = 0.0;  // 0 without a constraint
  std::size_t evaluations = 0;  // distinct candidates scored so far
};

struct SearchResult {
  ArchSpec best;
  double best_fitness = 0.0;
  double best_usage = 0.0;
  std::vector<GenerationRecord> history;
  std::size_t evaluations = 0;
  std::size_t rejected = 0;  // offspring discarded for violating the budget
};

using FitnessFn = std::function<double(const ArchSpec&)>;

// Each gene (stage depth, per-slot channel count) is redrawn uniformly with
// probability p; slots activated by a deeper depth are drawn fresh.
ArchSpec mutate(const SearchSpace& space, const ArchSpec& parent, double p, const std::vector<int>& floors, Rng& rng);
// Each gene is taken from either parent with equal probability.
ArchSpec crossover(const SearchSpace& space, const ArchSpec& a, const ArchSpec& b, Rng& rng);

// Evolution with top-k selection: every generation after the first is
// population/2 mutants and population/2 crossovers of the previous top-k.
// Fitness is memoized per architecture; the best candidate ever seen is
// returned. Throws InfeasibleError when no feasible candidate is found
// within the resample budget.
SearchResult evolutionary_search(const SearchSpace& space, const FitnessFn& fitness,
                                 const std::optional<ResourceConstraint>& constraint, const EvolutionConfig& config,
                                 const std::function<void(const GenerationRecord&)>& on_generation = nullptr);

}  // namespace pvkit::nas
