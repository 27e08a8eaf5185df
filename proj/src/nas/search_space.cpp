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

#include "pvkit/nas/search_space.hpp"

#include <algorithm>
#include <cmath>

#include "pvkit/common/errors.hpp"

namespace pvkit::nas {

SearchSpace::SearchSpace(std::vector<StageSpec> stages) : stages_(std::move(stages)) {
  if (stages_.empty()) throw ConfigError("search space needs at least one stage");
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const auto& st = stages_[s];
    const std::string where = "stage " + std::to_string(s);
    if (st.max_depth < 1) throw ConfigError(where + ": max_depth must be at least 1");
    if (st.channels.empty()) throw ConfigError(where + ": channel choices are empty");
    if (!std::is_sorted(st.channels.begin(), st.channels.end()) ||
        std::adjacent_find(st.channels.begin(), st.channels.end()) != st.channels.end()) {
      throw ConfigError(where + ": channel choices must be sorted and unique");
    }
    if (st.channels.front() == 0) throw ConfigError(where + ": channel choices must be positive");
    if (st.stride != 1 && st.stride != 2) throw ConfigError(where + ": stride must be 1 or 2");
  }
}

std::size_t SearchSpace::total_slots() const {
  std::size_t n = 0;
  for (const auto& s : stages_) n += static_cast<std::size_t>(s.max_depth);
  return n;
}

double SearchSpace::size() const {
  double total = 1.0;
  for (const auto& s : stages_) {
    double stage = 0.0;
    for (int d = 1; d <= s.max_depth; ++d) stage += std::pow(static_cast<double>(s.channels.size()), d);
    total *= stage;
  }
  return total;
}

std::vector<std::size_t> SearchSpace::default_channels(std::size_t max_channels, std::size_t quantum) {
  std::vector<std::size_t> out;
  const double lo = 0.25 * static_cast<double>(max_channels);
  for (std::size_t c = quantum; c <= max_channels; c += quantum)
    if (static_cast<double>(c) >= lo) out.push_back(c);
  if (out.empty() || out.back() != max_channels) out.push_back(max_channels);
  return out;
}

std::size_t ArchSpec::total_depth() const {
  std::size_t n = 0;
  for (int d : depths) n += static_cast<std::size_t>(d);
  return n;
}

void validate(const SearchSpace& space, const ArchSpec& arch) {
  if (arch.depths.size() != space.num_stages() || arch.channels.size() != space.num_stages()) {
    throw ContractError("arch has " + std::to_string(arch.depths.size()) + " stages, space has " +
                        std::to_string(space.num_stages()));
  }
  for (std::size_t s = 0; s < space.num_stages(); ++s) {
    const auto& st = space.stages()[s];
    const int d = arch.depths[s];
    if (d < 1 || d > st.max_depth) {
      throw ContractError("stage " + std::to_string(s) + " depth " + std::to_string(d) + " outside [1, " +
                          std::to_string(st.max_depth) + "]");
    }
    if (arch.channels[s].size() != static_cast<std::size_t>(d)) {
      throw ContractError("stage " + std::to_string(s) + " lists " + std::to_string(arch.channels[s].size()) +
                          " channel counts for depth " + std::to_string(d));
    }
    for (std::size_t l = 0; l < arch.channels[s].size(); ++l) {
      const auto c = arch.channels[s][l];
      if (!std::binary_search(st.channels.begin(), st.channels.end(), c)) {
        throw ContractError("stage " + std::to_string(s) + " layer " + std::to_string(l) + ": channel count " +
                            std::to_string(c) + " is not a choice");
      }
    }
  }
}

bool is_valid(const SearchSpace& space, const ArchSpec& arch) {
  try {
    validate(space, arch);
    return true;
  } catch (const ContractError&) {
    return false;
  }
}

ArchSpec maximal_arch(const SearchSpace& space) {
  ArchSpec a;
  for (const auto& st : space.stages()) {
    a.depths.push_back(st.max_depth);
    a.channels.emplace_back(static_cast<std::size_t>(st.max_depth), st.channels.back());
  }
  return a;
}

std::vector<double> encode(const SearchSpace& space, const ArchSpec& arch) {
  validate(space, arch);
  std::vector<double> v;
  v.reserve(space.vector_length());
  for (std::size_t s = 0; s < space.num_stages(); ++s) {
    v.push_back(static_cast<double>(arch.depths[s]) / space.stages()[s].max_depth);
  }
  for (std::size_t s = 0; s < space.num_stages(); ++s) {
    const auto& st = space.stages()[s];
    const double mx = static_cast<double>(st.channels.back());
    for (int l = 0; l < st.max_depth; ++l) {
      v.push_back(l < arch.depths[s] ? static_cast<double>(arch.channels[s][l]) / mx : 0.0);
    }
  }
  return v;
}

ArchSpec decode(const SearchSpace& space, const std::vector<double>& v) {
  if (v.size() != space.vector_length()) {
    throw ContractError("arch vector has length " + std::to_string(v.size()) + ", expected " +
                        std::to_string(space.vector_length()));
  }
  ArchSpec a;
  std::size_t pos = space.num_stages();
  for (std::size_t s = 0; s < space.num_stages(); ++s) {
    const auto& st = space.stages()[s];
    const double d = v[s] * st.max_depth;
    const int depth = static_cast<int>(std::lround(d));
    if (std::abs(d - depth) > 1e-6) throw ContractError("arch vector depth gene is not a valid depth");
    a.depths.push_back(depth);
    a.channels.emplace_back();
    const double mx = static_cast<double>(st.channels.back());
    for (int l = 0; l < st.max_depth; ++l, ++pos) {
      if (l >= depth) {
        if (v[pos] != 0.0) throw ContractError("arch vector has a non-zero unused slot");
        continue;
      }
      const double c = v[pos] * mx;
      const auto ch = static_cast<std::size_t>(std::llround(c));
      if (std::abs(c - static_cast<double>(ch)) > 1e-6) throw ContractError("arch vector channel gene is not integral");
      a.channels[s].push_back(ch);
    }
  }
  validate(space, a);
  return a;
}

ArchSpec sample_uniform(const SearchSpace& space, const std::vector<int>& floors, Rng& rng) {
  if (floors.size() != space.num_stages()) throw ContractError("one depth floor per stage is required");
  ArchSpec a;
  for (std::size_t s = 0; s < space.num_stages(); ++s) {
    const auto& st = space.stages()[s];
    if (floors[s] < 1 || floors[s] > st.max_depth) {
      throw ContractError("depth floor " + std::to_string(floors[s]) + " outside [1, " +
                          std::to_string(st.max_depth) + "]");
    }
    const int d = static_cast<int>(uniform_int(rng, floors[s], st.max_depth));
    a.depths.push_back(d);
    a.channels.emplace_back();
    for (int l = 0; l < d; ++l) {
      a.channels[s].push_back(st.channels[uniform_int(rng, 0, static_cast<std::int64_t>(st.channels.size()) - 1)]);
    }
  }
  return a;
}

ArchSpec sample_uniform(const SearchSpace& space, const std::vector<int>& floors, std::uint64_t seed) {
  Rng rng(seed);
  return sample_uniform(space, floors, rng);
}

std::vector<int> full_depth_floors(const SearchSpace& space) { return std::vector<int>(space.num_stages(), 1); }

std::vector<int> depth_shrink_schedule(int m, int total_epochs) {
  if (m < 1) throw ContractError("max depth must be at least 1");
  if (total_epochs < m) {
    throw ContractError("depth shrinking needs at least " + std::to_string(m) + " epochs, got " +
                        std::to_string(total_epochs));
  }
  std::vector<int> floors;
  const int base = total_epochs / m, extra = total_epochs % m;
  for (int k = 1; k <= m; ++k) {
    const int len = base + (k <= extra ? 1 : 0);
    floors.insert(floors.end(), static_cast<std::size_t>(len), m - k + 1);
  }
  return floors;
}

std::vector<ArchSpec> enumerate(const SearchSpace& space, std::size_t limit) {
  if (space.size() > static_cast<double>(limit)) throw ContractError("search space too large to enumerate");
  // Per-stage options first, then their cartesian product.
  std::vector<std::vector<std::vector<std::size_t>>> stage_options(space.num_stages());
  for (std::size_t s = 0; s < space.num_stages(); ++s) {
    const auto& st = space.stages()[s];
    for (int d = 1; d <= st.max_depth; ++d) {
      std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
      for (;;) {
        std::vector<std::size_t> ch;
        for (auto i : idx) ch.push_back(st.channels[i]);
        stage_options[s].push_back(ch);
        std::size_t pos = 0;
        while (pos < idx.size() && ++idx[pos] == st.channels.size()) idx[pos++] = 0;
        if (pos == idx.size()) break;
      }
    }
  }
  std::vector<ArchSpec> out;
  std::vector<std::size_t> pick(space.num_stages(), 0);
  for (;;) {
    ArchSpec a;
    for (std::size_t s = 0; s < pick.size(); ++s) {
      a.channels.push_back(stage_options[s][pick[s]]);
      a.depths.push_back(static_cast<int>(a.channels.back().size()));
    }
    out.push_back(std::move(a));
    std::size_t pos = 0;
    while (pos < pick.size() && ++pick[pos] == stage_options[pos].size()) pick[pos++] = 0;
    if (pos == pick.size()) break;
  }
  return out;
}

SearchSpace search_space_from_json(const nlohmann::json& j) {
  std::vector<StageSpec> stages;
  try {
    for (const auto& s : j.at("stages")) {
      StageSpec st;
      st.max_depth = s.at("max_depth").get<int>();
      st.stride = s.value("stride", 1);
      if (s.contains("channels")) {
        st.channels = s.at("channels").get<std::vector<std::size_t>>();
      } else {
        st.channels = SearchSpace::default_channels(s.at("max_channels").get<std::size_t>(),
                                                    s.value("quantum", std::size_t{4}));
      }
      stages.push_back(std::move(st));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("search space: ") + e.what());
  }
  return SearchSpace(std::move(stages));
}

nlohmann::json to_json(const SearchSpace& space) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : space.stages()) {
    stages.push_back({{"max_depth", s.max_depth}, {"channels", s.channels}, {"stride", s.stride}});
  }
  return {{"stages", stages}};
}

ArchSpec arch_from_json(const nlohmann::json& j) {
  ArchSpec a;
  try {
    a.depths = j.at("depths").get<std::vector<int>>();
    a.channels = j.at("channels").get<std::vector<std::vector<std::size_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("arch spec: ") + e.what());
  }
  return a;
}

nlohmann::json to_json(const ArchSpec& arch) { return {{"depths", arch.depths}, {"channels", arch.channels}}; }

std::string to_string(const ArchSpec& arch) { return to_json(arch).dump(); }

}  // namespace pvkit::nas
