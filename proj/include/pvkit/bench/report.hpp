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
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace pvkit::bench {

struct Environment {
  std::string cpu_model;
  std::string compiler;
  std::string build_flags;
  int threads = 1;
};

Environment detect_environment();

struct Summary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr() const { return q3 - q1; }
};

// Linear-interpolated quartiles. Throws ContractError on empty input.
Summary summarize(std::vector<double> samples);

struct BenchOptions {
  int repetitions = 5;  // values below 5 are rejected
  int warmup = 3;

  void validate() const;
};

// Runs `fn` warmup + repetitions times and returns the timed samples (ns).
std::vector<double> time_repeated(const std::function<void()>& fn, const BenchOptions& options);

// One grid point. Skipped cells carry no samples (zero-work inputs).
struct BenchCell {
  std::vector<std::pair<std::string, std::string>> params;
  std::map<std::string, double> extras;
  std::vector<double> samples;
  Summary summary;
  bool skipped = false;
  std::string note;

  const std::string& param(const std::string& name) const;
};

// Benchmark output: cells in grid order, scalar results (fitted slopes,
// ratios, crossover) and the environment the numbers came from.
class BenchReport {
 public:
  BenchReport(std::string id, std::vector<std::string> param_names, std::vector<std::string> extra_names,
              std::string unit = "ns");

  // Summarizes `samples`; fewer than 5 samples raise ContractError.
  BenchCell& add(std::vector<std::string> param_values, std::vector<double> samples,
                 std::map<std::string, double> extras = {});
  BenchCell& add_skipped(std::vector<std::string> param_values, std::string note);

  const std::string& id() const { return id_; }
  const std::string& unit() const { return unit_; }
  const std::vector<BenchCell>& cells() const { return cells_; }
  const Environment& environment() const { return env_; }
  // Cells whose params include every (name, value) in `match`.
  std::vector<const BenchCell*> find(const std::vector<std::pair<std::string, std::string>>& match) const;

  std::map<std::string, double>& results() { return results_; }
  const std::map<std::string, double>& results() const { return results_; }
  std::vector<std::string>& notes() { return notes_; }
  const std::vector<std::string>& notes() const { return notes_; }

  // Columns: benchmark, params..., extras..., median_<unit>, iqr_<unit>,
  // repetitions, skipped.
  void write_csv(std::ostream& out) const;
  std::string render_table() const;
  nlohmann::json to_json() const;

 private:
  std::string id_;
  std::vector<std::string> param_names_;
  std::vector<std::string> extra_names_;
  std::string unit_;
  std::vector<BenchCell> cells_;
  std::map<std::string, double> results_;
  std::vector<std::string> notes_;
  Environment env_;
};

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pvkit::bench
