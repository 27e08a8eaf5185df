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

#include "pvkit/bench/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "pvkit/common/errors.hpp"
#include "pvkit/common/timing.hpp"

#ifndef PVKIT_BUILD_FLAGS
#define PVKIT_BUILD_FLAGS "unknown"
#endif

namespace pvkit::bench {

Environment detect_environment() {
  Environment env;
  std::ifstream cpuinfo("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpuinfo, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) env.cpu_model = line.substr(line.find_first_not_of(' ', colon + 1));
      break;
    }
  }
  if (env.cpu_model.empty()) env.cpu_model = "unknown";
#if defined(__clang__)
  env.compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  env.compiler = "gcc " __VERSION__;
#else
  env.compiler = "unknown";
#endif
  env.build_flags = PVKIT_BUILD_FLAGS;
  return env;
}

Summary summarize(std::vector<double> s) {
  if (s.empty()) throw ContractError("cannot summarize an empty sample");
  std::sort(s.begin(), s.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  };
  return {quantile(0.5), quantile(0.25), quantile(0.75)};
}

void BenchOptions::validate() const {
  if (repetitions < 5) throw ConfigError("benchmarks need at least 5 repetitions, got " + std::to_string(repetitions));
  if (warmup < 0) throw ConfigError("warmup must be non-negative");
}

std::vector<double> time_repeated(const std::function<void()>& fn, const BenchOptions& options) {
  options.validate();
  for (int i = 0; i < options.warmup; ++i) fn();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(options.repetitions));
  for (int i = 0; i < options.repetitions; ++i) {
    const auto t0 = now_ns();
    fn();
    out.push_back(static_cast<double>(now_ns() - t0));
  }
  return out;
}

const std::string& BenchCell::param(const std::string& name) const {
  for (const auto& [k, v] : params)
    if (k == name) return v;
  throw ContractError("bench cell has no parameter '" + name + "'");
}

BenchReport::BenchReport(std::string id, std::vector<std::string> param_names, std::vector<std::string> extra_names,
                         std::string unit)
    : id_(std::move(id)),
      param_names_(std::move(param_names)),
      extra_names_(std::move(extra_names)),
      unit_(std::move(unit)),
      env_(detect_environment()) {}

BenchCell& BenchReport::add(std::vector<std::string> values, std::vector<double> samples,
                            std::map<std::string, double> extras) {
  if (values.size() != param_names_.size()) throw ContractError("bench cell parameter count mismatch");
  if (samples.size() < 5) {
    throw ContractError("bench cell reported from " + std::to_string(samples.size()) + " repetitions; 5 required");
  }
  BenchCell cell;
  for (std::size_t i = 0; i < values.size(); ++i) cell.params.emplace_back(param_names_[i], values[i]);
  cell.summary = summarize(samples);
  cell.samples = std::move(samples);
  cell.extras = std::move(extras);
  cells_.push_back(std::move(cell));
  return cells_.back();
}

BenchCell& BenchReport::add_skipped(std::vector<std::string> values, std::string note) {
  if (values.size() != param_names_.size()) throw ContractError("bench cell parameter count mismatch");
  BenchCell cell;
  for (std::size_t i = 0; i < values.size(); ++i) cell.params.emplace_back(param_names_[i], values[i]);
  cell.skipped = true;
  cell.note = std::move(note);
  cells_.push_back(std::move(cell));
  return cells_.back();
}

std::vector<const BenchCell*> BenchReport::find(
    const std::vector<std::pair<std::string, std::string>>& match) const {
  std::vector<const BenchCell*> out;
  for (const auto& c : cells_) {
    bool ok = true;
    for (const auto& [k, v] : match) ok = ok && c.param(k) == v;
    if (ok) out.push_back(&c);
  }
  return out;
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

}  // namespace

void BenchReport::write_csv(std::ostream& out) const {
  out << "benchmark";
  for (const auto& p : param_names_) out << ',' << p;
  for (const auto& e : extra_names_) out << ',' << e;
  out << ",median_" << unit_ << ",iqr_" << unit_ << ",repetitions,skipped\n";
  for (const auto& c : cells_) {
    out << id_;
    for (const auto& [k, v] : c.params) out << ',' << v;
    for (const auto& e : extra_names_) {
      const auto it = c.extras.find(e);
      out << ',';
      if (it != c.extras.end()) out << fmt(it->second);
    }
    if (c.skipped) {
      out << ",,,0,1\n";
    } else {
      out << ',' << fmt(c.summary.median) << ',' << fmt(c.summary.iqr()) << ',' << c.samples.size() << ",0\n";
    }
  }
}

std::string BenchReport::render_table() const {
  std::vector<std::string> header(param_names_);
  header.insert(header.end(), extra_names_.begin(), extra_names_.end());
  header.push_back("median_" + unit_);
  header.push_back("iqr_" + unit_);
  header.push_back("reps");
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : cells_) {
    std::vector<std::string> row;
    for (const auto& [k, v] : c.params) row.push_back(v);
    for (const auto& e : extra_names_) {
      const auto it = c.extras.find(e);
      row.push_back(it != c.extras.end() ? fmt(it->second) : "");
    }
    if (c.skipped) {
      row.insert(row.end(), {"skipped", "", "0"});
    } else {
      row.push_back(fmt(c.summary.median));
      row.push_back(fmt(c.summary.iqr()));
      row.push_back(std::to_string(c.samples.size()));
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  std::ostringstream out;
  out << "== " << id_ << " ==\n";
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << r[i];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  for (const auto& [k, v] : results_) out << k << " = " << fmt(v) << '\n';
  for (const auto& n : notes_) out << "note: " << n << '\n';
  out << "env: " << env_.cpu_model << " | " << env_.compiler << " | " << env_.build_flags << " | threads "
      << env_.threads << '\n';
  return out.str();
}

nlohmann::json BenchReport::to_json() const {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : cells_) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [k, v] : c.params) params[k] = v;
    nlohmann::json j = {{"params", params}, {"extras", c.extras}, {"skipped", c.skipped}};
    if (!c.skipped) {
      j["median"] = c.summary.median;
      j["iqr"] = c.summary.iqr();
      j["repetitions"] = c.samples.size();
    } else {
      j["note"] = c.note;
    }
    cells.push_back(std::move(j));
  }
  return {{"benchmark", id_},
          {"unit", unit_},
          {"cells", cells},
          {"results", results_},
          {"notes", notes_},
          {"environment",
           {{"cpu_model", env_.cpu_model},
            {"compiler", env_.compiler},
            {"build_flags", env_.build_flags},
            {"threads", env_.threads}}}};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("slope fit needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ContractError("log-log fit needs positive values");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  if (sxx == 0.0) throw ContractError("log-log fit needs distinct x values");
  return sxy / sxx;
}

}  // namespace pvkit::bench
