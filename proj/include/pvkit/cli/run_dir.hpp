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

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace pvkit::cli {

// Fixed run-directory layout:
//   <root>/config.snapshot   resolved configuration (JSON)
//   <root>/metrics.csv       one row per epoch or generation
//   <root>/checkpoints/      model and optimizer state
//   <root>/logs/             human-readable logs
class RunDir {
 public:
  enum class Open { kCreate, kResume, kRead };

  // kCreate refuses a non-empty directory unless `force`; kResume and
  // kRead require an existing run.
  RunDir(std::string root, Open mode, bool force = false);

  const std::string& root() const { return root_; }
  std::string path(const std::string& name) const;
  std::string snapshot_path() const { return path("config.snapshot"); }
  std::string metrics_path() const { return path("metrics.csv"); }
  std::string checkpoint_path(const std::string& name = "last.ckpt") const;
  std::string log_path(const std::string& name) const;

  void write_snapshot(const nlohmann::json& config) const;
  nlohmann::json read_snapshot() const;

  // Starts metrics.csv with `header` unless it exists and `append` is set.
  void start_metrics(const std::vector<std::string>& header, bool append) const;
  void append_metrics(const std::vector<std::string>& row) const;

 private:
  std::string root_;
};

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

// Appends timestamp-free lines to a log file and echoes them to `echo`.
class Logger {
 public:
  Logger(const std::string& path, std::ostream* echo);
  void operator()(const std::string& line);

 private:
  std::ofstream file_;
  std::ostream* echo_;
};

}  // namespace pvkit::cli
