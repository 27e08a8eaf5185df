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

#include "pvkit/cli/run_dir.hpp"

#include <filesystem>
#include <iostream>

#include "pvkit/common/errors.hpp"

namespace fs = std::filesystem;

namespace pvkit::cli {

RunDir::RunDir(std::string root, Open mode, bool force) : root_(std::move(root)) {
  if (root_.empty()) throw ConfigError("run directory must be given");
  std::error_code ec;
  if (mode == Open::kCreate) {
    if (fs::exists(root_) && !fs::is_empty(root_, ec) && !force) {
      throw ConfigError("run directory " + root_ + " is not empty; pass --force to overwrite");
    }
    if (force && fs::exists(root_)) {
      for (const char* sub : {"config.snapshot", "metrics.csv", "checkpoints", "logs"}) fs::remove_all(path(sub), ec);
    }
  } else if (!fs::is_regular_file(path("config.snapshot"))) {
    throw IoError(IoErrorKind::kOpen, "no run found at " + root_ + " (missing config.snapshot)");
  }
  if (mode != Open::kRead) {
    fs::create_directories(path("checkpoints"), ec);
    fs::create_directories(path("logs"), ec);
    if (ec) throw IoError(IoErrorKind::kOpen, "cannot create run directory " + root_ + ": " + ec.message());
  }
}

std::string RunDir::path(const std::string& name) const { return (fs::path(root_) / name).string(); }
std::string RunDir::checkpoint_path(const std::string& name) const { return path("checkpoints/" + name); }
std::string RunDir::log_path(const std::string& name) const { return path("logs/" + name); }

void RunDir::write_snapshot(const nlohmann::json& config) const { write_json_file(snapshot_path(), config); }
nlohmann::json RunDir::read_snapshot() const { return read_json_file(snapshot_path()); }

void RunDir::start_metrics(const std::vector<std::string>& header, bool append) const {
  if (append && fs::exists(metrics_path())) return;
  std::ofstream out(metrics_path(), std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::kOpen, "cannot write " + metrics_path());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
}

void RunDir::append_metrics(const std::vector<std::string>& row) const {
  std::ofstream out(metrics_path(), std::ios::app);
  if (!out) throw IoError(IoErrorKind::kOpen, "cannot append to " + metrics_path());
  for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
  out << '\n';
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorKind::kOpen, "cannot open " + path);
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::kOpen, "cannot write " + path);
  out << j.dump(2) << '\n';
}

Logger::Logger(const std::string& path, std::ostream* echo) : file_(path, std::ios::app), echo_(echo) {
  if (!file_) throw IoError(IoErrorKind::kOpen, "cannot open log " + path);
}

void Logger::operator()(const std::string& line) {
  file_ << line << '\n';
  file_.flush();
  if (echo_) *echo_ << line << '\n';
}

}  // namespace pvkit::cli
