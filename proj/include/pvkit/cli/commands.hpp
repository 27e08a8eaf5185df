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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pvkit/pvconv/segmentation_model.hpp"
#include "pvkit/train/metrics.hpp"

namespace pvkit::cli {

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,     // unexpected internal error
  kExitConfig = 2,      // bad flags, config, schema or parse error
  kExitInfeasible = 3,  // no architecture satisfies the resource constraint
  kExitIo = 4,          // missing, unreadable or corrupt files
  kExitTraining = 5,    // non-finite loss or diverged training
};

struct GenDataOptions {
  std::string out;
  int scenes = 10;
  std::uint64_t seed = 0;
  std::vector<std::string> classes;  // empty: every primitive kind
  std::string split = "8:1:1";
  int points_scale = 1;
  bool force = false;
};

struct TrainOptions {
  std::string data;
  std::string run;
  std::string model = "pvcnn";  // pvcnn | spvcnn | pointmlp
  std::string model_config;     // JSON file; empty: built-in default
  bool supernet = false;
  std::string space;            // supernet JSON file; empty: built-in default
  int epochs = 1;
  std::string optimizer = "adam";
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int candidates = 4;
  bool depth_shrink = true;
  int max_scenes = 0;  // 0: all
  bool resume = false;
  bool force = false;
  std::string config;  // snapshot to rerun from
  int workers = 1;
};

struct SearchOptions {
  std::string supernet_run;
  std::string out;
  std::optional<double> macs_millions;
  std::optional<double> latency_ms;
  std::string predictor;
  int population = 32;
  int parents = 8;
  int generations = 20;
  double mutation = 0.1;
  int resample_budget = 1000;
  std::uint64_t seed = 0;
  int calib_scenes = 4;
  int val_scenes = 8;
  bool force = false;
  std::string config;
  int workers = 1;
};

struct CampaignOptions {
  std::string out;           // pair file
  std::string supernet_run;  // empty: freshly initialized default supernet
  std::string space;
  std::size_t count = 500;
  std::uint64_t seed = 0;
  std::size_t points = 4096;
  int repetitions = 5;
  int warmup = 1;
  int rounds = 5;
};

struct FitOptions {
  std::string pairs;
  std::string out;
  int epochs = 3000;
  std::vector<std::size_t> hidden = {16, 16};
  double lr = 3e-2;
  double holdout = 0.2;
  std::uint64_t seed = 0;
};

struct BenchCliOptions {
  std::string which = "all";  // access | memory | crossover | hash | all
  std::string out;            // directory for CSV/text/JSON reports
  int repetitions = 5;
  int warmup = 3;
  std::uint64_t seed = 0;
  bool quick = false;  // reduced sweeps for smoke runs
};

struct EvalOptions {
  std::string run;
  std::string data;
  std::string split = "test";
  std::string arch;  // best_arch.json for supernet runs
  std::string predictions;
  std::string labels;
  std::size_t classes = 4;
  std::string out;
  int workers = 1;
};

int cmd_gen_data(const GenDataOptions& o, std::ostream& out);
int cmd_train(const TrainOptions& o, std::ostream& out);
int cmd_search(const SearchOptions& o, std::ostream& out);
int cmd_latency_campaign(const CampaignOptions& o, std::ostream& out);
int cmd_fit_predictor(const FitOptions& o, std::ostream& out);
int cmd_bench(const BenchCliOptions& o, std::ostream& out);
int cmd_eval(const EvalOptions& o, std::ostream& out);

// Built-in model configs (3 blocks) for pvcnn, spvcnn and pointmlp.
nlohmann::json default_model_config(const std::string& kind);
std::unique_ptr<pv::SegmentationModel<float>> make_model(const std::string& kind, const nlohmann::json& config,
                                                         std::uint64_t seed);

// Per-class IoU table and mIoU as printed by eval.
nlohmann::json confusion_report(const train::ConfusionMatrix& cm);

// Split "a:b:c" of n scenes into (train, val, test) counts.
std::vector<int> split_counts(const std::string& split, int n);

}  // namespace pvkit::cli
