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

#include "pvkit/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "pvkit/bench/benchmarks.hpp"
#include "pvkit/cli/run_dir.hpp"
#include "pvkit/common/errors.hpp"
#include "pvkit/common/random.hpp"
#include "pvkit/nas/evolution.hpp"
#include "pvkit/nas/latency.hpp"
#include "pvkit/nas/supernet.hpp"
#include "pvkit/pointcloud/io.hpp"
#include "pvkit/pointcloud/synthetic.hpp"
#include "pvkit/pvconv/pvconv.hpp"
#include "pvkit/spvconv/spvconv.hpp"
#include "pvkit/train/trainer.hpp"

namespace fs = std::filesystem;

namespace pvkit::cli {

using nlohmann::json;

namespace {

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

ad::OptimizerConfig optimizer_config(const std::string& kind, double lr) {
  ad::OptimizerConfig c;
  if (kind == "adam") {
    c.kind = ad::OptimizerKind::kAdam;
  } else if (kind == "sgd") {
    c.kind = ad::OptimizerKind::kSgd;
    c.momentum = 0.9;
  } else {
    throw ConfigError("unknown optimizer '" + kind + "' (expected adam or sgd)");
  }
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  c.lr = lr;
  return c;
}

void require_positive(int v, const std::string& what) {
  if (v < 1) throw ConfigError(what + " must be at least 1");
}

std::vector<cloud::PointCloud> load_split(const std::string& data, const std::string& split) {
  const auto dir = (fs::path(data) / split).string();
  if (!fs::is_directory(dir)) throw IoError(IoErrorKind::kOpen, "dataset split not found: " + dir);
  return train::load_scenes(dir);
}

void check_scenes(const std::vector<cloud::PointCloud>& scenes, std::size_t channels, std::size_t classes,
                  const std::string& what) {
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& pc = scenes[i];
    if (pc.channels() != channels) {
      throw ConfigError(what + " scene " + std::to_string(i) + " has " + std::to_string(pc.channels()) +
                        " feature channels but the model expects " + std::to_string(channels));
    }
    if (!pc.has_labels()) throw ConfigError(what + " scene " + std::to_string(i) + " has no labels");
    for (auto l : *pc.labels()) {
      if (l >= classes) {
        throw ConfigError(what + " scene " + std::to_string(i) + " has label " + std::to_string(l) +
                          " but the model predicts " + std::to_string(classes) + " classes");
      }
    }
  }
}

std::vector<cloud::PointCloud> prefix(std::vector<cloud::PointCloud> v, int n) {
  if (n > 0 && static_cast<std::size_t>(n) < v.size()) v.erase(v.begin() + n, v.end());
  return v;
}

// Contiguous chunks per worker, merged in order so results do not depend
// on the worker count.
train::ConfusionMatrix parallel_evaluate(pv::SegmentationModel<float>& model,
                                         const std::vector<cloud::PointCloud>& scenes, int workers) {
  require_positive(workers, "--workers");
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), std::max<std::size_t>(1, scenes.size()));
  if (w == 1) return train::evaluate<float>(model, scenes);
  std::vector<train::ConfusionMatrix> parts(w, train::ConfusionMatrix(model.num_classes()));
  std::vector<std::exception_ptr> errors(w);
  std::vector<std::thread> threads;
  const std::size_t per = (scenes.size() + w - 1) / w;
  for (std::size_t t = 0; t < w; ++t) {
    threads.emplace_back([&, t] {
      try {
        const auto lo = std::min(scenes.size(), t * per), hi = std::min(scenes.size(), lo + per);
        parts[t] = train::evaluate<float>(model, std::vector<cloud::PointCloud>(scenes.begin() + lo, scenes.begin() + hi));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  train::ConfusionMatrix cm(model.num_classes());
  for (const auto& p : parts) cm.merge(p);
  return cm;
}

}  // namespace

std::vector<int> split_counts(const std::string& split, int n) {
  std::vector<int> parts;
  std::stringstream ss(split);
  std::string field;
  while (std::getline(ss, field, ':')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(field, &used);
      if (used != field.size() || v < 0) throw std::invalid_argument(field);
      parts.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("split '" + split + "' must look like train:val:test with non-negative integers");
    }
  }
  if (parts.size() != 3) throw ConfigError("split '" + split + "' must have three parts");
  const int total = parts[0] + parts[1] + parts[2];
  if (total == 0) throw ConfigError("split parts must not all be zero");
  const int val = n * parts[1] / total, test = n * parts[2] / total;
  return {n - val - test, val, test};
}

json default_model_config(const std::string& kind) {
  json blocks = json::array();
  if (kind == "pvcnn" || kind == "pointmlp") {
    const int depth = kind == "pvcnn" ? 2 : 0;
    blocks = {{{"out", 16}, {"resolution", 16}, {"voxel_depth", depth}},
              {{"out", 32}, {"resolution", 16}, {"voxel_depth", depth}},
              {{"out", 32}, {"resolution", 8}, {"voxel_depth", depth}}};
  } else if (kind == "spvcnn") {
    blocks = {{{"out", 16}, {"voxel_size", 1.0 / 32}, {"voxel_depth", 2}},
              {{"out", 32}, {"voxel_size", 1.0 / 32}, {"voxel_depth", 2}},
              {{"out", 32}, {"voxel_size", 1.0 / 16}, {"voxel_depth", 2}}};
  } else {
    throw ConfigError("unknown model '" + kind + "' (expected pvcnn, spvcnn or pointmlp)");
  }
  return {{"in_channels", 3}, {"num_classes", cloud::kNumPrimitiveKinds}, {"head", {32}}, {"blocks", blocks}};
}

std::unique_ptr<pv::SegmentationModel<float>> make_model(const std::string& kind, const json& config,
                                                         std::uint64_t seed) {
  if (kind == "pvcnn" || kind == "pointmlp") {
    return std::make_unique<pv::Pvcnn<float>>(pv::pvcnn_config_from_json(config), seed);
  }
  if (kind == "spvcnn") return std::make_unique<sparse::Spvcnn<float>>(sparse::spvcnn_config_from_json(config), seed);
  throw ConfigError("unknown model '" + kind + "' (expected pvcnn, spvcnn or pointmlp)");
}

json confusion_report(const train::ConfusionMatrix& cm) {
  json classes = json::array();
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto iou = cm.iou(c);
    const std::string name = c < cloud::kNumPrimitiveKinds
                                 ? std::string(cloud::primitive_name(static_cast<cloud::PrimitiveKind>(c)))
                                 : "class" + std::to_string(c);
    classes.push_back({{"id", c}, {"name", name}, {"iou", iou ? json(*iou) : json(nullptr)}});
  }
  return {{"classes", classes}, {"miou", cm.miou()}, {"accuracy", cm.accuracy()}, {"points", cm.total()}};
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const GenDataOptions& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("--out is required");
  require_positive(o.scenes, "--scenes");
  require_positive(o.points_scale, "--points-scale");
  const auto counts = split_counts(o.split, o.scenes);
  auto config = cloud::default_scene_config(o.points_scale);
  std::vector<std::string> names;
  if (!o.classes.empty()) {
    std::vector<cloud::PrimitiveSpec> kept;
    for (const auto& name : o.classes) {
      const auto kind = cloud::parse_primitive(name);
      if (!kind) throw ConfigError("unknown class '" + name + "' (expected plane, sphere, box or pole)");
      for (const auto& p : config.primitives)
        if (p.kind == *kind) kept.push_back(p);
    }
    config.primitives = kept;
  }
  for (const auto& p : config.primitives) names.emplace_back(cloud::primitive_name(p.kind));

  std::error_code ec;
  if (fs::exists(o.out) && !fs::is_empty(o.out, ec)) {
    if (!o.force) throw ConfigError("output directory " + o.out + " is not empty; pass --force to overwrite");
    for (const char* sub : {"train", "val", "test", "dataset.json"}) fs::remove_all(fs::path(o.out) / sub, ec);
  }
  const char* splits[3] = {"train", "val", "test"};
  for (const char* s : splits) {
    fs::create_directories(fs::path(o.out) / s, ec);
    if (ec) throw IoError(IoErrorKind::kOpen, "cannot create " + (fs::path(o.out) / s).string());
  }
  int index = 0;
  for (int part = 0; part < 3; ++part) {
    for (int k = 0; k < counts[static_cast<std::size_t>(part)]; ++k, ++index) {
      const auto pc = cloud::generate_synthetic_scene(config, derive_seed(o.seed, static_cast<std::uint64_t>(index)));
      std::ostringstream file;
      file << "scene_" << std::setw(5) << std::setfill('0') << index << ".pvpc";
      cloud::save_point_cloud((fs::path(o.out) / splits[part] / file.str()).string(), pc);
    }
  }
  write_json_file((fs::path(o.out) / "dataset.json").string(),
                  {{"scenes", o.scenes},
                   {"seed", o.seed},
                   {"classes", names},
                   {"split", o.split},
                   {"counts", {{"train", counts[0]}, {"val", counts[1]}, {"test", counts[2]}}},
                   {"points_scale", o.points_scale},
                   {"num_classes", cloud::kNumPrimitiveKinds},
                   {"channels", 3}});
  out << "wrote " << o.scenes << " scenes to " << o.out << " (train " << counts[0] << ", val " << counts[1]
      << ", test " << counts[2] << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

namespace {

json train_snapshot(const TrainOptions& o) {
  json j = {{"command", "train"},
            {"version", 1},
            {"data", absolute(o.data)},
            {"model", o.supernet ? "supernet" : o.model},
            {"epochs", o.epochs},
            {"optimizer", {{"kind", o.optimizer}, {"lr", o.lr}}},
            {"seed", o.seed},
            {"supernet", o.supernet},
            {"max_scenes", o.max_scenes},
            {"workers", o.workers}};
  if (o.supernet) {
    auto cfg = o.space.empty() ? nas::default_supernet_config() : nas::supernet_config_from_json(read_json_file(o.space));
    j["supernet_config"] = nas::to_json(cfg);
    j["candidates"] = o.candidates;
    j["depth_shrink"] = o.depth_shrink;
  } else {
    const json raw = o.model_config.empty() ? default_model_config(o.model) : read_json_file(o.model_config);
    // Round-trip through the typed config so the snapshot is fully resolved.
    if (o.model == "spvcnn") {
      j["model_config"] = sparse::to_json(sparse::spvcnn_config_from_json(raw));
    } else if (o.model == "pvcnn" || o.model == "pointmlp") {
      j["model_config"] = pv::to_json(pv::pvcnn_config_from_json(raw));
    } else {
      throw ConfigError("unknown model '" + o.model + "' (expected pvcnn, spvcnn or pointmlp)");
    }
  }
  return j;
}

struct ResolvedTrain {
  json snapshot;
  std::string data;
  int epochs;
  std::uint64_t seed;
  ad::OptimizerConfig optimizer;
  int max_scenes;
  int workers;
};

ResolvedTrain resolve_train(const json& s) {
  try {
    if (s.at("command") != "train") throw ConfigError("snapshot is not a train config");
    ResolvedTrain r{s,
                    s.at("data").get<std::string>(),
                    s.at("epochs").get<int>(),
                    s.at("seed").get<std::uint64_t>(),
                    optimizer_config(s.at("optimizer").at("kind").get<std::string>(),
                                     s.at("optimizer").at("lr").get<double>()),
                    s.value("max_scenes", 0),
                    s.value("workers", 1)};
    require_positive(r.epochs, "epochs");
    require_positive(r.workers, "workers");
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
}

}  // namespace

int cmd_train(const TrainOptions& o, std::ostream& out) {
  if (o.run.empty()) throw ConfigError("--run is required");
  json snapshot;
  std::unique_ptr<RunDir> run;
  if (o.resume) {
    run = std::make_unique<RunDir>(o.run, RunDir::Open::kResume);
    snapshot = run->read_snapshot();
    // A larger --epochs extends a resumed run.
    if (o.epochs > snapshot.value("epochs", 0)) snapshot["epochs"] = o.epochs;
  } else {
    if (!o.config.empty()) {
      snapshot = read_json_file(o.config);
    } else {
      if (o.data.empty()) throw ConfigError("--data is required");
      require_positive(o.epochs, "--epochs");
      require_positive(o.candidates, "--candidates");
      snapshot = train_snapshot(o);
    }
  }
  const auto r = resolve_train(snapshot);
  const bool supernet = snapshot.value("supernet", false);

  // Everything that can be rejected is checked before the run directory
  // is touched or any training starts.
  auto train_scenes = prefix(load_split(r.data, "train"), r.max_scenes);
  const auto val_scenes = load_split(r.data, "val");
  if (train_scenes.empty()) throw ConfigError("dataset " + r.data + " has no training scenes");

  std::unique_ptr<nas::SuperNet> net;
  std::unique_ptr<pv::SegmentationModel<float>> model;
  nas::SupernetTrainConfig sconfig;
  if (supernet) {
    nas::SupernetConfig cfg;
    try {
      cfg = nas::supernet_config_from_json(snapshot.at("supernet_config"));
      sconfig.candidates = snapshot.at("candidates").get<int>();
      sconfig.depth_shrink = snapshot.at("depth_shrink").get<bool>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("supernet config: ") + e.what());
    }
    require_positive(sconfig.candidates, "candidates");
    sconfig.epochs = r.epochs;
    sconfig.seed = r.seed;
    sconfig.optimizer = r.optimizer;
    if (sconfig.depth_shrink) {
      int deepest = 1;
      for (const auto& st : cfg.space.stages()) deepest = std::max(deepest, st.max_depth);
      if (r.epochs < deepest) {
        throw ConfigError("depth shrinking needs at least " + std::to_string(deepest) +
                          " epochs; raise --epochs or pass --no-depth-shrink");
      }
    }
    check_scenes(train_scenes, cfg.in_channels, cfg.num_classes, "train");
    check_scenes(val_scenes, cfg.in_channels, cfg.num_classes, "val");
    net = std::make_unique<nas::SuperNet>(cfg, r.seed);
    model = std::make_unique<nas::CandidateModel>(*net, nas::maximal_arch(cfg.space));
  } else {
    try {
      model = make_model(snapshot.at("model").get<std::string>(), snapshot.at("model_config"), r.seed);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("model config: ") + e.what());
    }
    check_scenes(train_scenes, model->in_channels(), model->num_classes(), "train");
    check_scenes(val_scenes, model->in_channels(), model->num_classes(), "val");
  }

  if (!run) run = std::make_unique<RunDir>(o.run, RunDir::Open::kCreate, o.force);
  run->write_snapshot(snapshot);
  Logger log(run->log_path("train.log"), &out);
  ad::Optimizer<float> optimizer(r.optimizer);
  int first_epoch = 0;
  if (o.resume) {
    first_epoch = train::load_training_state<float>(run->checkpoint_path(), *model, &optimizer);
    log("resuming at epoch " + std::to_string(first_epoch));
  }
  if (first_epoch >= r.epochs) {
    log("run already completed " + std::to_string(first_epoch) + " epochs");
    return kExitOk;
  }

  const auto t0 = std::chrono::steady_clock::now();
  if (supernet) {
    run->start_metrics({"epoch", "loss", "depth_floor", "val_miou_largest"}, o.resume);
    const auto calib = prefix(train_scenes, 4);
    const auto largest = nas::maximal_arch(net->space());
    nas::train_supernet(*net, optimizer, train_scenes, sconfig, first_epoch, [&](const nas::SupernetEpoch& m) {
      const double val = val_scenes.empty() ? 0.0 : nas::candidate_miou(*net, largest, calib, val_scenes);
      run->append_metrics({std::to_string(m.epoch), num(m.loss), std::to_string(m.depth_floor), num(val)});
      train::save_training_state<float>(run->checkpoint_path(), *model, optimizer, m.epoch + 1);
      log("epoch " + std::to_string(m.epoch) + " loss " + num(m.loss) + " depth_floor " +
          std::to_string(m.depth_floor) + " val_miou(largest) " + num(val));
    });
  } else {
    run->start_metrics({"epoch", "loss", "train_miou", "val_miou"}, o.resume);
    train::TrainConfig tc;
    tc.epochs = r.epochs;
    tc.optimizer = r.optimizer;
    tc.seed = r.seed;
    train::fit<float>(*model, optimizer, train_scenes, val_scenes, tc, first_epoch, [&](const train::EpochMetrics& m) {
      run->append_metrics({std::to_string(m.epoch), num(m.loss), num(m.train_miou), num(m.val_miou)});
      train::save_training_state<float>(run->checkpoint_path(), *model, optimizer, m.epoch + 1);
      log("epoch " + std::to_string(m.epoch) + " loss " + num(m.loss) + " train_miou " + num(m.train_miou) +
          " val_miou " + num(m.val_miou));
    });
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log("finished in " + num(secs) + " s; checkpoint " + run->checkpoint_path());
  return kExitOk;
}

// ---------------------------------------------------------------- search

namespace {

struct LoadedSupernet {
  json snapshot;
  nas::SupernetConfig config;
  std::unique_ptr<nas::SuperNet> net;
};

LoadedSupernet load_supernet(const std::string& dir) {
  RunDir run(dir, RunDir::Open::kRead);
  LoadedSupernet s;
  s.snapshot = run.read_snapshot();
  if (!s.snapshot.value("supernet", false)) throw ConfigError(dir + " is not a supernet training run");
  try {
    s.config = nas::supernet_config_from_json(s.snapshot.at("supernet_config"));
    s.net = std::make_unique<nas::SuperNet>(s.config, s.snapshot.at("seed").get<std::uint64_t>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("supernet snapshot: ") + e.what());
  }
  nas::CandidateModel view(*s.net, nas::maximal_arch(s.config.space));
  train::load_training_state<float>(run.checkpoint_path(), view, nullptr);
  return s;
}

}  // namespace

int cmd_search(const SearchOptions& opts, std::ostream& out) {
  if (opts.out.empty()) throw ConfigError("--out is required");
  SearchOptions o = opts;
  if (!opts.config.empty()) {
    const auto s = read_json_file(opts.config);
    try {
      if (s.at("command") != "search") throw ConfigError("snapshot is not a search config");
      o.supernet_run = s.at("supernet_run").get<std::string>();
      const auto& c = s.at("constraint");
      o.macs_millions.reset();
      o.latency_ms.reset();
      if (c.at("kind") == "macs") o.macs_millions = c.at("budget").get<double>() / 1e6;
      if (c.at("kind") == "latency") {
        o.latency_ms = c.at("budget").get<double>();
        o.predictor = c.at("predictor").get<std::string>();
      }
      const auto& e = s.at("evolution");
      o.population = e.at("population").get<int>();
      o.parents = e.at("parents").get<int>();
      o.generations = e.at("generations").get<int>();
      o.mutation = e.at("mutation_prob").get<double>();
      o.resample_budget = e.at("resample_budget").get<int>();
      o.seed = e.at("seed").get<std::uint64_t>();
      o.calib_scenes = s.at("calib_scenes").get<int>();
      o.val_scenes = s.at("val_scenes").get<int>();
      o.workers = s.value("workers", 1);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("search config: ") + e.what());
    }
  }
  if (o.supernet_run.empty()) throw ConfigError("--supernet-run is required");
  if (o.macs_millions && o.latency_ms) throw ConfigError("pass at most one of --macs and --latency");
  if (o.latency_ms && o.predictor.empty()) throw ConfigError("--latency needs --predictor");
  if (o.macs_millions && !(*o.macs_millions > 0.0)) throw ConfigError("--macs must be positive");
  if (o.latency_ms && !(*o.latency_ms > 0.0)) throw ConfigError("--latency must be positive");
  require_positive(o.calib_scenes, "--calib-scenes");
  require_positive(o.val_scenes, "--val-scenes");
  require_positive(o.workers, "--workers");

  nas::EvolutionConfig ec;
  ec.population = o.population;
  ec.parents = o.parents;
  ec.generations = o.generations;
  ec.mutation_prob = o.mutation;
  ec.resample_budget = o.resample_budget;
  ec.seed = o.seed;

  auto sup = load_supernet(o.supernet_run);
  ec.validate(sup.config.space);
  const std::string data = sup.snapshot.at("data").get<std::string>();
  const auto calib = prefix(load_split(data, "train"), o.calib_scenes);
  const auto val = prefix(load_split(data, "val"), o.val_scenes);
  if (calib.empty() || val.empty()) throw ConfigError("search needs non-empty train and val splits in " + data);

  std::optional<nas::ResourceConstraint> constraint;
  json cjson = {{"kind", "none"}};
  std::unique_ptr<nas::MacsEstimator> macs;
  std::unique_ptr<nas::LatencyPredictor> predictor;
  if (o.macs_millions) {
    macs = std::make_unique<nas::MacsEstimator>(sup.config, calib);
    constraint = nas::ResourceConstraint{nas::ResourceKind::kMacs, *o.macs_millions * 1e6,
                                         [&](const nas::ArchSpec& a) { return macs->estimate(a); }};
    cjson = {{"kind", "macs"}, {"budget", *o.macs_millions * 1e6}};
  } else if (o.latency_ms) {
    predictor = std::make_unique<nas::LatencyPredictor>(nas::LatencyPredictor::load(o.predictor));
    if (predictor->input_length() != sup.config.space.vector_length()) {
      throw ConfigError("predictor expects vectors of length " + std::to_string(predictor->input_length()) +
                        " but the search space encodes " + std::to_string(sup.config.space.vector_length()));
    }
    constraint = nas::ResourceConstraint{
        nas::ResourceKind::kLatency, *o.latency_ms,
        [&](const nas::ArchSpec& a) { return predictor->predict(nas::encode(sup.config.space, a)); }};
    cjson = {{"kind", "latency"}, {"budget", *o.latency_ms}, {"predictor", absolute(o.predictor)}};
  }

  const json snapshot = {{"command", "search"},
                         {"version", 1},
                         {"supernet_run", absolute(o.supernet_run)},
                         {"constraint", cjson},
                         {"evolution",
                          {{"population", ec.population},
                           {"parents", ec.parents},
                           {"generations", ec.generations},
                           {"mutation_prob", ec.mutation_prob},
                           {"resample_budget", ec.resample_budget},
                           {"seed", ec.seed}}},
                         {"calib_scenes", o.calib_scenes},
                         {"val_scenes", o.val_scenes},
                         {"workers", o.workers}};
  RunDir run(o.out, RunDir::Open::kCreate, o.force);
  run.write_snapshot(snapshot);
  Logger log(run.log_path("search.log"), &out);
  run.start_metrics({"generation", "best_fitness", "best_usage", "evaluations", "best_vector"}, false);

  auto fitness = [&](const nas::ArchSpec& a) { return nas::candidate_miou(*sup.net, a, calib, val); };
  const auto result = nas::evolutionary_search(sup.config.space, fitness, constraint, ec, [&](const nas::GenerationRecord& g) {
    std::string vec;
    for (std::size_t i = 0; i < g.best_vector.size(); ++i) vec += (i ? ";" : "") + num(g.best_vector[i]);
    run.append_metrics({std::to_string(g.generation), num(g.best_fitness), num(g.best_usage),
                        std::to_string(g.evaluations), vec});
    log("generation " + std::to_string(g.generation) + " best_miou " + num(g.best_fitness) + " usage " +
        num(g.best_usage) + " evaluated " + std::to_string(g.evaluations));
  });
  const json best = {{"arch", nas::to_json(result.best)},
                     {"fitness", result.best_fitness},
                     {"usage", result.best_usage},
                     {"resource", cjson.at("kind")},
                     {"vector", nas::encode(sup.config.space, result.best)},
                     {"evaluations", result.evaluations}};
  write_json_file(run.path("best_arch.json"), best);
  log("best " + nas::to_string(result.best) + " miou " + num(result.best_fitness));
  return kExitOk;
}

// ------------------------------------------------------- latency campaign

int cmd_latency_campaign(const CampaignOptions& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("--out is required");
  if (o.count == 0) throw ConfigError("--count must be at least 1");
  if (o.points == 0) throw ConfigError("--points must be at least 1");
  if (o.repetitions < 1 || o.warmup < 0 || o.rounds < 1) {
    throw ConfigError("--reps and --rounds must be >= 1 and --warmup >= 0");
  }
  std::unique_ptr<nas::SuperNet> net;
  if (!o.supernet_run.empty()) {
    net = std::move(load_supernet(o.supernet_run).net);
  } else {
    auto cfg = o.space.empty() ? nas::default_supernet_config() : nas::supernet_config_from_json(read_json_file(o.space));
    net = std::make_unique<nas::SuperNet>(cfg, o.seed);
  }
  const auto pc = cloud::normalize(cloud::generate_scene_with_points(o.points, derive_seed(o.seed, 1)));
  const auto samples = nas::latency_campaign(*net, pc, o.count, o.seed, {o.warmup, o.repetitions, o.rounds});
  nas::save_latency_pairs(o.out, samples);
  double lo = samples.front().latency_ms, hi = lo;
  for (const auto& s : samples) {
    lo = std::min(lo, s.latency_ms);
    hi = std::max(hi, s.latency_ms);
  }
  out << "measured " << samples.size() << " architectures on " << pc.size() << " points; latency " << num(lo)
      << " .. " << num(hi) << " ms; pairs written to " << o.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------- fit-predictor

int cmd_fit_predictor(const FitOptions& o, std::ostream& out) {
  if (o.pairs.empty() || o.out.empty()) throw ConfigError("--pairs and --out are required");
  const auto samples = nas::load_latency_pairs(o.pairs);
  nas::PredictorConfig pc;
  pc.hidden = o.hidden;
  pc.epochs = o.epochs;
  pc.lr = o.lr;
  pc.holdout_fraction = o.holdout;
  pc.seed = o.seed;
  nas::PredictorReport report;
  const auto p = nas::LatencyPredictor::fit(samples, pc, &report);
  p.save(o.out);
  out << "train " << report.train_size << " pairs, mean relative error " << num(report.train_mre) << '\n';
  if (report.holdout_size > 0) {
    out << "holdout " << report.holdout_size << " pairs, mean relative error " << num(report.holdout_mre) << '\n';
  }
  for (const auto& w : report.warnings) out << "warning: " << w << '\n';
  out << "predictor written to " << o.out << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ bench

int cmd_bench(const BenchCliOptions& o, std::ostream& out) {
  bench::BenchOptions bo;
  bo.repetitions = o.repetitions;
  bo.warmup = o.warmup;
  bo.validate();
  const std::vector<std::string> known = {"access", "memory", "crossover", "hash"};
  if (o.which != "all" && std::find(known.begin(), known.end(), o.which) == known.end()) {
    throw ConfigError("unknown benchmark '" + o.which + "' (expected access, memory, crossover, hash or all)");
  }
  if (!o.out.empty()) {
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) throw IoError(IoErrorKind::kOpen, "cannot create " + o.out);
  }
  auto emit = [&](const bench::BenchReport& r) {
    out << r.render_table() << '\n';
    if (o.out.empty()) return;
    const auto base = (fs::path(o.out) / r.id()).string();
    std::ofstream csv(base + ".csv"), txt(base + ".txt");
    if (!csv || !txt) throw IoError(IoErrorKind::kOpen, "cannot write reports under " + o.out);
    r.write_csv(csv);
    txt << r.render_table();
    write_json_file(base + ".json", r.to_json());
  };
  auto wants = [&](const std::string& w) { return o.which == "all" || o.which == w; };
  if (wants("access")) {
    bench::AccessPatternConfig c;
    c.seed = o.seed;
    c.options = bo;
    if (o.quick) {
      c.array_elements = {std::size_t{1} << 16, std::size_t{1} << 22};
      c.index_count = std::size_t{1} << 20;
    } else {
      c.array_elements = {std::size_t{1} << 16, bench::default_large_array_elements()};
    }
    emit(bench::bench_access_pattern(c));
  }
  if (wants("memory")) {
    bench::MemoryModelConfig c;
    c.seed = o.seed;
    emit(bench::bench_memory_model(c));
  }
  if (wants("crossover")) {
    bench::CrossoverConfig c;
    c.seed = o.seed;
    c.options = bo;
    if (o.quick) {
      c.points = 2048;
      c.resolutions = {8, 16, 32};
      c.channels = 8;
    }
    emit(bench::bench_primitive_crossover(c));
  }
  if (wants("hash")) {
    bench::HashVsNaiveConfig c;
    c.seed = o.seed;
    c.options = bo;
    if (o.quick) c.sizes = {1000, 10000};
    emit(bench::bench_hash_vs_naive(c));
  }
  return kExitOk;
}

// ------------------------------------------------------------------- eval

namespace {

std::vector<std::uint32_t> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorKind::kOpen, "cannot open " + path);
  std::vector<std::uint32_t> out;
  std::string tok;
  std::size_t index = 0;
  while (in >> tok) {
    ++index;
    try {
      std::size_t used = 0;
      const long v = std::stol(tok, &used);
      if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
      out.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::exception&) {
      throw ConfigError(path + ": entry " + std::to_string(index) + " ('" + tok + "') is not a class id");
    }
  }
  return out;
}

void print_report(const json& r, std::ostream& out) {
  out << std::left << std::setw(10) << "class" << "iou\n";
  for (const auto& c : r.at("classes")) {
    out << std::setw(10) << c.at("name").get<std::string>() << (c.at("iou").is_null() ? "n/a" : num(c.at("iou").get<double>()))
        << '\n';
  }
  out << "mIoU " << num(r.at("miou").get<double>()) << "  accuracy " << num(r.at("accuracy").get<double>()) << '\n';
}

}  // namespace

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  json report;
  if (!o.predictions.empty() || !o.labels.empty()) {
    if (o.predictions.empty() || o.labels.empty()) throw ConfigError("--predictions and --labels go together");
    if (o.classes == 0) throw ConfigError("--classes must be positive");
    const auto pred = read_labels(o.predictions), labels = read_labels(o.labels);
    if (pred.size() != labels.size()) {
      throw ConfigError("predictions have " + std::to_string(pred.size()) + " entries, labels " +
                        std::to_string(labels.size()));
    }
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] >= o.classes || labels[i] >= o.classes) {
        throw ConfigError("entry " + std::to_string(i + 1) + " names a class outside [0, " +
                          std::to_string(o.classes) + ")");
      }
    }
    train::ConfusionMatrix cm(o.classes);
    cm.add(pred, labels);
    report = confusion_report(cm);
  } else {
    if (o.run.empty()) throw ConfigError("eval needs --run, or --predictions with --labels");
    RunDir run(o.run, RunDir::Open::kRead);
    const auto snapshot = run.read_snapshot();
    const auto r = resolve_train(snapshot);
    const std::string data = o.data.empty() ? r.data : o.data;
    const auto scenes = load_split(data, o.split);
    if (scenes.empty()) throw ConfigError("split " + o.split + " of " + data + " has no scenes");
    if (snapshot.value("supernet", false)) {
      auto sup = load_supernet(o.run);
      nas::ArchSpec arch = nas::maximal_arch(sup.config.space);
      if (!o.arch.empty()) {
        const auto j = read_json_file(o.arch);
        arch = nas::arch_from_json(j.contains("arch") ? j.at("arch") : j);
        if (!nas::is_valid(sup.config.space, arch)) throw ConfigError("architecture does not fit the supernet's space");
      }
      check_scenes(scenes, sup.config.in_channels, sup.config.num_classes, o.split);
      sup.net->calibrate_bn(arch, prefix(load_split(data, "train"), 4));
      nas::CandidateModel model(*sup.net, arch);
      report = confusion_report(parallel_evaluate(model, scenes, o.workers));
      report["arch"] = nas::to_json(arch);
    } else {
      auto model = make_model(snapshot.at("model").get<std::string>(), snapshot.at("model_config"), r.seed);
      check_scenes(scenes, model->in_channels(), model->num_classes(), o.split);
      train::load_training_state<float>(run.checkpoint_path(), *model, nullptr);
      report = confusion_report(parallel_evaluate(*model, scenes, o.workers));
    }
    report["split"] = o.split;
  }
  print_report(report, out);
  if (!o.out.empty()) write_json_file(o.out, report);
  return kExitOk;
}

}  // namespace pvkit::cli
