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

#include "pvkit/cli/cli.hpp"

#include <algorithm>
#include <iostream>

#include "CLI11.hpp"
#include "pvkit/cli/commands.hpp"
#include "pvkit/common/errors.hpp"

namespace pvkit::cli {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pvkit: point-voxel convolutions, sparse point-voxel convolutions and 3D architecture search"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pvkit 0.1.0");

  GenDataOptions gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic scene dataset with train/val/test splits");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--scenes", gen.scenes, "Number of scenes")->capture_default_str();
  g->add_option("--seed", gen.seed, "Base seed; scene i uses a seed derived from (seed, i)")->capture_default_str();
  g->add_option("--classes", gen.classes, "Primitive kinds to include (plane sphere box pole)")->delimiter(',');
  g->add_option("--split", gen.split, "train:val:test ratio")->capture_default_str();
  g->add_option("--points-scale", gen.points_scale, "Multiplier on points per primitive")->capture_default_str();
  g->add_flag("--force", gen.force, "Overwrite an existing non-empty directory");

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a segmentation model or a weight-sharing supernet");
  t->add_option("--data", tr.data, "Dataset directory written by gen-data");
  t->add_option("--run", tr.run, "Run directory")->required();
  t->add_option("--model", tr.model, "pvcnn | spvcnn | pointmlp")->capture_default_str();
  t->add_option("--model-config", tr.model_config, "Model JSON (see docs/config_schema.md)");
  t->add_flag("--supernet", tr.supernet, "Train a supernet with uniform sampling and depth shrinking");
  t->add_option("--space", tr.space, "Supernet JSON; default built-in space");
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--optimizer", tr.optimizer, "adam | sgd")->capture_default_str();
  t->add_option("--lr", tr.lr)->capture_default_str();
  t->add_option("--seed", tr.seed)->capture_default_str();
  t->add_option("--candidates", tr.candidates, "Sampled sub-networks per supernet step")->capture_default_str();
  t->add_flag("--depth-shrink,!--no-depth-shrink", tr.depth_shrink, "Progressive depth shrinking (supernet)");
  t->add_option("--max-scenes", tr.max_scenes, "Use only the first N training scenes (0: all)");
  t->add_flag("--resume", tr.resume, "Continue from the run's last checkpoint");
  t->add_flag("--force", tr.force, "Overwrite an existing non-empty run directory");
  t->add_option("--config", tr.config, "Rerun from a config.snapshot");
  t->add_option("--workers", tr.workers, "Worker threads")->capture_default_str();

  SearchOptions se;
  double macs = 0.0, latency = 0.0;
  auto* s = app.add_subcommand("search", "Evolutionary architecture search over a trained supernet");
  s->add_option("--supernet-run", se.supernet_run, "Run directory of a supernet training run");
  s->add_option("--out", se.out, "Output run directory")->required();
  auto* macs_opt = s->add_option("--macs", macs, "MACs budget in millions");
  auto* lat_opt = s->add_option("--latency", latency, "Latency budget in ms (needs --predictor)");
  macs_opt->excludes(lat_opt);
  s->add_option("--predictor", se.predictor, "Latency predictor JSON");
  s->add_option("--population", se.population)->capture_default_str();
  s->add_option("--parents", se.parents)->capture_default_str();
  s->add_option("--generations", se.generations)->capture_default_str();
  s->add_option("--mutation", se.mutation, "Per-gene mutation probability")->capture_default_str();
  s->add_option("--resample-budget", se.resample_budget)->capture_default_str();
  s->add_option("--seed", se.seed)->capture_default_str();
  s->add_option("--calib-scenes", se.calib_scenes, "Training scenes used for BN recalibration")->capture_default_str();
  s->add_option("--val-scenes", se.val_scenes, "Validation scenes used as fitness")->capture_default_str();
  s->add_flag("--force", se.force);
  s->add_option("--config", se.config, "Rerun from a config.snapshot");
  s->add_option("--workers", se.workers)->capture_default_str();

  CampaignOptions ca;
  auto* c = app.add_subcommand("latency-campaign", "Measure CPU latency of sampled sub-networks");
  c->add_option("--out", ca.out, "Pair file to write")->required();
  c->add_option("--supernet-run", ca.supernet_run, "Use a trained supernet's space and weights");
  c->add_option("--space", ca.space, "Supernet JSON for a freshly initialized supernet");
  c->add_option("--count", ca.count)->capture_default_str();
  c->add_option("--seed", ca.seed)->capture_default_str();
  c->add_option("--points", ca.points, "Points in the timing scene")->capture_default_str();
  c->add_option("--reps", ca.repetitions, "Timed repetitions per architecture and round")->capture_default_str();
  c->add_option("--rounds", ca.rounds, "Shuffled passes over all architectures; fastest run is kept")->capture_default_str();
  c->add_option("--warmup", ca.warmup)->capture_default_str();

  FitOptions fi;
  auto* f = app.add_subcommand("fit-predictor", "Fit an MLP latency predictor to measured pairs");
  f->add_option("--pairs", fi.pairs, "Pair file")->required();
  f->add_option("--out", fi.out, "Predictor JSON to write")->required();
  f->add_option("--epochs", fi.epochs)->capture_default_str();
  f->add_option("--hidden", fi.hidden, "Hidden widths")->delimiter(',');
  f->add_option("--lr", fi.lr)->capture_default_str();
  f->add_option("--holdout", fi.holdout, "Held-out fraction")->capture_default_str();
  f->add_option("--seed", fi.seed)->capture_default_str();

  BenchCliOptions be;
  auto* b = app.add_subcommand("bench", "Run efficiency benchmarks");
  b->add_option("which", be.which, "access | memory | crossover | hash | all")->capture_default_str();
  b->add_option("--out", be.out, "Directory for CSV, text and JSON reports");
  b->add_option("--reps", be.repetitions, "Timed repetitions (>= 5)")->capture_default_str();
  b->add_option("--warmup", be.warmup)->capture_default_str();
  b->add_option("--seed", be.seed)->capture_default_str();
  b->add_flag("--quick", be.quick, "Reduced sweeps");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Per-class IoU and mIoU of a trained run or of label files");
  e->add_option("--run", ev.run, "Training run directory");
  e->add_option("--data", ev.data, "Dataset directory (default: the run's)");
  e->add_option("--split", ev.split)->capture_default_str();
  e->add_option("--arch", ev.arch, "Architecture JSON for supernet runs (e.g. best_arch.json)");
  e->add_option("--predictions", ev.predictions, "Whitespace-separated predicted class ids");
  e->add_option("--labels", ev.labels, "Whitespace-separated ground-truth class ids");
  e->add_option("--classes", ev.classes)->capture_default_str();
  e->add_option("--out", ev.out, "Report JSON to write");
  e->add_option("--workers", ev.workers)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion& v) {
    out << v.what() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << '\n';
    const auto subs = app.get_subcommands();
    err << "run 'pvkit" << (subs.empty() ? "" : " " + subs.front()->get_name()) << " --help' for usage\n";
    return kExitConfig;
  }

  try {
    if (g->parsed()) return cmd_gen_data(gen, out);
    if (t->parsed()) return cmd_train(tr, out);
    if (s->parsed()) {
      if (*macs_opt) se.macs_millions = macs;
      if (*lat_opt) se.latency_ms = latency;
      return cmd_search(se, out);
    }
    if (c->parsed()) return cmd_latency_campaign(ca, out);
    if (f->parsed()) return cmd_fit_predictor(fi, out);
    if (b->parsed()) return cmd_bench(be, out);
    if (e->parsed()) return cmd_eval(ev, out);
  } catch (const InfeasibleError& ex) {
    err << "infeasible: " << ex.what() << '\n';
    return kExitInfeasible;
  } catch (const ParseError& ex) {
    err << "parse error: " << ex.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return kExitConfig;
  } catch (const IoError& ex) {
    err << "i/o error: " << ex.what() << '\n';
    return kExitIo;
  } catch (const TrainingError& ex) {
    err << "training error: " << ex.what() << '\n';
    return kExitTraining;
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace pvkit::cli
