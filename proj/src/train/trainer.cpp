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

#include "pvkit/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "pvkit/autodiff/checkpoint.hpp"
#include "pvkit/autodiff/ops.hpp"
#include "pvkit/common/errors.hpp"
#include "pvkit/common/random.hpp"
#include "pvkit/pointcloud/io.hpp"

namespace pvkit::train {

namespace fs = std::filesystem;

std::vector<cloud::PointCloud> load_scenes(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError(IoErrorKind::kOpen, "scene directory not found: " + dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pvpc") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  std::vector<cloud::PointCloud> scenes;
  for (const auto& f : files) {
    auto pc = cloud::load_point_cloud(f);
    scenes.push_back(pc.normalized() ? std::move(pc) : cloud::normalize(pc));
  }
  return scenes;
}

std::vector<std::size_t> epoch_order(std::size_t scenes, std::uint64_t seed, int epoch, bool shuffle) {
  std::vector<std::size_t> order(scenes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!shuffle) return order;
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1)]);
  }
  return order;
}

template <typename T>
double train_epoch(pv::SegmentationModel<T>& model, ad::Optimizer<T>& optimizer,
                   const std::vector<cloud::PointCloud>& scenes, const std::vector<std::size_t>& order) {
  auto params = model.parameters();
  double total = 0.0;
  for (auto idx : order) {
    const auto& pc = scenes.at(idx);
    if (!pc.has_labels()) throw TrainingError("training scene " + std::to_string(idx) + " has no labels");
    auto loss = ad::cross_entropy_per_point(model.forward(pc, ad::Mode::kTrain),
                                            std::span<const std::uint32_t>(*pc.labels()));
    const double value = loss.item();
    if (!std::isfinite(value)) throw TrainingError("non-finite loss on scene " + std::to_string(idx));
    ad::backward(loss);
    optimizer.step(params);
    total += value;
  }
  return order.empty() ? 0.0 : total / static_cast<double>(order.size());
}

template <typename T>
ConfusionMatrix evaluate(pv::SegmentationModel<T>& model, const std::vector<cloud::PointCloud>& scenes) {
  ConfusionMatrix cm(model.num_classes());
  for (const auto& pc : scenes) {
    if (!pc.has_labels()) throw ContractError("evaluation scenes need labels");
    const auto logits = model.forward(pc, ad::Mode::kEval);
    cm.add(argmax_rows<T>(logits.data(), model.num_classes()), *pc.labels());
  }
  return cm;
}

template <typename T>
std::vector<EpochMetrics> fit(pv::SegmentationModel<T>& model, ad::Optimizer<T>& optimizer,
                              const std::vector<cloud::PointCloud>& train_scenes,
                              const std::vector<cloud::PointCloud>& val_scenes, const TrainConfig& config,
                              int first_epoch, const std::function<void(const EpochMetrics&)>& on_epoch) {
  std::vector<EpochMetrics> history;
  for (int epoch = first_epoch; epoch < config.epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = train_epoch(model, optimizer, train_scenes,
                         epoch_order(train_scenes.size(), config.seed, epoch, config.shuffle));
    m.train_miou = evaluate(model, train_scenes).miou();
    m.val_miou = val_scenes.empty() ? 0.0 : evaluate(model, val_scenes).miou();
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

template <typename T>
void save_training_state(const std::string& path, pv::SegmentationModel<T>& model,
                         const ad::Optimizer<T>& optimizer, int next_epoch) {
  ad::Checkpoint ckpt;
  ad::store_state(ckpt, model.parameters(), model.buffers());
  for (const auto& [name, values] : optimizer.export_state()) {
    ckpt.put<T>("optim/" + name, {values.size()}, values);
  }
  ckpt.put_int("optim.steps", optimizer.steps());
  ckpt.put_int("epoch", next_epoch);
  ckpt.save(path);
}

template <typename T>
int load_training_state(const std::string& path, pv::SegmentationModel<T>& model, ad::Optimizer<T>* optimizer) {
  const auto ckpt = ad::Checkpoint::load(path);
  auto params = model.parameters();
  ad::restore_state(ckpt, params, model.buffers());
  if (optimizer) {
    std::map<std::string, std::vector<T>> state;
    for (const auto& e : ckpt.entries()) {
      if (e.name.rfind("optim/", 0) == 0) state[e.name.substr(6)] = ckpt.get<T>(e.name);
    }
    optimizer->import_state(state, ckpt.get_int("optim.steps"));
  }
  return static_cast<int>(ckpt.get_int("epoch"));
}

#define PVKIT_INSTANTIATE_TRAIN(T)                                                                              \
  template double train_epoch<T>(pv::SegmentationModel<T>&, ad::Optimizer<T>&,                                  \
                                 const std::vector<cloud::PointCloud>&, const std::vector<std::size_t>&);       \
  template ConfusionMatrix evaluate<T>(pv::SegmentationModel<T>&, const std::vector<cloud::PointCloud>&);       \
  template std::vector<EpochMetrics> fit<T>(pv::SegmentationModel<T>&, ad::Optimizer<T>&,                       \
                                            const std::vector<cloud::PointCloud>&,                              \
                                            const std::vector<cloud::PointCloud>&, const TrainConfig&, int,     \
                                            const std::function<void(const EpochMetrics&)>&);                   \
  template void save_training_state<T>(const std::string&, pv::SegmentationModel<T>&, const ad::Optimizer<T>&, \
                                       int);                                                                    \
  template int load_training_state<T>(const std::string&, pv::SegmentationModel<T>&, ad::Optimizer<T>*);

PVKIT_INSTANTIATE_TRAIN(float)
PVKIT_INSTANTIATE_TRAIN(double)

}  // namespace pvkit::train
