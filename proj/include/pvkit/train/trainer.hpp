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
#include <functional>
#include <string>
#include <vector>

#include "pvkit/autodiff/optimizer.hpp"
#include "pvkit/pointcloud/point_cloud.hpp"
#include "pvkit/pvconv/segmentation_model.hpp"
#include "pvkit/train/metrics.hpp"

namespace pvkit::train {

// Every *.pvpc file of a directory in name order, normalized on load.
std::vector<cloud::PointCloud> load_scenes(const std::string& dir);

struct TrainConfig {
  int epochs = 1;
  ad::OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double train_miou = 0.0;
  double val_miou = 0.0;
};

// Scene order for an epoch: a seeded permutation, or identity.
std::vector<std::size_t> epoch_order(std::size_t scenes, std::uint64_t seed, int epoch, bool shuffle);

// One optimizer step per scene; returns the mean loss. Non-finite losses
// raise TrainingError.
template <typename T>
double train_epoch(pv::SegmentationModel<T>& model, ad::Optimizer<T>& optimizer,
                   const std::vector<cloud::PointCloud>& scenes, const std::vector<std::size_t>& order);

// Eval-mode predictions accumulated into one confusion matrix.
template <typename T>
ConfusionMatrix evaluate(pv::SegmentationModel<T>& model, const std::vector<cloud::PointCloud>& scenes);

// Runs epochs [first_epoch, config.epochs) and reports each through
// `on_epoch`.
template <typename T>
std::vector<EpochMetrics> fit(pv::SegmentationModel<T>& model, ad::Optimizer<T>& optimizer,
                              const std::vector<cloud::PointCloud>& train_scenes,
                              const std::vector<cloud::PointCloud>& val_scenes, const TrainConfig& config,
                              int first_epoch = 0,
                              const std::function<void(const EpochMetrics&)>& on_epoch = nullptr);

// Model parameters, buffers, optimizer moments and the next epoch index.
template <typename T>
void save_training_state(const std::string& path, pv::SegmentationModel<T>& model,
                         const ad::Optimizer<T>& optimizer, int next_epoch);
template <typename T>
int load_training_state(const std::string& path, pv::SegmentationModel<T>& model, ad::Optimizer<T>* optimizer);

}  // namespace pvkit::train
