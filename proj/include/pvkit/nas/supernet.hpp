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
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pvkit/autodiff/layers.hpp"
#include "pvkit/autodiff/optimizer.hpp"
#include "pvkit/nas/search_space.hpp"
#include "pvkit/pvconv/segmentation_model.hpp"
#include "pvkit/spvconv/sparse_ops.hpp"

namespace pvkit::nas {

struct SupernetConfig {
  SearchSpace space;
  std::size_t in_channels = 3;
  std::size_t num_classes = 4;
  double voxel_size = 1.0 / 16;
  double slope = 0.1;

  void validate() const;
};

SupernetConfig supernet_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SupernetConfig& config);
// Three stages (strides 1, 2, 2; max width 16, 24, 32; depth up to 2).
SupernetConfig default_supernet_config();

struct StageGeometry {
  bool downsample = false;
  sparse::KernelMap first;  // stride-2 map when downsampling, else unused
  sparse::KernelMap same;   // submanifold map at the stage's output stride
  const sparse::KernelMap& first_map() const { return downsample ? first : same; }
};

// Everything about a scene that does not depend on the candidate: voxel
// assignment, kernel maps per stage and the devoxelization stencil.
struct SceneGeometry {
  sparse::SparseAssignment assignment;
  std::vector<StageGeometry> stages;
  pv::Stencil stencil;
  std::size_t points = 0;
};

SceneGeometry scene_geometry(const SupernetConfig& config, const cloud::PointCloud& pc);

// Weight-sharing supernet over the sparse point-voxel space. Every layer
// slot stores weights at the stage's maximum width; a candidate uses the
// leading [27 x c_in x c_out] slice of each of its first d_s slots, so its
// gradients land in the shared store.
//
// Candidate layout: stacked sparse conv + BN + leaky ReLU per active slot,
// trilinear devoxelization from the last stage, plus a point branch
// (linear + BN + leaky ReLU to the last width) and a linear classifier.
class SuperNet {
 public:
  SuperNet(SupernetConfig config, std::uint64_t seed);

  const SupernetConfig& config() const { return config_; }
  const SearchSpace& space() const { return config_.space; }

  ad::Tensor<float> forward(const ArchSpec& arch, const cloud::PointCloud& pc, ad::Mode mode,
                            PhaseTimes* times = nullptr);
  ad::Tensor<float> forward(const ArchSpec& arch, const cloud::PointCloud& pc, const SceneGeometry& geometry,
                            ad::Mode mode, PhaseTimes* times = nullptr, ad::BatchNormOptions bn = {});

  // Re-estimates the running statistics of the candidate's BN slices as the
  // exact average of per-scene batch statistics.
  void calibrate_bn(const ArchSpec& arch, std::span<const cloud::PointCloud> scenes);

  std::vector<ad::NamedParameter<float>> parameters() const;
  std::vector<ad::NamedBuffer<float>> buffers();

  std::size_t slot_in_channels(std::size_t stage, std::size_t layer) const;
  ad::Tensor<float>& slot_weight(std::size_t stage, std::size_t layer) { return slots_.at(stage).at(layer).weight; }

 private:
  struct Slot {
    ad::Tensor<float> weight;  // [27 x in_max x out_max]
    ad::BatchNorm<float> norm;
  };

  SupernetConfig config_;
  std::vector<std::vector<Slot>> slots_;
  ad::Linear<float> point_;
  ad::BatchNorm<float> point_norm_;
  ad::Linear<float> head_;
};

// One candidate of a supernet behind the common model interface.
// Parameters and buffers are the whole shared store.
class CandidateModel : public pv::SegmentationModel<float> {
 public:
  CandidateModel(SuperNet& net, ArchSpec arch);

  ad::Tensor<float> forward(const cloud::PointCloud& pc, ad::Mode mode, PhaseTimes* times = nullptr) override;
  std::vector<ad::NamedParameter<float>> parameters() const override { return net_->parameters(); }
  std::vector<ad::NamedBuffer<float>> buffers() override { return net_->buffers(); }
  std::size_t in_channels() const override { return net_->config().in_channels; }
  std::size_t num_classes() const override { return net_->config().num_classes; }
  std::string kind() const override { return "supernet-candidate"; }

  const ArchSpec& arch() const { return arch_; }

 private:
  SuperNet* net_;
  ArchSpec arch_;
};

struct SupernetStep {
  std::vector<ArchSpec> archs;
  std::vector<double> losses;
  double mean_loss = 0.0;
};

// Forward/backward for each candidate over the scenes, then a single
// optimizer update with the gradients averaged over candidates. A
// non-finite loss raises TrainingError naming the candidate.
SupernetStep supernet_train_step(SuperNet& net, ad::Optimizer<float>& optimizer, const std::vector<ArchSpec>& archs,
                                 std::span<const cloud::PointCloud> scenes,
                                 std::span<const SceneGeometry> geometry = {});
// Candidates w = 0..W-1 sampled with derive_seed(seed, w).
SupernetStep supernet_train_step(SuperNet& net, ad::Optimizer<float>& optimizer, int candidates,
                                 const std::vector<int>& depth_floors, std::uint64_t seed,
                                 std::span<const cloud::PointCloud> scenes,
                                 std::span<const SceneGeometry> geometry = {});

struct SupernetTrainConfig {
  int epochs = 1;
  int candidates = 4;
  bool depth_shrink = true;
  std::uint64_t seed = 0;
  ad::OptimizerConfig optimizer;
};

struct SupernetEpoch {
  int epoch = 0;
  int depth_floor = 1;
  double loss = 0.0;
};

// One step per training scene per epoch. With depth shrinking every
// stage's floor follows depth_shrink_schedule of the largest stage depth,
// capped at each stage's own maximum.
std::vector<SupernetEpoch> train_supernet(SuperNet& net, ad::Optimizer<float>& optimizer,
                                          const std::vector<cloud::PointCloud>& scenes,
                                          const SupernetTrainConfig& config, int first_epoch = 0,
                                          const std::function<void(const SupernetEpoch&)>& on_epoch = nullptr);

std::vector<int> depth_floors_for_epoch(const SearchSpace& space, int epoch, int total_epochs, bool shrink);

// Analytic MACs of a candidate from per-stage kernel-map sizes averaged over
// sample scenes: sum over active layers of pairs * c_in * c_out, plus
// N * (C_in * c_last + c_last * K) for the point branch and classifier.
class MacsEstimator {
 public:
  MacsEstimator(const SupernetConfig& config, std::span<const cloud::PointCloud> scenes);

  double estimate(const ArchSpec& arch) const;
  double mean_points() const { return mean_points_; }
  double first_pairs(std::size_t stage) const { return first_pairs_.at(stage); }
  double same_pairs(std::size_t stage) const { return same_pairs_.at(stage); }

 private:
  SupernetConfig config_;
  std::vector<double> first_pairs_;
  std::vector<double> same_pairs_;
  double mean_points_ = 0.0;
};

// Accuracy proxy used as search fitness: BN statistics recalibrated on
// `calibration`, then mIoU over `validation`.
double candidate_miou(SuperNet& net, const ArchSpec& arch, std::span<const cloud::PointCloud> calibration,
                      const std::vector<cloud::PointCloud>& validation);

}  // namespace pvkit::nas
