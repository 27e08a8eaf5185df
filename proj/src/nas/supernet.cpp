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

#include "pvkit/nas/supernet.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "pvkit/autodiff/ops.hpp"
#include "pvkit/common/errors.hpp"
#include "pvkit/train/trainer.hpp"

namespace pvkit::nas {

using ad::Mode;
using ad::Tensor;

void SupernetConfig::validate() const {
  if (in_channels == 0 || num_classes == 0) throw ConfigError("in_channels and num_classes must be positive");
  if (!(voxel_size > 0.0 && voxel_size <= 1.0)) {
    throw ConfigError("voxel_size must lie in (0, 1], got " + std::to_string(voxel_size));
  }
  if (space.num_stages() == 0) throw ConfigError("supernet needs a search space with at least one stage");
}

SupernetConfig supernet_config_from_json(const nlohmann::json& j) {
  SupernetConfig c;
  try {
    c.in_channels = j.value("in_channels", c.in_channels);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.voxel_size = j.value("voxel_size", c.voxel_size);
    c.slope = j.value("slope", c.slope);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("supernet config: ") + e.what());
  }
  c.space = search_space_from_json(j);
  c.validate();
  return c;
}

nlohmann::json to_json(const SupernetConfig& c) {
  nlohmann::json j = to_json(c.space);
  j["in_channels"] = c.in_channels;
  j["num_classes"] = c.num_classes;
  j["voxel_size"] = c.voxel_size;
  j["slope"] = c.slope;
  return j;
}

SupernetConfig default_supernet_config() {
  SupernetConfig c;
  c.space = SearchSpace({{2, SearchSpace::default_channels(16), 1},
                         {2, SearchSpace::default_channels(24), 2},
                         {2, SearchSpace::default_channels(32), 2}});
  return c;
}

SceneGeometry scene_geometry(const SupernetConfig& config, const cloud::PointCloud& pc) {
  if (!pc.normalized()) throw ContractError("supernet expects a normalized point cloud");
  SceneGeometry g;
  g.points = pc.size();
  g.assignment = sparse::assign_sparse(pc.coords(), config.voxel_size);
  std::vector<sparse::VoxelCoord> coords = g.assignment.coords;
  std::shared_ptr<const sparse::CoordHashTable> hash = g.assignment.hash;
  int stride = 1;
  for (const auto& st : config.space.stages()) {
    StageGeometry sg;
    sg.downsample = st.stride == 2;
    if (sg.downsample) {
      sg.first = sparse::build_kernel_map(coords, stride, 2, hash.get());
      stride *= 2;
      coords = sg.first.out_coords;
      hash = std::make_shared<sparse::CoordHashTable>(coords);
    }
    sg.same = sparse::build_kernel_map(coords, stride, 1, hash.get());
    g.stages.push_back(std::move(sg));
  }
  g.stencil = sparse::sparse_trilinear_stencil(pc.coords(), *hash, config.voxel_size, stride);
  return g;
}

SuperNet::SuperNet(SupernetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const auto& stages = config_.space.stages();
  slots_.resize(stages.size());
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const std::size_t out = stages[s].channels.back();
    for (int l = 0; l < stages[s].max_depth; ++l) {
      const std::size_t in = slot_in_channels(s, static_cast<std::size_t>(l));
      slots_[s].push_back({ad::he_uniform<float>({sparse::kKernelVolume, in, out}, in * 27, rng),
                           ad::BatchNorm<float>(out)});
    }
  }
  const std::size_t last = stages.back().channels.back();
  point_ = ad::Linear<float>(config_.in_channels, last, false, rng);
  point_norm_ = ad::BatchNorm<float>(last);
  head_ = ad::Linear<float>(last, config_.num_classes, true, rng);
}

std::size_t SuperNet::slot_in_channels(std::size_t stage, std::size_t layer) const {
  const auto& stages = config_.space.stages();
  if (layer > 0) return stages.at(stage).channels.back();
  return stage == 0 ? config_.in_channels : stages.at(stage - 1).channels.back();
}

namespace {

Tensor<float> sliced_bn(ad::BatchNorm<float>& bn, const Tensor<float>& x, std::size_t c, Mode mode,
                        ad::BatchNormOptions options) {
  return ad::batchnorm(x, ad::slice_prefix(bn.gamma(), {c}), ad::slice_prefix(bn.beta(), {c}),
                       std::span<float>(bn.running_mean()).first(c), std::span<float>(bn.running_var()).first(c),
                       mode, 1, options);
}

}  // namespace

Tensor<float> SuperNet::forward(const ArchSpec& arch, const cloud::PointCloud& pc, Mode mode, PhaseTimes* times) {
  SceneGeometry g;
  {
    ScopedPhase phase(times ? &times->voxelize_ns : nullptr);
    g = scene_geometry(config_, pc);
  }
  return forward(arch, pc, g, mode, times);
}

Tensor<float> SuperNet::forward(const ArchSpec& arch, const cloud::PointCloud& pc, const SceneGeometry& g,
                                Mode mode, PhaseTimes* times, ad::BatchNormOptions bn) {
  validate(config_.space, arch);
  if (pc.channels() != config_.in_channels) {
    throw DimensionError("supernet expects " + std::to_string(config_.in_channels) + " feature channels, got " +
                         std::to_string(pc.channels()));
  }
  if (g.points != pc.size() || g.stages.size() != slots_.size()) {
    throw ContractError("scene geometry does not belong to this cloud and supernet");
  }
  const auto slope = static_cast<float>(config_.slope);
  const Tensor<float> features = pv::feature_tensor<float>(pc);
  Tensor<float> x;
  {
    ScopedPhase phase(times ? &times->voxelize_ns : nullptr);
    x = sparse::sparse_voxelize(features, g.assignment);
  }
  std::size_t cin = config_.in_channels;
  {
    ScopedPhase phase(times ? &times->conv_ns : nullptr);
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      for (int l = 0; l < arch.depths[s]; ++l) {
        const std::size_t cout = arch.channels[s][static_cast<std::size_t>(l)];
        auto& slot = slots_[s][static_cast<std::size_t>(l)];
        const auto& map = l == 0 ? g.stages[s].first_map() : g.stages[s].same;
        x = sparse::sparse_conv(x, ad::slice_prefix(slot.weight, {sparse::kKernelVolume, cin, cout}), map);
        x = ad::leaky_relu(sliced_bn(slot.norm, x, cout, mode, bn), slope);
        cin = cout;
      }
    }
  }
  Tensor<float> voxel;
  {
    ScopedPhase phase(times ? &times->devoxelize_ns : nullptr);
    voxel = pv::gather_rows(x, g.stencil);
  }
  ScopedPhase phase(times ? &times->mlp_ns : nullptr);
  Tensor<float> point = ad::matmul(features, ad::slice_prefix(point_.weight(), {config_.in_channels, cin}));
  point = ad::leaky_relu(sliced_bn(point_norm_, point, cin, mode, bn), slope);
  const Tensor<float> h = ad::add(voxel, point);
  return ad::add_row_bias(ad::matmul(h, ad::slice_prefix(head_.weight(), {cin, config_.num_classes})), head_.bias());
}

void SuperNet::calibrate_bn(const ArchSpec& arch, std::span<const cloud::PointCloud> scenes) {
  for (std::size_t t = 0; t < scenes.size(); ++t) {
    ad::BatchNormOptions bn;
    bn.momentum = 1.0 / static_cast<double>(t + 1);
    forward(arch, scenes[t], scene_geometry(config_, scenes[t]), Mode::kTrain, nullptr, bn);
  }
}

std::vector<ad::NamedParameter<float>> SuperNet::parameters() const {
  std::vector<ad::NamedParameter<float>> out;
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    for (std::size_t l = 0; l < slots_[s].size(); ++l) {
      const std::string p = "stage" + std::to_string(s) + ".layer" + std::to_string(l);
      out.push_back({p + ".weight", slots_[s][l].weight});
      slots_[s][l].norm.collect(p + ".bn", out);
    }
  }
  point_.collect("point", out);
  point_norm_.collect("point.bn", out);
  head_.collect("head", out);
  return out;
}

std::vector<ad::NamedBuffer<float>> SuperNet::buffers() {
  std::vector<ad::NamedBuffer<float>> out;
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    for (std::size_t l = 0; l < slots_[s].size(); ++l) {
      slots_[s][l].norm.collect_buffers("stage" + std::to_string(s) + ".layer" + std::to_string(l) + ".bn", out);
    }
  }
  point_norm_.collect_buffers("point.bn", out);
  return out;
}

CandidateModel::CandidateModel(SuperNet& net, ArchSpec arch) : net_(&net), arch_(std::move(arch)) {
  validate(net.space(), arch_);
}

Tensor<float> CandidateModel::forward(const cloud::PointCloud& pc, Mode mode, PhaseTimes* times) {
  return net_->forward(arch_, pc, mode, times);
}

SupernetStep supernet_train_step(SuperNet& net, ad::Optimizer<float>& optimizer, const std::vector<ArchSpec>& archs,
                                 std::span<const cloud::PointCloud> scenes, std::span<const SceneGeometry> geometry) {
  if (archs.empty()) throw ContractError("supernet step needs at least one candidate");
  if (scenes.empty()) throw ContractError("supernet step needs at least one scene");
  std::vector<SceneGeometry> owned;
  if (geometry.empty()) {
    for (const auto& pc : scenes) owned.push_back(scene_geometry(net.config(), pc));
    geometry = owned;
  }
  if (geometry.size() != scenes.size()) throw ContractError("one scene geometry per scene is required");

  auto params = net.parameters();
  std::vector<std::vector<float>> grads(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) grads[i].assign(params[i].tensor.numel(), 0.0f);

  SupernetStep result;
  result.archs = archs;
  const float scene_scale = 1.0f / static_cast<float>(scenes.size());
  for (const auto& arch : archs) {
    for (auto& p : params) p.tensor.zero_grad();
    Tensor<float> loss;
    for (std::size_t k = 0; k < scenes.size(); ++k) {
      if (!scenes[k].has_labels()) throw ContractError("supernet training needs labelled scenes");
      const auto logits = net.forward(arch, scenes[k], geometry[k], Mode::kTrain);
      const auto l = ad::scale(ad::cross_entropy_per_point(logits, std::span<const std::uint32_t>(*scenes[k].labels())),
                               scene_scale);
      loss = loss.defined() ? ad::add(loss, l) : l;
    }
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw TrainingError("non-finite supernet loss for candidate " + to_string(arch));
    }
    ad::backward(loss);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].tensor.has_grad()) continue;
      const auto g = params[i].tensor.grad();
      for (std::size_t j = 0; j < g.size(); ++j) grads[i][j] += g[j];
    }
    result.losses.push_back(value);
    result.mean_loss += value;
  }
  const float inv = 1.0f / static_cast<float>(archs.size());
  for (auto& g : grads)
    for (auto& v : g) v *= inv;
  result.mean_loss /= static_cast<double>(archs.size());
  optimizer.step(params, grads);
  return result;
}

SupernetStep supernet_train_step(SuperNet& net, ad::Optimizer<float>& optimizer, int candidates,
                                 const std::vector<int>& floors, std::uint64_t seed,
                                 std::span<const cloud::PointCloud> scenes, std::span<const SceneGeometry> geometry) {
  if (candidates < 1) throw ConfigError("candidates per step must be at least 1");
  std::vector<ArchSpec> archs;
  for (int w = 0; w < candidates; ++w) {
    archs.push_back(sample_uniform(net.space(), floors, derive_seed(seed, static_cast<std::uint64_t>(w))));
  }
  return supernet_train_step(net, optimizer, archs, scenes, geometry);
}

std::vector<int> depth_floors_for_epoch(const SearchSpace& space, int epoch, int total_epochs, bool shrink) {
  if (!shrink) return full_depth_floors(space);
  int deepest = 1;
  for (const auto& st : space.stages()) deepest = std::max(deepest, st.max_depth);
  const auto schedule = depth_shrink_schedule(deepest, total_epochs);
  if (epoch < 0 || epoch >= total_epochs) throw ContractError("epoch outside the schedule");
  const int k = deepest - schedule[static_cast<std::size_t>(epoch)] + 1;  // 1-based phase
  std::vector<int> floors;
  for (const auto& st : space.stages()) floors.push_back(std::max(1, st.max_depth - k + 1));
  return floors;
}

std::vector<SupernetEpoch> train_supernet(SuperNet& net, ad::Optimizer<float>& optimizer,
                                          const std::vector<cloud::PointCloud>& scenes,
                                          const SupernetTrainConfig& config, int first_epoch,
                                          const std::function<void(const SupernetEpoch&)>& on_epoch) {
  if (scenes.empty()) throw ConfigError("supernet training needs at least one scene");
  if (config.depth_shrink) {
    int deepest = 1;
    for (const auto& st : net.space().stages()) deepest = std::max(deepest, st.max_depth);
    if (config.epochs < deepest) {
      throw ConfigError("depth shrinking needs at least " + std::to_string(deepest) + " epochs");
    }
  }
  std::vector<SceneGeometry> geometry;
  for (const auto& pc : scenes) geometry.push_back(scene_geometry(net.config(), pc));
  std::vector<SupernetEpoch> out;
  for (int epoch = first_epoch; epoch < config.epochs; ++epoch) {
    const auto floors = depth_floors_for_epoch(net.space(), epoch, config.epochs, config.depth_shrink);
    const auto order = train::epoch_order(scenes.size(), config.seed, epoch, true);
    SupernetEpoch m;
    m.epoch = epoch;
    m.depth_floor = *std::max_element(floors.begin(), floors.end());
    for (std::size_t step = 0; step < order.size(); ++step) {
      const std::size_t k = order[step];
      const auto seed = derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1), step);
      const auto r = supernet_train_step(net, optimizer, config.candidates, floors, seed,
                                         std::span<const cloud::PointCloud>(&scenes[k], 1),
                                         std::span<const SceneGeometry>(&geometry[k], 1));
      m.loss += r.mean_loss;
    }
    m.loss /= static_cast<double>(order.size());
    out.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return out;
}

MacsEstimator::MacsEstimator(const SupernetConfig& config, std::span<const cloud::PointCloud> scenes)
    : config_(config) {
  config_.validate();
  if (scenes.empty()) throw ContractError("MAC estimation needs at least one sample scene");
  first_pairs_.assign(config_.space.num_stages(), 0.0);
  same_pairs_.assign(config_.space.num_stages(), 0.0);
  for (const auto& pc : scenes) {
    const auto g = scene_geometry(config_, pc);
    for (std::size_t s = 0; s < g.stages.size(); ++s) {
      first_pairs_[s] += static_cast<double>(g.stages[s].first_map().total_pairs());
      same_pairs_[s] += static_cast<double>(g.stages[s].same.total_pairs());
    }
    mean_points_ += static_cast<double>(pc.size());
  }
  const double n = static_cast<double>(scenes.size());
  for (auto& v : first_pairs_) v /= n;
  for (auto& v : same_pairs_) v /= n;
  mean_points_ /= n;
}

double MacsEstimator::estimate(const ArchSpec& arch) const {
  validate(config_.space, arch);
  double macs = 0.0;
  double cin = static_cast<double>(config_.in_channels);
  for (std::size_t s = 0; s < arch.depths.size(); ++s) {
    for (int l = 0; l < arch.depths[s]; ++l) {
      const double cout = static_cast<double>(arch.channels[s][static_cast<std::size_t>(l)]);
      macs += (l == 0 ? first_pairs_[s] : same_pairs_[s]) * cin * cout;
      cin = cout;
    }
  }
  macs += mean_points_ * (static_cast<double>(config_.in_channels) * cin + cin * static_cast<double>(config_.num_classes));
  return macs;
}

double candidate_miou(SuperNet& net, const ArchSpec& arch, std::span<const cloud::PointCloud> calibration,
                      const std::vector<cloud::PointCloud>& validation) {
  net.calibrate_bn(arch, calibration);
  CandidateModel model(net, arch);
  return train::evaluate<float>(model, validation).miou();
}

}  // namespace pvkit::nas
