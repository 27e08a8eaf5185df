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

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "pvkit/autodiff/ops.hpp"
#include "pvkit/cli/cli.hpp"
#include "pvkit/cli/commands.hpp"
#include "pvkit/common/counters.hpp"
#include "pvkit/common/errors.hpp"
#include "pvkit/nas/evolution.hpp"
#include "pvkit/nas/latency.hpp"
#include "pvkit/nas/search_space.hpp"
#include "pvkit/pointcloud/io.hpp"
#include "pvkit/pointcloud/synthetic.hpp"
#include "pvkit/pvconv/voxel_ops.hpp"
#include "pvkit/spvconv/sparse_ops.hpp"
#include "pvkit/train/trainer.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

using pvkit::cloud::Point3;
using pvkit::cloud::PointCloud;
using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;
using UIntArray = py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>;

nlohmann::json to_cpp(const py::handle& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

template <typename T>
py::array_t<T> array(std::vector<std::size_t> shape, const T* data) {
  py::array_t<T> out(shape);
  std::copy_n(data, out.size(), out.mutable_data());
  return out;
}

std::vector<Point3> points_from(const FloatArray& coords) {
  if (coords.ndim() != 2 || coords.shape(1) != 3) throw pvkit::DimensionError("coords must have shape (N, 3)");
  std::vector<Point3> pts(static_cast<std::size_t>(coords.shape(0)));
  std::copy_n(coords.data(), coords.size(), pts.empty() ? nullptr : pts[0].data());
  return pts;
}

pvkit::ad::Tensor<float> tensor_from(const FloatArray& a) {
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  return pvkit::ad::Tensor<float>(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

py::array_t<float> array_from(const pvkit::ad::Tensor<float>& t) {
  return array<float>(std::vector<std::size_t>(t.shape().begin(), t.shape().end()), t.data().data());
}

PointCloud make_cloud(const FloatArray& coords, const FloatArray& features, std::optional<UIntArray> labels,
                      bool normalized) {
  if (features.ndim() != 2) throw pvkit::DimensionError("features must have shape (N, C)");
  std::optional<std::vector<std::uint32_t>> lab;
  if (labels) lab.emplace(labels->data(), labels->data() + labels->size());
  return PointCloud(points_from(coords), std::vector<float>(features.data(), features.data() + features.size()),
                    static_cast<std::size_t>(features.shape(1)), std::move(lab),
                    normalized ? pvkit::cloud::CoordSpace::kNormalized : pvkit::cloud::CoordSpace::kRaw);
}

py::array_t<std::int32_t> coords_array(const std::vector<pvkit::sparse::VoxelCoord>& c) {
  py::array_t<std::int32_t> out({c.size(), std::size_t{4}});
  if (!c.empty()) std::copy_n(c[0].data(), c.size() * 4, out.mutable_data());
  return out;
}

std::vector<pvkit::sparse::VoxelCoord> coords_from(const IntArray& a) {
  if (a.ndim() != 2 || a.shape(1) != 4) throw pvkit::DimensionError("voxel coords must have shape (M, 4)");
  std::vector<pvkit::sparse::VoxelCoord> c(static_cast<std::size_t>(a.shape(0)));
  if (!c.empty()) std::copy_n(a.data(), a.size(), c[0].data());
  return c;
}

class Model {
 public:
  Model(const std::string& kind, const py::object& config, std::uint64_t seed)
      : kind_(kind),
        config_(config.is_none() ? pvkit::cli::default_model_config(kind) : to_cpp(config)),
        model_(pvkit::cli::make_model(kind, config_, seed)) {}

  py::array_t<float> forward(const PointCloud& pc) {
    const auto logits = model_->forward(normalized(pc), pvkit::ad::Mode::kEval);
    return array_from(logits);
  }

  py::array_t<std::uint32_t> predict(const PointCloud& pc) {
    const auto logits = model_->forward(normalized(pc), pvkit::ad::Mode::kEval);
    const auto labels = pvkit::train::argmax_rows<float>(logits.data(), model_->num_classes());
    return array<std::uint32_t>({labels.size()}, labels.data());
  }

  std::vector<double> fit(const std::vector<PointCloud>& train, const std::vector<PointCloud>& val, int epochs,
                          double lr, std::uint64_t seed) {
    pvkit::train::TrainConfig tc;
    tc.epochs = epochs;
    tc.optimizer.lr = lr;
    tc.seed = seed;
    if (!optimizer_) optimizer_ = std::make_unique<pvkit::ad::Optimizer<float>>(tc.optimizer);
    std::vector<double> losses;
    for (const auto& m : pvkit::train::fit<float>(*model_, *optimizer_, prepared(train), prepared(val), tc, epochs_)) {
      losses.push_back(m.loss);
    }
    epochs_ += epochs;
    return losses;
  }

  py::object evaluate(const std::vector<PointCloud>& scenes) {
    return to_py(pvkit::cli::confusion_report(pvkit::train::evaluate<float>(*model_, prepared(scenes))));
  }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto& p : model_->parameters()) n += p.tensor.numel();
    return n;
  }

  void load_checkpoint(const std::string& path) { epochs_ = pvkit::train::load_training_state<float>(path, *model_, nullptr); }

  const std::string& kind() const { return kind_; }
  py::object config() const { return to_py(config_); }
  std::size_t num_classes() const { return model_->num_classes(); }

 private:
  static PointCloud normalized(const PointCloud& pc) { return pc.normalized() ? pc : pvkit::cloud::normalize(pc); }
  static std::vector<PointCloud> prepared(const std::vector<PointCloud>& v) {
    std::vector<PointCloud> out;
    for (const auto& pc : v) out.push_back(normalized(pc));
    return out;
  }

  std::string kind_;
  nlohmann::json config_;
  std::unique_ptr<pvkit::pv::SegmentationModel<float>> model_;
  std::unique_ptr<pvkit::ad::Optimizer<float>> optimizer_;
  int epochs_ = 0;
};

}  // namespace

PYBIND11_MODULE(_pvkit, m) {
  m.doc() = "Point-voxel and sparse point-voxel convolutions, 3D architecture search and benchmarks";

  static py::exception<pvkit::Error> base(m, "PvkitError", PyExc_RuntimeError);
  py::register_exception<pvkit::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<pvkit::ContractError>(m, "ContractError", base.ptr());
  py::register_exception<pvkit::DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<pvkit::InfeasibleError>(m, "InfeasibleError", base.ptr());
  py::register_exception<pvkit::IoError>(m, "IoError", base.ptr());
  py::register_exception<pvkit::ParseError>(m, "ParseError", base.ptr());
  py::register_exception<pvkit::TrainingError>(m, "TrainingError", base.ptr());

  // ------------------------------------------------------------ point clouds
  py::class_<PointCloud>(m, "PointCloud")
      .def(py::init(&make_cloud), "coords"_a, "features"_a, "labels"_a = py::none(), "normalized"_a = false)
      .def_property_readonly("coords", [](const PointCloud& pc) {
        return array<float>({pc.size(), std::size_t{3}}, pc.coords()[0].data());
      })
      .def_property_readonly("features", [](const PointCloud& pc) {
        return array<float>({pc.size(), pc.channels()}, pc.features().data());
      })
      .def_property_readonly("labels", [](const PointCloud& pc) -> py::object {
        if (!pc.has_labels()) return py::none();
        return array<std::uint32_t>({pc.size()}, pc.labels()->data());
      })
      .def_property_readonly("normalized", &PointCloud::normalized)
      .def_property_readonly("channels", &PointCloud::channels)
      .def("__len__", &PointCloud::size)
      .def("normalize", [](const PointCloud& pc) { return pvkit::cloud::normalize(pc); })
      .def("save", [](const PointCloud& pc, const std::string& path) { pvkit::cloud::save_point_cloud(path, pc); })
      .def_static("load", &pvkit::cloud::load_point_cloud, "path"_a);

  m.def(
      "generate_scene",
      [](std::uint64_t seed, int points_scale, std::optional<std::vector<std::string>> classes) {
        auto config = pvkit::cloud::default_scene_config(points_scale);
        if (classes) {
          std::vector<pvkit::cloud::PrimitiveSpec> kept;
          for (const auto& name : *classes) {
            const auto kind = pvkit::cloud::parse_primitive(name);
            if (!kind) throw pvkit::ConfigError("unknown class '" + name + "'");
            for (const auto& p : config.primitives)
              if (p.kind == *kind) kept.push_back(p);
          }
          config.primitives = kept;
        }
        return pvkit::cloud::generate_synthetic_scene(config, seed);
      },
      "seed"_a = 0, "points_scale"_a = 1, "classes"_a = py::none(),
      "Synthetic outdoor scene (raw coordinates) labelled plane/sphere/box/pole.");
  m.def("generate_scene_with_points", &pvkit::cloud::generate_scene_with_points, "points"_a, "seed"_a = 0);
  m.def("class_names", [] {
    std::vector<std::string> names;
    for (std::uint32_t k = 0; k < pvkit::cloud::kNumPrimitiveKinds; ++k)
      names.emplace_back(pvkit::cloud::primitive_name(static_cast<pvkit::cloud::PrimitiveKind>(k)));
    return names;
  });
  m.def(
      "count_distinguishable",
      [](const PointCloud& pc, int r) {
        const auto c = pvkit::cloud::count_distinguishable(pc, r);
        return py::make_tuple(c.count, c.fraction);
      },
      "cloud"_a, "resolution"_a, "(count, fraction) of points alone in their voxel at resolution r.");

  // ----------------------------------------------------------- dense voxels
  m.def(
      "voxelize",
      [](const PointCloud& pc, int r) {
        const auto g = pvkit::pv::voxelize(pc, r);
        const auto ru = static_cast<std::size_t>(r);
        return py::make_tuple(array<float>({g.channels, ru, ru, ru}, g.features.data()),
                              array<std::uint32_t>({ru, ru, ru}, g.counts.data()));
      },
      "cloud"_a, "resolution"_a, "Average-pools point features into an r^3 grid: (features[C,r,r,r], counts).");
  m.def(
      "devoxelize",
      [](const FloatArray& grid, const FloatArray& coords, const std::string& mode) {
        if (grid.ndim() != 4) throw pvkit::DimensionError("grid must have shape (C, r, r, r)");
        const auto pts = points_from(coords);
        const auto t = tensor_from(grid);
        if (mode == "trilinear") return array_from(pvkit::pv::devoxelize_trilinear(t, pts));
        if (mode == "nearest") return array_from(pvkit::pv::devoxelize_nearest(t, pts));
        throw pvkit::ConfigError("mode must be 'trilinear' or 'nearest'");
      },
      "grid"_a, "coords"_a, "mode"_a = "trilinear");
  m.def(
      "conv3d",
      [](const FloatArray& input, const FloatArray& weight, int stride) {
        return array_from(pvkit::ad::conv3d_dense(tensor_from(input), tensor_from(weight), stride));
      },
      "input"_a, "weight"_a, "stride"_a = 1, "Dense 3D cross-correlation, input [C,D,H,W], weight [O,C,k,k,k].");

  // ---------------------------------------------------------- sparse voxels
  m.def(
      "sparse_voxelize",
      [](const PointCloud& pc, double voxel_size, bool naive) {
        const auto v = naive ? pvkit::sparse::sparse_voxelize_naive(pc, voxel_size)
                             : pvkit::sparse::sparse_voxelize(pc, voxel_size);
        return py::dict("coords"_a = coords_array(v.tensor.coords()), "features"_a = array_from(v.tensor.features()),
                        "point_to_voxel"_a = array<std::uint32_t>({v.point_to_voxel.size()}, v.point_to_voxel.data()),
                        "probes"_a = v.probes);
      },
      "cloud"_a, "voxel_size"_a, "naive"_a = false,
      "Hash-indexed sparse voxelization; naive=True uses the linear-search reference.");
  m.def(
      "sparse_conv",
      [](const IntArray& coords, const FloatArray& features, const FloatArray& weight, int in_stride, int stride) {
        const auto c = coords_from(coords);
        const auto map = pvkit::sparse::build_kernel_map(c, in_stride, stride);
        const auto out = pvkit::sparse::sparse_conv(tensor_from(features), tensor_from(weight), map);
        return py::make_tuple(coords_array(map.out_coords), array_from(out));
      },
      "coords"_a, "features"_a, "weight"_a, "in_stride"_a = 1, "stride"_a = 1,
      "3x3x3 sparse convolution; weight [27, C_in, C_out]. Returns (out_coords, out_features).");

  // --------------------------------------------------------------- models
  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&, const py::object&, std::uint64_t>(), "kind"_a = "pvcnn",
           "config"_a = py::none(), "seed"_a = 0)
      .def("forward", &Model::forward, "cloud"_a, "Per-point logits [N, classes] (eval mode).")
      .def("predict", &Model::predict, "cloud"_a)
      .def("fit", &Model::fit, "train"_a, "val"_a = std::vector<PointCloud>{}, "epochs"_a = 1, "lr"_a = 1e-3,
           "seed"_a = 0, "Adam training; returns the mean loss of each epoch.")
      .def("evaluate", &Model::evaluate, "scenes"_a)
      .def("load_checkpoint", &Model::load_checkpoint, "path"_a)
      .def_property_readonly("num_parameters", &Model::num_parameters)
      .def_property_readonly("num_classes", &Model::num_classes)
      .def_property_readonly("kind", &Model::kind)
      .def_property_readonly("config", &Model::config);
  m.def("default_model_config", [](const std::string& kind) { return to_py(pvkit::cli::default_model_config(kind)); },
        "kind"_a = "pvcnn");

  m.def(
      "evaluate_labels",
      [](const UIntArray& predictions, const UIntArray& labels, std::size_t classes) {
        if (predictions.size() != labels.size()) throw pvkit::DimensionError("predictions and labels differ in length");
        pvkit::train::ConfusionMatrix cm(classes);
        cm.add(std::span<const std::uint32_t>(predictions.data(), static_cast<std::size_t>(predictions.size())),
               std::span<const std::uint32_t>(labels.data(), static_cast<std::size_t>(labels.size())));
        return to_py(pvkit::cli::confusion_report(cm));
      },
      "predictions"_a, "labels"_a, "classes"_a, "Per-class IoU and mIoU over a global confusion matrix.");

  // ------------------------------------------------------------------ NAS
  py::class_<pvkit::nas::SearchSpace>(m, "SearchSpace")
      .def(py::init([](const py::object& j) { return pvkit::nas::search_space_from_json(to_cpp(j)); }), "spec"_a)
      .def_property_readonly("size", &pvkit::nas::SearchSpace::size)
      .def_property_readonly("vector_length", &pvkit::nas::SearchSpace::vector_length)
      .def("to_dict", [](const pvkit::nas::SearchSpace& s) { return to_py(pvkit::nas::to_json(s)); })
      .def(
          "sample",
          [](const pvkit::nas::SearchSpace& s, std::uint64_t seed) {
            return to_py(pvkit::nas::to_json(pvkit::nas::sample_uniform(s, pvkit::nas::full_depth_floors(s), seed)));
          },
          "seed"_a = 0)
      .def(
          "encode",
          [](const pvkit::nas::SearchSpace& s, const py::object& arch) {
            return pvkit::nas::encode(s, pvkit::nas::arch_from_json(to_cpp(arch)));
          },
          "arch"_a)
      .def(
          "decode",
          [](const pvkit::nas::SearchSpace& s, const std::vector<double>& v) {
            return to_py(pvkit::nas::to_json(pvkit::nas::decode(s, v)));
          },
          "vector"_a)
      .def("is_valid", [](const pvkit::nas::SearchSpace& s, const py::object& arch) {
        return pvkit::nas::is_valid(s, pvkit::nas::arch_from_json(to_cpp(arch)));
      });

  m.def(
      "evolutionary_search",
      [](const pvkit::nas::SearchSpace& space, const std::function<double(py::object)>& fitness,
         std::optional<std::function<double(py::object)>> usage, double budget, int population, int parents,
         int generations, double mutation_prob, std::uint64_t seed) {
        pvkit::nas::EvolutionConfig c;
        c.population = population;
        c.parents = parents;
        c.generations = generations;
        c.mutation_prob = mutation_prob;
        c.seed = seed;
        std::optional<pvkit::nas::ResourceConstraint> constraint;
        if (usage) {
          constraint = pvkit::nas::ResourceConstraint{
              pvkit::nas::ResourceKind::kMacs, budget,
              [&](const pvkit::nas::ArchSpec& a) { return (*usage)(to_py(pvkit::nas::to_json(a))); }};
        }
        const auto r = pvkit::nas::evolutionary_search(
            space, [&](const pvkit::nas::ArchSpec& a) { return fitness(to_py(pvkit::nas::to_json(a))); }, constraint,
            c);
        py::list history;
        for (const auto& g : r.history) history.append(g.best_fitness);
        return py::dict("best"_a = to_py(pvkit::nas::to_json(r.best)), "fitness"_a = r.best_fitness,
                        "usage"_a = r.best_usage, "evaluations"_a = r.evaluations, "history"_a = history);
      },
      "space"_a, "fitness"_a, "usage"_a = py::none(), "budget"_a = 0.0, "population"_a = 32, "parents"_a = 8,
      "generations"_a = 20, "mutation_prob"_a = 0.1, "seed"_a = 0,
      "Maximizes fitness(arch) subject to usage(arch) <= budget when usage is given.");

  py::class_<pvkit::nas::LatencyPredictor>(m, "LatencyPredictor")
      .def_static(
          "fit",
          [](const std::vector<std::vector<double>>& vectors, const std::vector<double>& latencies, int epochs,
             std::vector<std::size_t> hidden, double lr, double holdout, std::uint64_t seed) {
            if (vectors.size() != latencies.size()) throw pvkit::DimensionError("vectors and latencies differ in length");
            std::vector<pvkit::nas::LatencySample> samples;
            for (std::size_t i = 0; i < vectors.size(); ++i) samples.push_back({vectors[i], latencies[i]});
            pvkit::nas::PredictorConfig c;
            c.epochs = epochs;
            c.hidden = std::move(hidden);
            c.lr = lr;
            c.holdout_fraction = holdout;
            c.seed = seed;
            pvkit::nas::PredictorReport rep;
            auto p = pvkit::nas::LatencyPredictor::fit(samples, c, &rep);
            return py::make_tuple(std::move(p), py::dict("train_mre"_a = rep.train_mre, "holdout_mre"_a = rep.holdout_mre,
                                                         "train_size"_a = rep.train_size,
                                                         "holdout_size"_a = rep.holdout_size,
                                                         "warnings"_a = rep.warnings));
          },
          "vectors"_a, "latencies_ms"_a, "epochs"_a = 3000, "hidden"_a = std::vector<std::size_t>{16, 16},
          "lr"_a = 3e-2, "holdout"_a = 0.2, "seed"_a = 0)
      .def("predict", [](const pvkit::nas::LatencyPredictor& p, const std::vector<double>& v) { return p.predict(v); })
      .def("save", &pvkit::nas::LatencyPredictor::save, "path"_a)
      .def_static("load", &pvkit::nas::LatencyPredictor::load, "path"_a)
      .def_property_readonly("input_length", &pvkit::nas::LatencyPredictor::input_length);
  m.def("load_latency_pairs", [](const std::string& path) {
    std::vector<std::vector<double>> vectors;
    std::vector<double> ms;
    for (const auto& s : pvkit::nas::load_latency_pairs(path)) {
      vectors.push_back(s.vector);
      ms.push_back(s.latency_ms);
    }
    return py::make_tuple(vectors, ms);
  });

  // -------------------------------------------------------------------- CLI
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = pvkit::cli::run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      "args"_a, "Runs a pvkit command in-process; returns (exit_code, stdout, stderr).");
}
