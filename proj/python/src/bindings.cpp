/*
 * Copyright 2026 The SPDrought Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstring>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spdrought/assess.hpp"
#include "spdrought/fusion.hpp"
#include "spdrought/interpret.hpp"
#include "spdrought/pipeline.hpp"
#include "spdrought/trainer.hpp"

namespace py = pybind11;
using namespace spdrought;

namespace {

// pixels x weeks x n copy of a flat float cube.
py::array_t<float> cube_array(const std::vector<float>& values, std::size_t pixels, int weeks, int n) {
  py::array_t<float> out({pixels, static_cast<std::size_t>(weeks), static_cast<std::size_t>(n)});
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

py::bytes to_bytes(const std::vector<std::byte>& b) {
  return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

std::vector<std::byte> from_bytes(const py::bytes& b) {
  const std::string s = b;
  std::vector<std::byte> out(s.size());
  std::memcpy(out.data(), s.data(), s.size());
  return out;
}

py::list coords(const std::vector<PixelCoord>& v) {
  py::list out;
  for (const auto& c : v) out.append(py::make_tuple(c.row, c.col));
  return out;
}

py::array_t<double> raster_array(const Raster& r) {
  py::array_t<double> out({r.rows, r.cols});
  std::copy(r.values.begin(), r.values.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spatiotemporal drought forecasting core";

  // Kept alive for the interpreter's lifetime; instances carry the error kind.
  static const py::handle error_type = py::exception<Error>(m, "SpDroughtError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type(e.what());
      exc.attr("kind") = std::string(error_kind_name(e.kind()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.attr("INDEX_NAMES") = py::make_tuple("sm", "esi", "sif");

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("rows", &SynthConfig::rows)
      .def_readwrite("cols", &SynthConfig::cols)
      .def_readwrite("years", &SynthConfig::years)
      .def_readwrite("weeks_per_year", &SynthConfig::weeks_per_year)
      .def_readwrite("ocean_fraction", &SynthConfig::ocean_fraction)
      .def_readwrite("drought_events", &SynthConfig::drought_events)
      .def_readwrite("nan_fraction", &SynthConfig::nan_fraction)
      .def_readwrite("categories", &SynthConfig::categories);

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("rows", [](const Dataset& d) { return d.spec.rows; })
      .def_property_readonly("cols", [](const Dataset& d) { return d.spec.cols; })
      .def_property_readonly("weeks", [](const Dataset& d) { return d.spec.weeks; })
      .def_property_readonly("land_mask",
                             [](const Dataset& d) {
                               py::array_t<bool> out({d.spec.rows, d.spec.cols});
                               std::copy(d.spec.land_mask.begin(), d.spec.land_mask.end(), out.mutable_data());
                               return out;
                             })
      .def_property_readonly("land_cover", [](const Dataset& d) { return d.statics.land_cover; })
      .def_property_readonly("dynamics",
                             [](const Dataset& d) {
                               return cube_array(d.dynamics.values, d.spec.land_mask.size(), d.spec.weeks,
                                                 kDynamicCount);
                             })
      .def_property_readonly("indices",
                             [](const Dataset& d) {
                               return cube_array(d.indices.values, d.spec.land_mask.size(), d.spec.weeks,
                                                 kIndexCount);
                             })
      .def("to_bytes", [](const Dataset& d) { return to_bytes(encode_dataset(d)); })
      .def_static("from_bytes", [](const py::bytes& b) { return decode_dataset(from_bytes(b)); })
      .def("save", [](const Dataset& d, const std::string& path) { save_dataset(path, d); })
      .def_static("load", &load_dataset)
      .def("bitwise_equal", [](const Dataset& a, const Dataset& b) { return bitwise_equal(a, b); });

  m.def("generate_synthetic",
        [](const SynthConfig& cfg, std::uint64_t seed) { return generate_synthetic(cfg, seed); },
        py::arg("cfg") = SynthConfig{}, py::arg("seed") = 0);

  py::class_<Window>(m, "Window")
      .def_readonly("context_start", &Window::context_start)
      .def_readonly("context_len", &Window::context_len)
      .def_readonly("horizon_len", &Window::horizon_len)
      .def_property_readonly("horizon_start", &Window::horizon_start)
      .def("__repr__", [](const Window& w) {
        return "Window(" + std::to_string(w.context_start) + ", " + std::to_string(w.context_len) + ", " +
               std::to_string(w.horizon_len) + ")";
      });
  m.def("enumerate_windows", &enumerate_windows, py::arg("weeks"), py::arg("context") = 100,
        py::arg("horizon") = 26, py::arg("stride") = 26);

  py::class_<SplitAssignment>(m, "SplitAssignment")
      .def_readonly("tile_count", &SplitAssignment::tile_count)
      .def_readonly("train_tiles", &SplitAssignment::train_tiles)
      .def_property_readonly("train_pixels", [](const SplitAssignment& s) { return coords(s.train_pixels); })
      .def_property_readonly("test_pixels", [](const SplitAssignment& s) { return coords(s.test_pixels); });
  m.def(
      "block_split",
      [](const Dataset& ds, int block, double train_frac, std::uint64_t seed) {
        return block_split(ds.spec, block, train_frac, seed);
      },
      py::arg("dataset"), py::arg("block") = 5, py::arg("train_frac") = 0.8, py::arg("seed") = 0);

  m.def(
      "spatial_attention",
      [](const Eigen::VectorXd& center, const Eigen::MatrixXd& members, const Eigen::VectorXd& distances,
         const Eigen::MatrixXd& w_query, const Eigen::MatrixXd& w_key) {
        return spatial_attention(center, members, distances, FusionParams{w_query, w_key});
      },
      py::arg("center"), py::arg("members"), py::arg("distances"), py::arg("w_query"), py::arg("w_key"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("context", &TrainConfig::context)
      .def_readwrite("horizon", &TrainConfig::horizon)
      .def_readwrite("stride", &TrainConfig::stride)
      .def_readwrite("block", &TrainConfig::block)
      .def_readwrite("train_frac", &TrainConfig::train_frac)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("task", &TrainConfig::task)
      .def_readwrite("radius", &TrainConfig::radius)
      .def_readwrite("model_dim", &TrainConfig::model_dim)
      .def_readwrite("ff_dim", &TrainConfig::ff_dim)
      .def_readwrite("heads", &TrainConfig::heads)
      .def_readwrite("encoder_layers", &TrainConfig::encoder_layers)
      .def_readwrite("decoder_layers", &TrainConfig::decoder_layers)
      .def_readwrite("dropout", &TrainConfig::dropout)
      .def_readwrite("threads", &TrainConfig::threads)
      .def_property(
          "variant", [](const TrainConfig& c) { return std::string(variant_name(c.variant)); },
          [](TrainConfig& c, const std::string& v) { c.variant = parse_variant(v); })
      .def_property(
          "float64", [](const TrainConfig& c) { return c.precision == Precision::kFloat64; },
          [](TrainConfig& c, bool on) { c.precision = on ? Precision::kFloat64 : Precision::kFloat32; })
      .def("__str__", &config_to_text);

  py::class_<PreparedData>(m, "PreparedData")
      .def_property_readonly("weeks", [](const PreparedData& d) { return d.spec.weeks; })
      .def_property_readonly("land_pixels", &PreparedData::land_indices);
  m.def("prepare_data", &prepare_data, py::arg("dataset"), py::arg("radius") = 2);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def("to_bytes", [](const Checkpoint& c) { return to_bytes(encode_checkpoint(c)); })
      .def_static("from_bytes", [](const py::bytes& b) { return decode_checkpoint(from_bytes(b)); })
      .def("save", [](const Checkpoint& c, const std::string& path) { save_checkpoint(path, c); })
      .def_static("load", &load_checkpoint)
      .def_property_readonly("config", [](const Checkpoint& c) { return read_config(c); });

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("checkpoint", &TrainResult::checkpoint)
      .def_readonly("epoch_loss", &TrainResult::epoch_loss);
  m.def("train", &train, py::arg("data"), py::arg("cfg"), py::call_guard<py::gil_scoped_release>());

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("mae", &EvalReport::mae)
      .def_readonly("total", &EvalReport::total)
      .def_readonly("count", &EvalReport::count)
      .def("__str__", [](const EvalReport& r) { return r.to_text(); });
  m.def(
      "evaluate", [](const Checkpoint& c, const PreparedData& d, int threads) { return evaluate(c, d, threads); },
      py::arg("checkpoint"), py::arg("data"), py::arg("threads") = 1, py::call_guard<py::gil_scoped_release>());

  py::class_<AttributionMap>(m, "AttributionMap")
      .def_readonly("values", &AttributionMap::values)
      .def_readonly("steps", &AttributionMap::steps);
  // Python callables run with the GIL held; IG over them is single-threaded.
  m.def(
      "integrated_gradients",
      [](LambdaFunction::Value f, LambdaFunction::Gradient grad, const Eigen::MatrixXd& x,
         const Eigen::MatrixXd& baseline, int steps) {
        return integrated_gradients(LambdaFunction(std::move(f), std::move(grad)), x, baseline, steps);
      },
      py::arg("f"), py::arg("grad"), py::arg("x"), py::arg("baseline"), py::arg("steps") = 128);
  m.def(
      "completeness_gap",
      [](const AttributionMap& map, LambdaFunction::Value f, const Eigen::MatrixXd& x,
         const Eigen::MatrixXd& baseline) {
        return completeness_gap(map, LambdaFunction(std::move(f), nullptr), x, baseline);
      },
      py::arg("map"), py::arg("f"), py::arg("x"), py::arg("baseline"));
  m.def(
      "lag_attribution",
      [](const Checkpoint& c, const PreparedData& d, int index, int week, int lag, int steps, int threads) {
        LagAttribution la;
        {
          py::gil_scoped_release release;
          la = lag_attribution_grid(c, d, index, week, lag, steps, threads);
        }
        py::dict out;
        for (std::size_t v = 0; v < la.names.size(); ++v) out[py::str(la.names[v])] = raster_array(la.rasters[v]);
        return out;
      },
      py::arg("checkpoint"), py::arg("data"), py::arg("index"), py::arg("week"), py::arg("lag") = 1,
      py::arg("steps") = 128, py::arg("threads") = 1);

  m.def(
      "weekly_percentile_threshold",
      [](const std::vector<double>& v, double p) { return weekly_percentile_threshold(v, p); }, py::arg("samples"),
      py::arg("p") = kDroughtPercentile);

  py::class_<ClassificationReport>(m, "ClassificationReport")
      .def_readonly("tp", &ClassificationReport::tp)
      .def_readonly("fp", &ClassificationReport::fp)
      .def_readonly("tn", &ClassificationReport::tn)
      .def_readonly("fn", &ClassificationReport::fn)
      .def_readonly("excluded", &ClassificationReport::excluded)
      .def_readonly("accuracy", &ClassificationReport::accuracy)
      .def_readonly("precision", &ClassificationReport::precision)
      .def_readonly("precision_undefined", &ClassificationReport::precision_undefined);
  // States as integers: 1 drought, 0 none, -1 undefined.
  m.def(
      "classification_metrics",
      [](const std::vector<int>& predicted, const std::vector<int>& observed) {
        auto convert = [](const std::vector<int>& v) {
          std::vector<DroughtState> out;
          out.reserve(v.size());
          for (const int s : v) {
            if (s < -1 || s > 1) throw Error(ErrorKind::kConfigError, "drought state must be -1, 0 or 1");
            out.push_back(static_cast<DroughtState>(s));
          }
          return out;
        };
        return classification_metrics(convert(predicted), convert(observed));
      },
      py::arg("predicted"), py::arg("observed"));
  m.def(
      "assess",
      [](const Checkpoint& c, const Dataset& raw, const PreparedData& d, double p, int threads) {
        py::gil_scoped_release release;
        return assess_soil_moisture(c, raw, d, p, threads).report;
      },
      py::arg("checkpoint"), py::arg("raw"), py::arg("data"), py::arg("p") = kDroughtPercentile,
      py::arg("threads") = 1);
}
