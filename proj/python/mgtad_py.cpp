#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "mgtad/augment.hpp"
#include "mgtad/data.hpp"
#include "mgtad/diagnose.hpp"
#include "mgtad/errors.hpp"
#include "mgtad/eval.hpp"
#include "mgtad/infer.hpp"
#include "mgtad/model.hpp"
#include "mgtad/train.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// Python objects cross the boundary as JSON text; the payloads are small.
json to_json_value(const py::object& obj) {
  if (obj.is_none()) return json::object();
  const auto dumps = py::module_::import("json").attr("dumps");
  return json::parse(py::cast<std::string>(dumps(obj)));
}

py::object from_json_value(const json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

mgtad::Grid to_grid(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("features must be a 2-D [C, T] array");
  mgtad::Grid g({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))});
  std::copy(a.data(), a.data() + a.size(), g.values().begin());
  return g;
}

Array to_array(const mgtad::Grid& g) {
  Array a({g.rows(), g.cols()});
  std::copy(g.values().begin(), g.values().end(), a.mutable_data());
  return a;
}

std::vector<mgtad::VideoAnnotation> annotations(const py::object& obj) {
  return to_json_value(obj).get<std::vector<mgtad::VideoAnnotation>>();
}

mgtad::DetectionSet predictions(const py::dict& d) {
  mgtad::DetectionSet out;
  for (const auto& [id, dets] : d) {
    out[py::cast<std::string>(id)] =
        to_json_value(py::reinterpret_borrow<py::object>(dets)).get<std::vector<mgtad::Detection>>();
  }
  return out;
}

py::dict detections_dict(const mgtad::DetectionSet& set) {
  py::dict out;
  for (const auto& [id, dets] : set) out[py::str(id)] = from_json_value(json(dets));
  return out;
}

class PyModel {
 public:
  PyModel(const py::object& config, std::uint64_t seed)
      : model_(to_json_value(config).get<mgtad::ModelConfig>()) {
    model_.init(seed);
  }
  explicit PyModel(mgtad::Model m) : model_(std::move(m)) {}

  py::list fit(const py::list& videos, const py::object& train_config) {
    const auto cfg = to_json_value(train_config).get<mgtad::TrainConfig>();
    std::vector<std::pair<mgtad::VideoAnnotation, mgtad::Grid>> data;
    for (const auto& item : videos) {
      const auto pair = py::cast<py::tuple>(item);
      data.emplace_back(to_json_value(pair[0]).get<mgtad::VideoAnnotation>(),
                        to_grid(py::cast<Array>(pair[1])));
    }
    const auto samples = mgtad::make_samples(data, model_, cfg);
    std::vector<mgtad::EpochStats> stats;
    {
      py::gil_scoped_release release;
      stats = mgtad::fit(model_, samples, cfg);
    }
    py::list out;
    for (const auto& s : stats) {
      py::dict d;
      d["epoch"] = s.epoch;
      d["loss"] = s.loss;
      d["classification"] = s.classification;
      d["regression"] = s.regression;
      out.append(d);
    }
    return out;
  }

  py::object detect(const Array& features, const py::object& infer_config, double fps,
                    int stride, bool stream) const {
    const auto cfg = to_json_value(infer_config).get<mgtad::InferConfig>();
    const mgtad::Grid x = to_grid(features);
    std::vector<mgtad::Detection> dets;
    {
      py::gil_scoped_release release;
      if (stream) {
        mgtad::GridSource src(x);
        dets = mgtad::detect_stream(src, model_, {fps, stride}, cfg);
      } else {
        dets = mgtad::detect_offline(model_, x, {fps, stride}, cfg);
      }
    }
    return from_json_value(json(dets));
  }

  void save(const std::string& path) const { mgtad::save_model(model_, path); }
  std::size_t parameter_count() const { return model_.parameter_count(); }
  py::object config() const { return from_json_value(json(model_.config())); }

 private:
  mgtad::Model model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Micro-gesture temporal action detection core";

  py::register_exception<mgtad::FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("tiou", [](std::pair<double, double> a, std::pair<double, double> b) {
    return mgtad::tiou({a.first, a.second}, {b.first, b.second});
  });
  m.def("prf1", [](std::size_t matched, std::size_t n_preds, std::size_t n_gts) {
    const auto r = mgtad::prf1(matched, n_preds, n_gts);
    py::dict d;
    d["precision"] = r.precision;
    d["recall"] = r.recall;
    d["f1"] = r.f1;
    d["precision_defined"] = r.precision_defined;
    d["recall_defined"] = r.recall_defined;
    return d;
  });
  m.def("replication_factor", &mgtad::replication_factor, py::arg("alpha"), py::arg("count"));

  m.def(
      "augment",
      [](const py::object& videos, std::size_t num_classes, std::uint64_t alpha) {
        mgtad::AugmentConfig cfg;
        cfg.alpha = alpha;
        const auto res = mgtad::augment_annotations(annotations(videos), num_classes, cfg);
        return py::make_tuple(from_json_value(json(res.annotations)), from_json_value(json(res.plan)));
      },
      py::arg("videos"), py::arg("num_classes"), py::arg("alpha") = 100);

  m.def(
      "synth",
      [](const py::object& spec, std::uint64_t seed) {
        const auto ds = mgtad::synth_generate(to_json_value(spec).get<mgtad::SynthSpec>(), seed);
        py::list videos;
        for (const auto& v : ds.videos) {
          videos.append(py::make_tuple(from_json_value(json(v.annotation)), to_array(v.features)));
        }
        return py::make_tuple(videos, to_array(ds.signatures));
      },
      py::arg("spec") = py::none(), py::arg("seed") = 0);

  m.def(
      "evaluate",
      [](const py::dict& preds, const py::object& gts, double tiou) {
        return from_json_value(mgtad::report_json(mgtad::evaluate(predictions(preds), annotations(gts), tiou)));
      },
      py::arg("preds"), py::arg("gts"), py::arg("tiou") = 0.5);

  m.def(
      "diagnose",
      [](const py::dict& preds, const py::object& gts, double tiou) {
        return from_json_value(mgtad::report_json(mgtad::diagnose(predictions(preds), annotations(gts), tiou)));
      },
      py::arg("preds"), py::arg("gts"), py::arg("tiou") = 0.5);

  m.def("load_features", [](const std::string& path) { return to_array(mgtad::load_features(path)); });
  m.def("save_features", [](const Array& a, const std::string& path) {
    mgtad::save_features(to_grid(a), path);
  });
  m.def("load_annotations", [](const std::string& path) {
    return from_json_value(json(mgtad::load_annotations(path)));
  });
  m.def("save_annotations", [](const py::object& videos, const std::string& path) {
    mgtad::save_annotations(annotations(videos), path);
  });
  m.def("save_predictions", [](const py::dict& preds, const std::string& path) {
    mgtad::save_predictions(predictions(preds), path);
  });
  m.def("load_predictions", [](const std::string& path) {
    return detections_dict(mgtad::load_predictions(path));
  });

  py::class_<PyModel>(m, "Model")
      .def(py::init<const py::object&, std::uint64_t>(), py::arg("config") = py::none(),
           py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) { return PyModel(mgtad::load_model(path)); })
      .def("fit", &PyModel::fit, py::arg("videos"), py::arg("train_config") = py::none(),
           "Train on a list of (annotation dict, [C, T] array) pairs; returns per-epoch stats.")
      .def("detect", &PyModel::detect, py::arg("features"), py::arg("infer_config") = py::none(),
           py::arg("fps") = 28.0, py::arg("stride") = 4, py::arg("stream") = false)
      .def("save", &PyModel::save)
      .def_property_readonly("parameter_count", &PyModel::parameter_count)
      .def_property_readonly("config", &PyModel::config);
}
