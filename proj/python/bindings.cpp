#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stormcast/experiment.hpp"
#include "stormcast/sampling.hpp"

namespace py = pybind11;
using namespace stormcast;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

GridFrame to_frame(const FloatArray &a, std::int64_t timestamp) {
  if (a.ndim() != 2) throw Error(ErrorCode::InvalidArgument, "frames are 2-D arrays");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  return GridFrame(GridGeometry::index_space(w, h), "py", Timestamp{std::chrono::seconds{timestamp}},
                   std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const std::vector<float> &v, int h, int w) {
  FloatArray out({h, w});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

MatrixView to_view(const FloatArray &x) {
  if (x.ndim() != 2) throw Error(ErrorCode::InvalidArgument, "feature matrices are 2-D arrays");
  return MatrixView(x.data(), static_cast<std::size_t>(x.shape(0)), static_cast<std::size_t>(x.shape(1)));
}

std::span<const std::uint8_t> to_labels(const LabelArray &y) {
  return {y.data(), static_cast<std::size_t>(y.size())};
}

KernelSpec parse_kernel(const std::string &kind, int size) {
  if (kind == "max") return {KernelKind::Max, size, 0.0};
  if (kind == "min") return {KernelKind::Min, size, 0.0};
  if (kind == "avg") return {KernelKind::Avg, size, 0.0};
  if (kind == "gauss") return KernelSpec::gaussian(size);
  if (kind == "id") return {KernelKind::Identity, size, 0.0};
  throw Error(ErrorCode::BadKernel, "unknown kernel kind " + kind);
}

py::object to_python(const nlohmann::json &j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::object &o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

} // namespace

PYBIND11_MODULE(_stormcast, m) {
  m.doc() = "Lightning nowcasting from satellite frame extrapolation errors";

  static py::exception<Error> error_type(m, "StormcastError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error &e) {
      if (is_validation_error(e.code())) {
        PyErr_SetString(PyExc_ValueError, e.what());
      } else {
        py::set_error(error_type, e.what());
      }
    }
  });

  m.def("schema_names", [](const std::string &variant) {
    const auto v = parse_variant(variant);
    if (!v) throw Error(ErrorCode::BadConfig, "unknown schema " + variant);
    return build_schema(*v).names;
  }, py::arg("variant"));

  m.def("conv_filter", [](const FloatArray &frame, const std::string &kind, int size) {
    const auto f = conv_filter(to_frame(frame, 0), parse_kernel(kind, size));
    return to_array(f.values, f.height(), f.width());
  }, py::arg("frame"), py::arg("kind"), py::arg("size"));

  m.def("compute_flow", [](const FloatArray &prev, const FloatArray &next) {
    const auto f = compute_flow(to_frame(prev, 0), to_frame(next, 0));
    const int h = f.geometry.height, w = f.geometry.width;
    return py::make_tuple(to_array(f.u, h, w), to_array(f.v, h, w));
  }, py::arg("prev"), py::arg("next"), "Dense (u, v) displacement in tiles from prev to next.");

  m.def("extrapolation_error", [](const FloatArray &t30, const FloatArray &t15, const FloatArray &t0) {
    const std::int64_t base = 1527811200;
    const auto pred = predict_next(to_frame(t30, base), to_frame(t15, base + 900));
    const auto err = error_field(to_frame(t0, base + 1800), pred);
    return to_array(err.values, err.height(), err.width());
  }, py::arg("t30"), py::arg("t15"), py::arg("t0"),
     "Absolute error of extrapolating two frames 15 minutes apart against the observed next frame.");

  py::class_<Model>(m, "Model")
      .def_property_readonly("kind", [](const Model &md) { return std::string(model_kind_name(md.config.kind)); })
      .def_property_readonly("feature_names", [](const Model &md) { return md.feature_names; })
      .def("predict_proba", [](const Model &md, const FloatArray &x) {
        const auto p = predict_proba(md, to_view(x));
        return py::array_t<double>(static_cast<py::ssize_t>(p.size()), p.data());
      }, py::arg("x"))
      .def("gini_importance", [](const Model &md) { return gini_importance(md); })
      .def("save", [](const Model &md, const std::string &path) { save_model(md, path); }, py::arg("path"))
      .def("to_json", [](const Model &md) { return to_python(to_json(md)); });

  m.def("train", [](const FloatArray &x, const LabelArray &y, const std::string &kind, py::dict overrides,
                    std::uint64_t seed) {
    const auto k = parse_model_kind(kind);
    if (!k) throw Error(ErrorCode::BadConfig, "unknown model " + kind);
    auto j = to_json(TrainConfig::defaults(*k));
    const auto extra = from_python(overrides);
    for (const auto &[key, value] : extra.items()) j[key] = value;
    j["seed"] = seed;
    const TrainConfig config = train_config_from_json(j);
    const MatrixView view = to_view(x);
    FeatureSchema schema;
    for (std::size_t c = 0; c < view.cols; ++c) schema.names.push_back("f" + std::to_string(c));
    py::gil_scoped_release release;
    return train_model(view, to_labels(y), config, schema);
  }, py::arg("x"), py::arg("y"), py::arg("kind") = "rf", py::arg("config") = py::dict(), py::arg("seed") = 0);

  m.def("load_model", &load_model, py::arg("path"));

  m.def("gini", [](const std::vector<double> &p) { return gini(p); }, py::arg("p"));

  m.def("roc_auc", [](const std::vector<double> &scores, const LabelArray &y) {
    return roc_auc(scores, to_labels(y)).auc;
  }, py::arg("scores"), py::arg("labels"));

  m.def("metrics", [](std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
    return to_python(to_json(metrics(ConfusionMatrix{tp, fp, tn, fn})));
  }, py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));

  m.def("operational_projection", &operational_projection, py::arg("recall"), py::arg("fpr"),
        py::arg("positives"), py::arg("negatives"));
  m.def("required_fpr", &required_fpr, py::arg("target_precision"), py::arg("true_positives"),
        py::arg("negatives"));

  m.def("balance_per_image", [](const LabelArray &mask, std::uint64_t seed) {
    if (mask.ndim() != 2) throw Error(ErrorCode::InvalidArgument, "label masks are 2-D arrays");
    LabelFrame lf;
    lf.geometry = GridGeometry::index_space(static_cast<int>(mask.shape(1)), static_cast<int>(mask.shape(0)));
    lf.labels.assign(mask.data(), mask.data() + mask.size());
    const auto sel = balance_per_image(lf, seed);
    std::vector<std::pair<int, int>> tiles;
    for (const auto &t : sel.tiles) tiles.emplace_back(t.x, t.y);
    return tiles;
  }, py::arg("mask"), py::arg("seed"), "Balanced (x, y) tiles: every positive and as many negatives.");

  m.def("run_experiment", [](py::dict config) {
    const auto c = experiment_config_from_json(from_python(config));
    EvalReport report;
    {
      py::gil_scoped_release release;
      report = run_experiment(c);
    }
    return to_python(to_json(report));
  }, py::arg("config"), "Runs every stage into config['out'] and returns the report.");
}
