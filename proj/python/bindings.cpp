#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "dcpose/cli.hpp"
#include "dcpose/model.hpp"
#include "dcpose/ptm.hpp"
#include "dcpose/synth.hpp"
#include "dcpose/train.hpp"

namespace py = pybind11;
using namespace dcpose;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor4 to_tensor(const Array& a) {
  if (a.ndim() < 2 || a.ndim() > 4) throw py::value_error("expected a 2-, 3- or 4-d array");
  int dims[4] = {1, 1, 1, 1};
  for (py::ssize_t i = 0; i < a.ndim(); ++i) dims[4 - a.ndim() + i] = int(a.shape(i));
  Tensor4 t(dims[0], dims[1], dims[2], dims[3]);
  std::copy(a.data(), a.data() + a.size(), t.vec().begin());
  return t;
}

Array to_array(const Tensor4& t, bool drop_batch) {
  std::vector<py::ssize_t> shape{t.n(), t.c(), t.h(), t.w()};
  if (drop_batch) shape.erase(shape.begin());
  Array a(shape);
  std::copy(t.vec().begin(), t.vec().end(), a.mutable_data());
  return a;
}

HeatmapStack to_stack(const Array& a) {
  if (a.ndim() != 3) throw py::value_error("heatmaps must be (joints, height, width)");
  return HeatmapStack(to_tensor(a));
}

// Poses as (joints, 3) arrays of x, y, visible.
Pose to_pose(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw py::value_error("pose must be (joints, 3): x, y, visible");
  Pose p;
  for (py::ssize_t j = 0; j < a.shape(0); ++j) p.joints.push_back({a.at(j, 0), a.at(j, 1), a.at(j, 2) != 0.0});
  return p;
}

Array from_pose(const Pose& p) {
  Array a({py::ssize_t(p.size()), py::ssize_t(3)});
  auto m = a.mutable_unchecked<2>();
  for (int j = 0; j < p.size(); ++j) {
    m(j, 0) = p[j].x;
    m(j, 1) = p[j].y;
    m(j, 2) = p[j].visible ? 1.0 : 0.0;
  }
  return a;
}

ClipTriplet to_clip(const Array& hp, const Array& hc, const Array& hn, int p, int c, int n) {
  ClipTriplet t;
  t.p = p;
  t.c = c;
  t.n = n;
  t.hp = to_stack(hp);
  t.hc = to_stack(hc);
  t.hn = to_stack(hn);
  return t;
}

py::object parse_json(const std::string& s) { return py::module_::import("json").attr("loads")(s); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Temporal pose heatmap refinement";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "encode_gaussian",
      [](const Array& pose, int h, int w, double sigma) {
        return to_array(encode_gaussian(to_pose(pose), h, w, sigma).tensor(), true);
      },
      py::arg("pose"), py::arg("height"), py::arg("width"), py::arg("sigma") = kDefaultSigma);
  m.def(
      "decode_argmax", [](const Array& heatmaps) { return from_pose(decode_argmax(to_stack(heatmaps))); },
      py::arg("heatmaps"));

  m.def(
      "temporal_weights",
      [](int p, int c, int n) {
        const auto w = temporal_weights(p, c, n);
        return py::make_tuple(w.prev, w.next);
      },
      py::arg("p"), py::arg("c"), py::arg("n"));

  m.def(
      "conv2d",
      [](const Array& x, const Array& weight, std::vector<double> bias, int dilation, int groups) {
        if (x.ndim() != 4 || weight.ndim() != 4) throw py::value_error("x and weight must be 4-d");
        ConvParams p{to_tensor(weight), std::move(bias), dilation, groups};
        return to_array(conv2d(to_tensor(x), p), false);
      },
      py::arg("x"), py::arg("weight"), py::arg("bias"), py::arg("dilation") = 1, py::arg("groups") = 1);

  py::class_<ModelState>(m, "Model")
      .def_static(
          "identity",
          [](int joints) {
            ModelConfig cfg;
            cfg.joints = joints;
            auto s = make_model_state(cfg);
            s.params = make_identity_params(cfg);
            return s;
          },
          py::arg("joints") = kDefaultJoints)
      .def_static(
          "load", [](const std::filesystem::path& p) { return load_checkpoint(p); }, py::arg("path"))
      .def("save", [](const ModelState& s, const std::filesystem::path& p) { save_checkpoint(p, s); }, py::arg("path"))
      .def_property_readonly("joints", [](const ModelState& s) { return s.params.config.joints; })
      .def_property_readonly("epoch", [](const ModelState& s) { return s.epoch; })
      .def_property_readonly("parameter_count", [](const ModelState& s) { return param_count(s.params); })
      .def(
          "refine",
          [](const ModelState& s, const Array& hp, const Array& hc, const Array& hn, int p, int c, int n) {
            return to_array(refine(s.params, to_clip(hp, hc, hn, p, c, n)).tensor(), true);
          },
          py::arg("hp"), py::arg("hc"), py::arg("hn"), py::arg("p") = 0, py::arg("c") = 1, py::arg("n") = 2);

  m.def(
      "generate",
      [](int frames, int joints, int height, int width, std::uint64_t seed, double occlusion_prob, double jitter_sigma) {
        SceneConfig cfg;
        cfg.frames = frames;
        cfg.joints = joints;
        cfg.h = height;
        cfg.w = width;
        cfg.seed = seed;
        cfg.occlusion_prob = occlusion_prob;
        cfg.jitter_sigma = jitter_sigma;
        const auto clip = generate(cfg);
        py::list poses, degraded, clean;
        for (int f = 0; f < clip.frames(); ++f) {
          poses.append(from_pose(clip.poses[0][std::size_t(f)]));
          degraded.append(to_array(clip.degraded[0][std::size_t(f)].tensor(), true));
          clean.append(to_array(clip.clean[0][std::size_t(f)].tensor(), true));
        }
        py::dict d;
        d["poses"] = poses;
        d["degraded"] = degraded;
        d["clean"] = clean;
        return d;
      },
      py::arg("frames") = 3, py::arg("joints") = kDefaultJoints, py::arg("height") = 24, py::arg("width") = 24,
      py::arg("seed") = 0, py::arg("occlusion_prob") = 0.0, py::arg("jitter_sigma") = 0.0);

  m.def(
      "read_dch1",
      [](const std::filesystem::path& p) {
        py::list out;
        for (const auto& f : read_dch1(p)) out.append(to_array(f.tensor(), true));
        return out;
      },
      py::arg("path"));
  m.def(
      "write_dch1",
      [](const std::filesystem::path& p, const std::vector<Array>& frames) {
        std::vector<HeatmapStack> s;
        for (const auto& f : frames) s.push_back(to_stack(f));
        write_dch1(p, s);
      },
      py::arg("path"), py::arg("frames"));

  m.def(
      "evaluate",
      [](const std::filesystem::path& manifest, const ModelState* model, const std::string& split,
         std::vector<double> thresholds) {
        const auto ds = load_dataset(manifest);
        EvalConfig cfg;
        cfg.split = split;
        cfg.thresholds = std::move(thresholds);
        EvalReport r;
        {
          py::gil_scoped_release release;
          r = model ? evaluate(*model, ds, cfg) : evaluate(identity_refiner(), ds, cfg);
        }
        return parse_json(to_json_line(r));
      },
      py::arg("manifest"), py::arg("model") = nullptr, py::arg("split") = "test",
      py::arg("thresholds") = std::vector<double>{0.2});

  m.def(
      "run",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a dcpose subcommand; returns (exit code, stdout, stderr).");
}
