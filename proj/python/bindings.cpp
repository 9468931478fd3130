#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mala/pipeline.hpp"

namespace py = pybind11;
using namespace mala;

namespace {

template <typename T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

LabelVolume to_labels(const Array<std::uint64_t>& a) {
  if (a.ndim() != 3) throw Error("label arrays must be 3-dimensional (Z, Y, X)");
  const Shape3 s{std::uint64_t(a.shape(0)), std::uint64_t(a.shape(1)), std::uint64_t(a.shape(2))};
  return LabelVolume(s, std::vector<Label>(a.data(), a.data() + a.size()));
}

AffinityVolume to_affinities(const Array<float>& a) {
  if (a.ndim() != 4 || a.shape(0) != 3) throw Error("affinity arrays must have shape (3, Z, Y, X)");
  const Shape3 s{std::uint64_t(a.shape(1)), std::uint64_t(a.shape(2)), std::uint64_t(a.shape(3))};
  AffinityVolume aff(s, std::vector<float>(a.data(), a.data() + a.size()));
  validate_affinities(aff);
  return aff;
}

template <typename T>
py::array_t<T> to_array(const Volume<T>& v) {
  py::array_t<T> out({v.shape.z, v.shape.y, v.shape.x});
  std::copy(v.data.begin(), v.data.end(), out.mutable_data());
  return out;
}

template <typename T>
py::array_t<T> to_array(const EdgeField<T>& v) {
  py::array_t<T> out({std::uint64_t(kAxes), v.shape.z, v.shape.y, v.shape.x});
  std::copy(v.data.begin(), v.data.end(), out.mutable_data());
  return out;
}

py::dict to_dict(const EvalReport& r) {
  py::dict d;
  d["voi_split"] = r.voi_split;
  d["voi_merge"] = r.voi_merge;
  d["voi_total"] = r.voi_total;
  d["arand"] = r.arand;
  d["cremi_score"] = r.cremi_score;
  return d;
}

using Record = std::tuple<Label, Label, double>;

MergeHistory to_history(const std::vector<Record>& records) {
  MergeHistory h;
  for (const auto& [s, a, score] : records) h.push_back({s, a, score});
  return h;
}

} // namespace

PYBIND11_MODULE(_core, m) {
  py::register_exception<Error>(m, "MalaError", PyExc_ValueError);

  m.def(
      "synth",
      [](std::vector<std::uint64_t> shape, std::uint64_t n_regions, double noise_sigma, double flip_prob,
         std::uint64_t seed) {
        if (shape.size() != 3) throw Error("shape must be (Z, Y, X)");
        SynthSpec spec{{shape[0], shape[1], shape[2]}, n_regions, noise_sigma, flip_prob, seed};
        spec.validate();
        const auto gt = voronoi_labels(spec);
        const auto aff = affinities_from_labels(gt, noise_sigma, flip_prob, seed);
        return py::make_tuple(to_array(gt), to_array(aff));
      },
      py::arg("shape"), py::arg("n_regions") = 8, py::arg("noise_sigma") = 0.0, py::arg("flip_prob") = 0.0,
      py::arg("seed") = 0, "Voronoi ground truth and its (noisy) affinities.");

  m.def(
      "extract_fragments",
      [](const Array<float>& aff, const std::string& mode) {
        return to_array(extract_fragments(to_affinities(aff), parse_watershed_mode(mode)));
      },
      py::arg("affinities"), py::arg("mode") = "3d");

  m.def(
      "agglomerate",
      [](const Array<std::uint64_t>& fragments, const Array<float>& aff, const std::string& merge_function,
         double threshold, std::uint32_t bins) {
        const auto rag = build_rag(to_labels(fragments), to_affinities(aff), bins);
        std::vector<Record> out;
        for (const auto& r : agglomerate(rag, MergeFunction::parse(merge_function), threshold))
          out.emplace_back(r.survivor, r.absorbed, r.score);
        return out;
      },
      py::arg("fragments"), py::arg("affinities"), py::arg("merge_function") = "quantile:0.5",
      py::arg("threshold") = 1.0, py::arg("bins") = kDefaultBins,
      "Merge history as a list of (survivor, absorbed, score).");

  m.def(
      "extract_segmentation",
      [](const Array<std::uint64_t>& fragments, const std::vector<Record>& history, double threshold) {
        return to_array(extract_segmentation(to_labels(fragments), to_history(history), threshold));
      },
      py::arg("fragments"), py::arg("history"), py::arg("threshold"));

  m.def(
      "evaluate",
      [](const Array<std::uint64_t>& seg, const Array<std::uint64_t>& gt) {
        return to_dict(evaluate(to_labels(seg), to_labels(gt)));
      },
      py::arg("segmentation"), py::arg("ground_truth"));

  m.def(
      "malis",
      [](const Array<float>& aff, const Array<std::uint64_t>& gt, const std::string& pass) {
        const auto a = to_affinities(aff);
        const auto g = to_labels(gt);
        const auto r = pass == "constrained" ? constrained_malis(a, g) : malis_pass(a, g, parse_malis_pass(pass));
        return py::make_tuple(r.loss, to_array(r.gradient));
      },
      py::arg("affinities"), py::arg("ground_truth"), py::arg("pass_") = "constrained",
      "(loss, gradient) for the constrained sum or a single pass.");

  m.def(
      "run_pipeline",
      [](const std::string& config_json) {
        PipelineConfig c;
        c.update_from_json(nlohmann::json::parse(config_json));
        return run_pipeline(c).report(c).dump();
      },
      py::arg("config_json"));
}
