#include "mala/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "mala/vgrid.hpp"

namespace mala {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

nlohmann::json to_json(const SynthSpec& spec) {
  return {{"shape", {spec.shape.z, spec.shape.y, spec.shape.x}},
          {"n_regions", spec.n_regions},
          {"noise_sigma", spec.noise_sigma},
          {"flip_prob", spec.flip_prob},
          {"seed", spec.seed}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  if (j.contains("shape")) {
    const auto dims = j.at("shape").get<std::vector<std::uint64_t>>();
    if (dims.size() != 3) throw Error("synth shape must be [Z,Y,X]");
    s.shape = {dims[0], dims[1], dims[2]};
  }
  s.n_regions = j.value("n_regions", s.n_regions);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.flip_prob = j.value("flip_prob", s.flip_prob);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"voi_split", r.voi_split},
          {"voi_merge", r.voi_merge},
          {"voi_total", r.voi_total},
          {"arand", r.arand},
          {"cremi_score", r.cremi_score}};
}

void PipelineConfig::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error("threshold must lie in [0,1]");
  if (bins == 0) throw Error("bins must be positive");
  if (oracle_limit == 0) throw Error("oracle limit must be positive");
  if (merge_function.kind == MergeFunction::Kind::quantile) MergeFunction::quantile(merge_function.q);
  if (affinities.empty() && !synth) throw Error("either an affinities input or a synth spec is required");
  if (!affinities.empty() && synth) throw Error("affinities input and synth spec are mutually exclusive");
  if (synth) synth->validate();
  for (const auto t : sweep)
    if (!(t >= 0.0 && t <= 1.0)) throw Error("sweep thresholds must lie in [0,1]");
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j = {{"mode", mode == WatershedMode::volume3d ? "3d" : "2d"},
                      {"merge_function", merge_function.str()},
                      {"threshold", threshold},
                      {"bins", bins},
                      {"oracle_limit", oracle_limit},
                      {"affinities", affinities},
                      {"ground_truth", ground_truth},
                      {"output_dir", output_dir},
                      {"sweep", sweep}};
  if (synth) j["synth"] = mala::to_json(*synth);
  return j;
}

void PipelineConfig::update_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("pipeline config must be a JSON object");
  static const std::unordered_set<std::string> known = {"mode", "merge_function", "threshold", "bins",
                                                        "oracle_limit", "affinities", "synth", "ground_truth",
                                                        "output_dir", "sweep"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw Error("unknown pipeline config key '" + key + "'");
  try {
    if (j.contains("mode")) mode = parse_watershed_mode(j["mode"].get<std::string>());
    if (j.contains("merge_function")) merge_function = MergeFunction::parse(j["merge_function"].get<std::string>());
    threshold = j.value("threshold", threshold);
    bins = j.value("bins", bins);
    oracle_limit = j.value("oracle_limit", oracle_limit);
    affinities = j.value("affinities", affinities);
    ground_truth = j.value("ground_truth", ground_truth);
    output_dir = j.value("output_dir", output_dir);
    if (j.contains("sweep")) sweep = j["sweep"].get<std::vector<double>>();
    if (j.contains("synth")) {
      if (j["synth"].is_null()) synth.reset();
      else synth = synth_spec_from_json(j["synth"]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad pipeline config: ") + e.what());
  }
}

std::uint64_t count_labels(const LabelVolume& vol) {
  std::unordered_set<Label> seen;
  for (const auto l : vol.data)
    if (l != 0) seen.insert(l);
  return seen.size();
}

nlohmann::json PipelineResult::report(const PipelineConfig& config) const {
  const double mv = timings.megavoxels > 0 ? timings.megavoxels : 1.0;
  nlohmann::json j;
  j["config"] = config.to_json();
  j["shape"] = {fragments.shape.z, fragments.shape.y, fragments.shape.x};
  j["megavoxels"] = timings.megavoxels;
  j["fragments"] = n_fragments;
  j["segments"] = n_segments;
  j["merges"] = history.size();
  j["timings_s"] = {{"watershed", timings.watershed_s},
                    {"agglomeration", timings.agglomeration_s},
                    {"total", timings.total_s}};
  j["throughput_s_per_megavoxel"] = {{"watershed", timings.watershed_s / mv},
                                     {"agglomeration", timings.agglomeration_s / mv},
                                     {"total", timings.total_s / mv}};
  if (evaluation) j["evaluation"] = to_json(*evaluation);
  if (!sweep.empty()) {
    auto arr = nlohmann::json::array();
    const SweepPoint* best = nullptr;
    for (const auto& p : sweep) {
      auto row = to_json(p.report);
      row["threshold"] = p.threshold;
      arr.push_back(row);
      if (!best || p.report.cremi_score < best->report.cremi_score) best = &p;
    }
    j["sweep"] = arr;
    j["best_threshold"] = best->threshold;
    j["best_cremi_score"] = best->report.cremi_score;
  }
  return j;
}

PipelineResult run_pipeline(const PipelineConfig& config, const AffinityVolume& aff, const LabelVolume* gt) {
  config.validate();
  if (gt) require_same_shape(aff.shape, gt->shape, "ground truth");
  PipelineResult r;
  const auto t0 = Clock::now();
  r.timings.megavoxels = static_cast<double>(aff.shape.voxels()) / 1e6;

  auto t = Clock::now();
  r.fragments = stage("watershed", [&] { return extract_fragments(aff, config.mode); });
  r.timings.watershed_s = seconds_since(t);
  r.n_fragments = count_labels(r.fragments);

  t = Clock::now();
  const auto rag = stage("rag", [&] { return build_rag(r.fragments, aff, config.bins); });
  // The history runs to the largest threshold requested so the sweep can replay it.
  double run_threshold = config.threshold;
  for (const auto s : config.sweep) run_threshold = std::max(run_threshold, s);
  r.history = stage("agglomerate", [&] { return agglomerate(rag, config.merge_function, run_threshold); });
  r.segmentation = stage("segment", [&] { return extract_segmentation(r.fragments, r.history, config.threshold); });
  r.timings.agglomeration_s = seconds_since(t);
  r.n_segments = count_labels(r.segmentation);
  r.timings.total_s = seconds_since(t0);

  if (gt) {
    stage("evaluate", [&] {
      r.evaluation = evaluate(r.segmentation, *gt);
      for (const auto s : config.sweep)
        r.sweep.push_back({s, evaluate(extract_segmentation(r.fragments, r.history, s), *gt)});
      return 0;
    });
  }

  if (!config.output_dir.empty()) {
    stage("write", [&] {
      const fs::path dir(config.output_dir);
      fs::create_directories(dir);
      write_volume(r.fragments, dir / "fragments");
      write_volume(r.segmentation, dir / "segmentation");
      write_history_csv(r.history, dir / "history.csv");
      std::ofstream(dir / "report.json") << r.report(config).dump(2) << '\n';
      return 0;
    });
  }
  return r;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  config.validate();
  AffinityVolume aff;
  std::optional<LabelVolume> gt;
  if (config.synth) {
    stage("synth", [&] {
      gt = voronoi_labels(*config.synth);
      aff = affinities_from_labels(*gt, config.synth->noise_sigma, config.synth->flip_prob, config.synth->seed);
      if (!config.output_dir.empty()) {
        fs::create_directories(config.output_dir);
        write_volume(*gt, fs::path(config.output_dir) / "ground_truth");
        write_volume(aff, fs::path(config.output_dir) / "affinities");
      }
      return 0;
    });
  } else {
    aff = stage("read", [&] { return read_affinities(config.affinities); });
  }
  if (!config.ground_truth.empty()) gt = stage("read", [&] { return read_labels(config.ground_truth); });
  return run_pipeline(config, aff, gt ? &*gt : nullptr);
}

std::vector<BenchRow> bench_agglomeration(const std::vector<std::uint64_t>& sizes, int repeats, std::uint64_t seed,
                                          const MergeFunction& f, AgglomerateFn bucket, AgglomerateFn naive) {
  if (repeats < 1) throw Error("repeats must be >= 1");
  if (!std::is_sorted(sizes.begin(), sizes.end())) throw Error("benchmark sizes must be ascending");
  std::vector<BenchRow> rows;
  for (const auto n : sizes) {
    const auto rag = random_rag(n, seed);
    std::vector<double> tb, tn;
    for (int r = 0; r < repeats; ++r) {
      auto t = Clock::now();
      const auto hb = bucket(rag, f, 1.0);
      tb.push_back(seconds_since(t));
      t = Clock::now();
      const auto hn = naive(rag, f, 1.0);
      tn.push_back(seconds_since(t));
      if (hb != hn) throw BenchMismatch("merge histories differ for " + std::to_string(n) + " edges");
    }
    rows.push_back({rag.edge_count(), median(tb), median(tn)});
  }
  return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out) {
  out << "n,t_bucket,t_naive\n";
  for (const auto& r : rows) out << r.n_edges << ',' << r.t_bucket << ',' << r.t_naive << '\n';
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("slope needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= x.size();
  my /= y.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    den += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return num / den;
}

} // namespace mala
