#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mala/pipeline.hpp"
#include "mala/vgrid.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mala;

namespace {

std::string env_name(const std::string& flag) {
  std::string s = "MALA_";
  for (char c : flag.substr(flag.find_first_not_of('-')))
    s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// Every option can also be set through MALA_<FLAG>; an explicit flag wins.
template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& flag, T& target, const std::string& help) {
  return app->add_option(flag, target, help)->envname(env_name(flag));
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

void write_sweep_csv(const std::vector<SweepPoint>& points, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string());
  out << std::setprecision(10) << "threshold,voi_split,voi_merge,voi_total,arand,cremi_score\n";
  for (const auto& p : points)
    out << p.threshold << ',' << p.report.voi_split << ',' << p.report.voi_merge << ',' << p.report.voi_total << ','
        << p.report.arand << ',' << p.report.cremi_score << '\n';
}

struct SynthArgs {
  std::vector<std::uint64_t> shape{32, 32, 32};
  std::uint64_t regions = 8;
  double sigma = 0.0, flip = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

struct WatershedArgs {
  std::string affinities, out, mode = "3d";
};

struct AgglomerateArgs {
  std::string affinities, fragments, out, merge = "quantile:0.5";
  double threshold = 1.0;
  std::uint32_t bins = kDefaultBins;
};

struct SegmentArgs {
  std::string fragments, history, out;
  double threshold = 0.5;
};

struct EvaluateArgs {
  std::string segmentation, ground_truth, fragments, history, sweep_out;
  std::vector<double> sweep;
};

struct MalisArgs {
  std::string affinities, ground_truth, gradient_out, pass = "constrained";
  bool oracle = false;
  std::uint64_t oracle_limit = kDefaultOracleLimit;
};

struct BenchArgs {
  std::vector<std::uint64_t> sizes{10000, 100000, 1000000};
  int repeats = 3;
  std::uint64_t seed = 0;
  std::string merge = "quantile:0.5", out;
};

struct PipelineArgs {
  std::string config, affinities, ground_truth, output_dir, mode, merge, sweep_out;
  double threshold = 0.0;
  std::uint32_t bins = 0;
  std::vector<double> sweep;
};

void run_synth(const SynthArgs& a) {
  if (a.shape.size() != 3) throw Error("--shape takes Z Y X");
  SynthSpec spec{{a.shape[0], a.shape[1], a.shape[2]}, a.regions, a.sigma, a.flip, a.seed};
  spec.validate();
  const auto gt = voronoi_labels(spec);
  const auto aff = affinities_from_labels(gt, spec.noise_sigma, spec.flip_prob, spec.seed);
  fs::create_directories(a.out);
  write_volume(gt, fs::path(a.out) / "ground_truth");
  write_volume(aff, fs::path(a.out) / "affinities");
  print_json(to_json(spec));
}

void run_watershed(const WatershedArgs& a) {
  const auto frags = extract_fragments(read_affinities(a.affinities), parse_watershed_mode(a.mode));
  write_volume(frags, a.out);
  print_json({{"fragments", count_labels(frags)}, {"mode", a.mode}});
}

void run_agglomerate(const AgglomerateArgs& a) {
  const auto f = MergeFunction::parse(a.merge);
  const auto rag = build_rag(read_labels(a.fragments), read_affinities(a.affinities), a.bins);
  const auto history = agglomerate(rag, f, a.threshold);
  if (a.out.empty()) write_history_csv(history, std::cout);
  else {
    write_history_csv(history, fs::path(a.out));
    print_json({{"nodes", rag.node_count()}, {"edges", rag.edge_count()}, {"merges", history.size()}});
  }
}

void run_segment(const SegmentArgs& a) {
  const auto seg = extract_segmentation(read_labels(a.fragments), read_history_csv(fs::path(a.history)), a.threshold);
  write_volume(seg, a.out);
  print_json({{"segments", count_labels(seg)}, {"threshold", a.threshold}});
}

void run_evaluate(const EvaluateArgs& a) {
  const auto gt = read_labels(a.ground_truth);
  json j = to_json(evaluate(read_labels(a.segmentation), gt));
  if (!a.sweep.empty()) {
    if (a.fragments.empty() || a.history.empty()) throw Error("--sweep needs --fragments and --history");
    const auto frags = read_labels(a.fragments);
    const auto history = read_history_csv(fs::path(a.history));
    std::vector<SweepPoint> points;
    for (const auto t : a.sweep) points.push_back({t, evaluate(extract_segmentation(frags, history, t), gt)});
    if (!a.sweep_out.empty()) write_sweep_csv(points, a.sweep_out);
    auto arr = json::array();
    for (const auto& p : points) {
      auto row = to_json(p.report);
      row["threshold"] = p.threshold;
      arr.push_back(row);
    }
    j["sweep"] = arr;
  }
  print_json(j);
}

void run_malis(const MalisArgs& a) {
  const auto aff = read_affinities(a.affinities);
  const auto gt = read_labels(a.ground_truth);
  const bool both = a.pass == "constrained";
  const auto r = both ? constrained_malis(aff, gt) : malis_pass(aff, gt, parse_malis_pass(a.pass));
  json j = {{"pass", a.pass}, {"loss", r.loss}, {"pos_pairs", r.pos_pairs}, {"neg_pairs", r.neg_pairs}};
  if (a.oracle) {
    auto ref = both ? brute_force_malis(aff, gt, MalisPass::positive, a.oracle_limit)
                    : brute_force_malis(aff, gt, parse_malis_pass(a.pass), a.oracle_limit);
    if (both) {
      const auto neg = brute_force_malis(aff, gt, MalisPass::negative, a.oracle_limit);
      ref.loss += neg.loss;
      for (std::size_t i = 0; i < ref.gradient.data.size(); ++i) ref.gradient.data[i] += neg.gradient.data[i];
    }
    double diff = std::abs(ref.loss - r.loss);
    for (std::size_t i = 0; i < r.gradient.data.size(); ++i)
      diff = std::max(diff, std::abs(ref.gradient.data[i] - r.gradient.data[i]));
    j["oracle_max_abs_diff"] = diff;
  }
  if (!a.gradient_out.empty()) write_volume(r.gradient, a.gradient_out);
  print_json(j);
}

void run_bench(const BenchArgs& a) {
  const auto rows = bench_agglomeration(a.sizes, a.repeats, a.seed, MergeFunction::parse(a.merge));
  if (a.out.empty()) {
    write_bench_csv(rows, std::cout);
    return;
  }
  std::ofstream out(a.out);
  if (!out) throw Error("cannot open " + a.out);
  write_bench_csv(rows, out);
  json j = {{"rows", rows.size()}};
  if (rows.size() >= 2) {
    std::vector<double> n, t;
    for (const auto& r : rows) {
      n.push_back(static_cast<double>(r.n_edges));
      t.push_back(r.t_bucket);
    }
    j["bucket_loglog_slope"] = loglog_slope(n, t);
  }
  print_json(j);
}

void run_pipeline_cmd(const PipelineArgs& a, const CLI::App& sub) {
  PipelineConfig c;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw Error("cannot open " + a.config);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw Error("bad config file: " + std::string(e.what()));
    }
    c.update_from_json(j);
  }
  const auto given = [&](const char* flag) { return sub.count(flag) > 0; };
  if (given("--affinities")) {
    c.affinities = a.affinities;
    c.synth.reset();
  }
  if (given("--ground-truth")) c.ground_truth = a.ground_truth;
  if (given("--output-dir")) c.output_dir = a.output_dir;
  if (given("--mode")) c.mode = parse_watershed_mode(a.mode);
  if (given("--merge-function")) c.merge_function = MergeFunction::parse(a.merge);
  if (given("--threshold")) c.threshold = a.threshold;
  if (given("--bins")) c.bins = a.bins;
  if (given("--sweep")) c.sweep = a.sweep;
  const auto r = run_pipeline(c);
  if (!a.sweep_out.empty()) write_sweep_csv(r.sweep, a.sweep_out);
  print_json(r.report(c));
}

int fail(const std::string& type, const std::string& message, const std::string& stage = "") {
  json e = {{"type", type}, {"message", message}};
  if (!stage.empty()) e["stage"] = stage;
  std::cerr << json{{"error", e}}.dump() << '\n';
  return 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affinity-graph segmentation: watershed, agglomeration, MALIS and evaluation"};
  app.require_subcommand(1);

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Generate Voronoi ground truth and affinities");
  opt(synth, "--shape", sy.shape, "Volume shape Z Y X")->expected(3);
  opt(synth, "--regions", sy.regions, "Number of regions");
  opt(synth, "--sigma", sy.sigma, "Gaussian noise sigma");
  opt(synth, "--flip", sy.flip, "Edge flip probability");
  opt(synth, "--seed", sy.seed, "Seed");
  opt(synth, "--out", sy.out, "Output directory")->required();

  WatershedArgs ws;
  auto* watershed = app.add_subcommand("watershed", "Extract fragments from affinities");
  opt(watershed, "--affinities", ws.affinities, "Affinity volume")->required();
  opt(watershed, "--mode", ws.mode, "3d or 2d")->check(CLI::IsMember({"2d", "3d"}));
  opt(watershed, "--out", ws.out, "Fragment volume")->required();

  AgglomerateArgs ag;
  auto* agg = app.add_subcommand("agglomerate", "Agglomerate fragments into a merge history CSV");
  opt(agg, "--affinities", ag.affinities, "Affinity volume")->required();
  opt(agg, "--fragments", ag.fragments, "Fragment volume")->required();
  opt(agg, "--merge-function", ag.merge, "quantile:<q> or mean");
  opt(agg, "--threshold", ag.threshold, "Stop threshold");
  opt(agg, "--bins", ag.bins, "Score bins");
  opt(agg, "--out", ag.out, "History CSV (stdout if omitted)");

  SegmentArgs sg;
  auto* segment = app.add_subcommand("segment", "Replay a merge history at a threshold");
  opt(segment, "--fragments", sg.fragments, "Fragment volume")->required();
  opt(segment, "--history", sg.history, "History CSV")->required();
  opt(segment, "--threshold", sg.threshold, "Threshold");
  opt(segment, "--out", sg.out, "Segmentation volume")->required();

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Compare a segmentation with ground truth");
  opt(evaluate_cmd, "--segmentation", ev.segmentation, "Segmentation volume")->required();
  opt(evaluate_cmd, "--ground-truth", ev.ground_truth, "Ground truth volume")->required();
  opt(evaluate_cmd, "--fragments", ev.fragments, "Fragments for a threshold sweep");
  opt(evaluate_cmd, "--history", ev.history, "History CSV for a threshold sweep");
  opt(evaluate_cmd, "--sweep", ev.sweep, "Thresholds to evaluate");
  opt(evaluate_cmd, "--sweep-out", ev.sweep_out, "Sweep CSV");

  MalisArgs ml;
  auto* malis = app.add_subcommand("malis", "Constrained MALIS loss and gradient");
  opt(malis, "--affinities", ml.affinities, "Affinity volume")->required();
  opt(malis, "--ground-truth", ml.ground_truth, "Ground truth volume")->required();
  opt(malis, "--pass", ml.pass, "constrained, positive, negative or unconstrained")
      ->check(CLI::IsMember({"constrained", "positive", "negative", "unconstrained"}));
  opt(malis, "--gradient-out", ml.gradient_out, "Gradient volume");
  malis->add_flag("--oracle", ml.oracle, "Also run the quadratic reference")->envname("MALA_ORACLE");
  opt(malis, "--oracle-limit", ml.oracle_limit, "Largest volume for the reference");

  BenchArgs bn;
  auto* bench = app.add_subcommand("bench", "Time bucket-queue against heap agglomeration");
  opt(bench, "--sizes", bn.sizes, "Edge counts, ascending");
  opt(bench, "--repeats", bn.repeats, "Repeats per size (median reported)");
  opt(bench, "--seed", bn.seed, "Seed");
  opt(bench, "--merge-function", bn.merge, "quantile:<q> or mean");
  opt(bench, "--out", bn.out, "CSV path (stdout if omitted)");

  PipelineArgs pl;
  auto* pipeline = app.add_subcommand("pipeline", "Run watershed, agglomeration and evaluation");
  opt(pipeline, "--config", pl.config, "JSON config file");
  opt(pipeline, "--affinities", pl.affinities, "Affinity volume");
  opt(pipeline, "--ground-truth", pl.ground_truth, "Ground truth volume");
  opt(pipeline, "--output-dir", pl.output_dir, "Artifact directory");
  opt(pipeline, "--mode", pl.mode, "3d or 2d");
  opt(pipeline, "--merge-function", pl.merge, "quantile:<q> or mean");
  opt(pipeline, "--threshold", pl.threshold, "Threshold");
  opt(pipeline, "--bins", pl.bins, "Score bins");
  opt(pipeline, "--sweep", pl.sweep, "Extra thresholds to evaluate");
  opt(pipeline, "--sweep-out", pl.sweep_out, "Sweep CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("usage", e.what());
    return 2;
  }

  try {
    if (*synth) run_synth(sy);
    else if (*watershed) run_watershed(ws);
    else if (*agg) run_agglomerate(ag);
    else if (*segment) run_segment(sg);
    else if (*evaluate_cmd) run_evaluate(ev);
    else if (*malis) run_malis(ml);
    else if (*bench) run_bench(bn);
    else if (*pipeline) run_pipeline_cmd(pl, *pipeline);
  } catch (const StageError& e) {
    return fail("stage", e.what(), e.stage());
  } catch (const BenchMismatch& e) {
    return fail("bench_mismatch", e.what());
  } catch (const VgridError& e) {
    return fail("vgrid", e.what());
  } catch (const std::exception& e) {
    return fail("error", e.what());
  }
  return 0;
}
