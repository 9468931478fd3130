#pragma once

// End-to-end pipeline (watershed -> RAG -> agglomeration -> segmentation ->
// evaluation) and the agglomeration runtime benchmark.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mala/agglomerate.hpp"
#include "mala/malis.hpp"
#include "mala/metrics.hpp"
#include "mala/synth.hpp"
#include "mala/watershed.hpp"

namespace mala {

struct PipelineConfig {
  WatershedMode mode = WatershedMode::volume3d;
  MergeFunction merge_function = MergeFunction::quantile(0.5);
  double threshold = 0.5;
  std::uint32_t bins = kDefaultBins;
  std::uint64_t oracle_limit = kDefaultOracleLimit;
  std::string affinities;           // vgrid input; empty when `synth` is set
  std::optional<SynthSpec> synth;   // generate input instead of reading it
  std::string ground_truth;         // optional vgrid labels
  std::string output_dir;           // artifacts are written here when non-empty
  std::vector<double> sweep;        // extra thresholds to evaluate

  void validate() const;
  nlohmann::json to_json() const;
  // Keys absent from `j` keep their current values.
  void update_from_json(const nlohmann::json& j);
};

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalReport& r);

// Raised when a pipeline stage fails; names the stage.
class StageError : public Error {
public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

private:
  std::string stage_;
};

struct StageTimings {
  double watershed_s = 0.0;
  double agglomeration_s = 0.0;
  double total_s = 0.0;
  double megavoxels = 0.0;
};

struct SweepPoint {
  double threshold = 0.0;
  EvalReport report;
};

struct PipelineResult {
  FragmentVolume fragments;
  MergeHistory history;
  LabelVolume segmentation;
  std::uint64_t n_fragments = 0;
  std::uint64_t n_segments = 0;
  std::optional<EvalReport> evaluation;
  std::vector<SweepPoint> sweep;
  StageTimings timings;

  // Report in the throughput-table layout (seconds per megavoxel).
  nlohmann::json report(const PipelineConfig& config) const;
};

PipelineResult run_pipeline(const PipelineConfig& config);

// Same stages on in-memory volumes; `gt` may be null.
PipelineResult run_pipeline(const PipelineConfig& config, const AffinityVolume& aff, const LabelVolume* gt);

std::uint64_t count_labels(const LabelVolume& vol);

struct BenchRow {
  std::uint64_t n_edges = 0;
  double t_bucket = 0.0;
  double t_naive = 0.0;
};

class BenchMismatch : public Error {
public:
  using Error::Error;
};

using AgglomerateFn = std::function<MergeHistory(const Rag&, const MergeFunction&, double)>;

// Times both agglomeration schemes on random RAGs (median of `repeats`),
// after checking they produce identical histories.
std::vector<BenchRow> bench_agglomeration(const std::vector<std::uint64_t>& sizes, int repeats,
                                          std::uint64_t seed = 0,
                                          const MergeFunction& f = MergeFunction::quantile(0.5),
                                          AgglomerateFn bucket = agglomerate,
                                          AgglomerateFn naive = naive_agglomerate);

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace mala
