#pragma once

// Segmentation comparison: variation of information, adapted RAND error and
// the CREMI score (geometric mean of the two). Entropies are in nats.

#include <cstdint>
#include <unordered_map>
#include <utility>

#include "mala/volume.hpp"

namespace mala {

struct PairHash {
  std::size_t operator()(const std::pair<Label, Label>& p) const noexcept {
    std::uint64_t h = p.first * 0x9E3779B97F4A7C15ULL;
    h ^= p.second + 0x632BE59BD9B4E019ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

struct ContingencyTable {
  std::unordered_map<std::pair<Label, Label>, std::uint64_t, PairHash> counts; // (seg, gt) -> voxels
  std::unordered_map<Label, std::uint64_t> seg_totals;
  std::unordered_map<Label, std::uint64_t> gt_totals;
  std::uint64_t total = 0;

  bool empty() const { return total == 0; }
  void add(Label seg, Label gt, std::uint64_t n = 1);
  // Adds another (e.g. per-shard) table.
  void merge(const ContingencyTable& other);
};

// With ignore_gt_background set, voxels whose ground-truth label is 0 are skipped.
ContingencyTable contingency(const LabelVolume& seg, const LabelVolume& gt, bool ignore_gt_background = true);

struct VoiResult {
  double split = 0.0; // H(seg | gt)
  double merge = 0.0; // H(gt | seg)
};

VoiResult voi(const ContingencyTable& t);
double adapted_rand_error(const ContingencyTable& t);
// Also returns precision and recall of the RAND F-score.
double adapted_rand_error(const ContingencyTable& t, double& precision, double& recall);
double cremi_score(double voi_total, double arand);

struct EvalReport {
  double voi_split = 0.0;
  double voi_merge = 0.0;
  double voi_total = 0.0;
  double arand = 0.0;
  double cremi_score = 0.0;
};

EvalReport evaluate(const LabelVolume& seg, const LabelVolume& gt, bool ignore_gt_background = true);
EvalReport evaluate(const ContingencyTable& t);

} // namespace mala
