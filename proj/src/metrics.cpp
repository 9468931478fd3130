#include "mala/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace mala {

void ContingencyTable::add(Label seg, Label gt, std::uint64_t n) {
  if (n == 0) return;
  counts[{seg, gt}] += n;
  seg_totals[seg] += n;
  gt_totals[gt] += n;
  total += n;
}

void ContingencyTable::merge(const ContingencyTable& other) {
  for (const auto& [key, n] : other.counts) add(key.first, key.second, n);
}

ContingencyTable contingency(const LabelVolume& seg, const LabelVolume& gt, bool ignore_gt_background) {
  require_same_shape(seg.shape, gt.shape, "contingency");
  ContingencyTable t;
  // Run-length accumulate; neighbouring voxels usually share both labels.
  std::uint64_t run = 0;
  Label rs = 0, rg = 0;
  for (std::size_t i = 0; i < seg.data.size(); ++i) {
    const Label s = seg.data[i];
    const Label g = gt.data[i];
    if (ignore_gt_background && g == 0) continue;
    if (run > 0 && s == rs && g == rg) {
      ++run;
      continue;
    }
    t.add(rs, rg, run);
    rs = s;
    rg = g;
    run = 1;
  }
  t.add(rs, rg, run);
  return t;
}

VoiResult voi(const ContingencyTable& t) {
  if (t.empty()) throw Error("VOI of an empty contingency table");
  const double n = static_cast<double>(t.total);
  // H(S|G) = -sum p(s,g) log(p(s,g)/p(g)), H(G|S) likewise.
  VoiResult r;
  for (const auto& [key, c] : t.counts) {
    const double pj = c / n;
    r.split -= pj * std::log(static_cast<double>(c) / t.gt_totals.at(key.second));
    r.merge -= pj * std::log(static_cast<double>(c) / t.seg_totals.at(key.first));
  }
  // Clamp rounding noise on exact matches.
  r.split = std::max(0.0, r.split);
  r.merge = std::max(0.0, r.merge);
  return r;
}

double adapted_rand_error(const ContingencyTable& t, double& precision, double& recall) {
  if (t.empty()) throw Error("adapted RAND error of an empty contingency table");
  long double joint = 0, seg_sq = 0, gt_sq = 0;
  for (const auto& [key, c] : t.counts) joint += static_cast<long double>(c) * c;
  for (const auto& [l, c] : t.seg_totals) seg_sq += static_cast<long double>(c) * c;
  for (const auto& [l, c] : t.gt_totals) gt_sq += static_cast<long double>(c) * c;
  precision = static_cast<double>(joint / seg_sq);
  recall = static_cast<double>(joint / gt_sq);
  return static_cast<double>(1.0L - 2.0L * joint / (seg_sq + gt_sq));
}

double adapted_rand_error(const ContingencyTable& t) {
  double p = 0, r = 0;
  return adapted_rand_error(t, p, r);
}

double cremi_score(double voi_total, double arand) {
  if (voi_total < 0.0 || arand < 0.0) throw Error("CREMI score inputs must be non-negative");
  return std::sqrt(voi_total * arand);
}

EvalReport evaluate(const ContingencyTable& t) {
  EvalReport r;
  const auto v = voi(t);
  r.voi_split = v.split;
  r.voi_merge = v.merge;
  r.voi_total = v.split + v.merge;
  r.arand = std::max(0.0, adapted_rand_error(t));
  r.cremi_score = cremi_score(r.voi_total, r.arand);
  return r;
}

EvalReport evaluate(const LabelVolume& seg, const LabelVolume& gt, bool ignore_gt_background) {
  return evaluate(contingency(seg, gt, ignore_gt_background));
}

} // namespace mala
