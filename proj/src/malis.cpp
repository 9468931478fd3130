#include "mala/malis.hpp"

#include <algorithm>
#include <bit>
#include <memory>
#include <unordered_map>

#include "mala/union_find.hpp"

namespace mala {
namespace {

using LabelCounts = std::unordered_map<Label, std::uint64_t>;

// Valid edge flat ids ordered by affinity descending, then flat id ascending.
std::vector<std::uint64_t> sorted_edges(const AffinityVolume& aff) {
  const Shape3& s = aff.shape;
  const auto total = kAxes * s.voxels();
  std::vector<std::uint64_t> order;
  order.reserve(edge_count(s));
  if (total <= (std::uint64_t{1} << 32)) {
    // Non-negative floats order like their bit patterns, so pack the inverted
    // bits above the flat id and sort plain integers.
    for_each_edge(s, [&](std::uint64_t flat, std::uint64_t, std::uint64_t) {
      const auto bits = std::bit_cast<std::uint32_t>(aff.data[flat]);
      order.push_back((std::uint64_t{~bits} << 32) | flat);
    });
    std::sort(order.begin(), order.end());
    for (auto& k : order) k &= 0xffffffffULL;
  } else {
    for_each_edge(s, [&](std::uint64_t flat, std::uint64_t, std::uint64_t) { order.push_back(flat); });
    std::sort(order.begin(), order.end(), [&](std::uint64_t a, std::uint64_t b) {
      if (aff.data[a] != aff.data[b]) return aff.data[a] > aff.data[b];
      return a < b;
    });
  }
  return order;
}

// Kruskal sweep over `sort_aff`; calls fn(flat, pos, neg, background) for every
// edge that unites two components.
template <typename Fn>
void kruskal(const AffinityVolume& sort_aff, const LabelVolume& gt, Fn&& fn) {
  const Shape3& s = gt.shape;
  const auto n = s.voxels();
  const auto st = strides(s);
  DisjointSets sets(n);
  std::vector<std::uint64_t> labelled(n);
  // Label histograms of components with more than one voxel; singletons are
  // implicit (their only label is gt[root]).
  std::vector<std::unique_ptr<LabelCounts>> counts(n);
  for (std::uint64_t v = 0; v < n; ++v) labelled[v] = gt.data[v] != 0 ? 1 : 0;

  auto count_in = [&](std::uint64_t root, Label label) -> std::uint64_t {
    if (const auto& c = counts[root]) {
      auto it = c->find(label);
      return it == c->end() ? 0 : it->second;
    }
    return gt.data[root] == label ? 1 : 0;
  };

  for (const auto flat : sorted_edges(sort_aff)) {
    const auto c = flat / n;
    const auto v = flat % n;
    auto big = sets.find(v - st[c]);
    auto small = sets.find(v);
    if (big == small) continue;
    if (sets.size(big) < sets.size(small)) std::swap(big, small);

    std::uint64_t pos = 0;
    if (const auto& sc = counts[small]) {
      for (const auto& [label, k] : *sc) pos += k * count_in(big, label);
    } else if (gt.data[small] != 0) {
      pos = count_in(big, gt.data[small]);
    }
    const auto all = sets.size(big) * sets.size(small);
    const auto labelled_pairs = labelled[big] * labelled[small];
    fn(flat, pos, labelled_pairs - pos, all - labelled_pairs);

    auto& bc = counts[big];
    if (!bc) {
      bc = std::make_unique<LabelCounts>();
      if (gt.data[big] != 0) (*bc)[gt.data[big]] = 1;
    }
    if (const auto& sc = counts[small]) {
      for (const auto& [label, k] : *sc) (*bc)[label] += k;
    } else if (gt.data[small] != 0) {
      (*bc)[gt.data[small]] += 1;
    }
    counts[small].reset();
    sets.link(big, small); // big stays root
    labelled[big] += labelled[small];
  }
}

} // namespace

const char* to_string(MalisPass pass) {
  switch (pass) {
  case MalisPass::positive: return "positive";
  case MalisPass::negative: return "negative";
  case MalisPass::unconstrained: return "unconstrained";
  }
  return "?";
}

MalisPass parse_malis_pass(const std::string& name) {
  if (name == "positive") return MalisPass::positive;
  if (name == "negative") return MalisPass::negative;
  if (name == "unconstrained") return MalisPass::unconstrained;
  throw Error("unknown MALIS pass '" + name + "'");
}

MaximinDecomposition maximin_decompose(const AffinityVolume& aff, const LabelVolume& gt) {
  require_same_shape(aff.shape, gt.shape, "maximin_decompose");
  MaximinDecomposition d;
  d.records.reserve(gt.shape.voxels() > 0 ? gt.shape.voxels() - 1 : 0);
  kruskal(aff, gt, [&](std::uint64_t flat, std::uint64_t pos, std::uint64_t neg, std::uint64_t bg) {
    d.records.push_back({EdgeId::from_flat(aff.shape, flat), aff.data[flat], pos, neg, bg});
  });
  return d;
}

AffinityVolume constrain_affinities(const AffinityVolume& aff, const LabelVolume& gt, MalisPass pass) {
  require_same_shape(aff.shape, gt.shape, "constrain_affinities");
  AffinityVolume out = aff;
  if (pass == MalisPass::unconstrained) return out;
  for_each_edge(aff.shape, [&](std::uint64_t flat, std::uint64_t u, std::uint64_t v) {
    const Label lu = gt.data[u];
    const Label lv = gt.data[v];
    const bool same_region = lu != 0 && lu == lv;
    if (pass == MalisPass::positive && !same_region) out.data[flat] = 0.0f;
    if (pass == MalisPass::negative && same_region) out.data[flat] = 1.0f;
  });
  return out;
}

MalisResult malis_pass(const AffinityVolume& aff, const LabelVolume& gt, MalisPass pass) {
  require_same_shape(aff.shape, gt.shape, "malis_pass");
  MalisResult r;
  r.gradient = GradientVolume(aff.shape);
  const bool use_pos = pass != MalisPass::negative;
  const bool use_neg = pass != MalisPass::positive;
  const auto sort_aff = constrain_affinities(aff, gt, pass);
  kruskal(sort_aff, gt, [&](std::uint64_t flat, std::uint64_t pos, std::uint64_t neg, std::uint64_t) {
    // The clamp only steers which edge is maximin; the loss is on the prediction.
    const double a = aff.data[flat];
    if (use_pos && pos > 0) {
      r.loss += static_cast<double>(pos) * (1.0 - a) * (1.0 - a);
      r.gradient.data[flat] += -2.0 * static_cast<double>(pos) * (1.0 - a);
      r.pos_pairs += pos;
    }
    if (use_neg && neg > 0) {
      r.loss += static_cast<double>(neg) * a * a;
      r.gradient.data[flat] += 2.0 * static_cast<double>(neg) * a;
      r.neg_pairs += neg;
    }
  });
  return r;
}

MalisResult constrained_malis(const AffinityVolume& aff, const LabelVolume& gt) {
  auto r = malis_pass(aff, gt, MalisPass::positive);
  const auto neg = malis_pass(aff, gt, MalisPass::negative);
  r.loss += neg.loss;
  r.neg_pairs += neg.neg_pairs;
  for (std::size_t i = 0; i < r.gradient.data.size(); ++i) r.gradient.data[i] += neg.gradient.data[i];
  return r;
}

} // namespace mala
