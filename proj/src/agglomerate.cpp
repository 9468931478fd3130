#include "mala/agglomerate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <absl/container/flat_hash_map.h>

#include "mala/union_find.hpp"

namespace mala {

std::uint32_t bin_of(double score, std::uint32_t bins) {
  if (!(score >= 0.0 && score <= 1.0)) throw Error("score " + std::to_string(score) + " outside [0,1]");
  if (bins == 0) throw Error("bin count must be positive");
  const auto b = static_cast<std::uint64_t>(std::floor(score * bins));
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(b, bins - 1));
}

double bin_value(std::uint32_t bin, std::uint32_t bins) { return (bin + 0.5) / bins; }

void ScoreHistogram::add(std::uint32_t bin, std::uint64_t count) {
  if (count == 0) return;
  auto it = std::lower_bound(entries_.begin(), entries_.end(), bin,
                             [](const auto& e, std::uint32_t b) { return e.first < b; });
  if (it != entries_.end() && it->first == bin) it->second += count;
  else entries_.insert(it, {bin, count});
  total_ += count;
}

void ScoreHistogram::merge(const ScoreHistogram& other) {
  if (other.entries_.size() == 1) {
    add(other.entries_[0].first, other.entries_[0].second);
    return;
  }
  std::vector<std::pair<std::uint32_t, std::uint64_t>> out;
  out.reserve(entries_.size() + other.entries_.size());
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() || b != other.entries_.end()) {
    if (b == other.entries_.end() || (a != entries_.end() && a->first < b->first)) {
      out.push_back(*a++);
    } else if (a == entries_.end() || b->first < a->first) {
      out.push_back(*b++);
    } else {
      out.emplace_back(a->first, a->second + b->second);
      ++a;
      ++b;
    }
  }
  entries_ = std::move(out);
  total_ += other.total_;
}

std::uint64_t ScoreHistogram::count(std::uint32_t bin) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), bin,
                             [](const auto& e, std::uint32_t b) { return e.first < b; });
  return it != entries_.end() && it->first == bin ? it->second : 0;
}

MergeFunction MergeFunction::quantile(double q) {
  if (!(q > 0.0 && q <= 1.0)) throw Error("quantile must lie in (0,1], got " + std::to_string(q));
  return {Kind::quantile, q};
}

MergeFunction MergeFunction::parse(const std::string& text) {
  if (text == "mean") return mean();
  const std::string prefix = "quantile:";
  if (text.rfind(prefix, 0) == 0) {
    std::size_t used = 0;
    double q = 0.0;
    try {
      q = std::stod(text.substr(prefix.size()), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size() - prefix.size()) throw Error("bad quantile in '" + text + "'");
    return quantile(q);
  }
  throw Error("unknown merge function '" + text + "' (expected quantile:<q> or mean)");
}

std::string MergeFunction::str() const {
  if (kind == Kind::mean) return "mean";
  std::ostringstream os;
  os << "quantile:" << q;
  return os.str();
}

std::uint32_t merge_score(const ScoreHistogram& h, const MergeFunction& f, std::uint32_t bins) {
  if (h.empty()) throw Error("merge score of an empty histogram");
  const auto m = h.total();
  if (f.kind == MergeFunction::Kind::mean) {
    // floor(bins * mean of centres) == floor(sum count_i * (2i+1) / (2m))
    std::uint64_t sum = 0;
    for (const auto& [bin, c] : h.entries()) sum += c * (2 * std::uint64_t{bin} + 1);
    return static_cast<std::uint32_t>(std::min<std::uint64_t>(sum / (2 * m), bins - 1));
  }
  const double x = f.q * static_cast<double>(m);
  // Guard against q*m landing a hair above an integer.
  auto need = static_cast<std::uint64_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
  need = std::clamp<std::uint64_t>(need, 1, m);
  std::uint64_t acc = 0;
  for (const auto& [bin, c] : h.entries()) {
    acc += c;
    if (acc >= need) return bin;
  }
  return h.entries().back().first;
}

void Rag::validate() const {
  if (bins == 0) throw Error("RAG bin count must be positive");
  if (sizes.size() != labels.size()) throw Error("RAG node sizes and labels differ in length");
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i - 1] >= labels[i]) throw Error("RAG labels must be strictly ascending");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.u >= e.v || e.v >= labels.size()) throw Error("RAG edge with bad endpoints");
    if (e.histogram.empty()) throw Error("RAG edge with empty histogram");
    if (e.histogram.entries().back().first >= bins) throw Error("RAG histogram bin out of range");
    if (i > 0 && std::pair(edges[i - 1].u, edges[i - 1].v) >= std::pair(e.u, e.v))
      throw Error("RAG edges must be unique and sorted");
  }
}

Rag build_rag(const LabelVolume& fragments, const AffinityVolume& aff, std::uint32_t bins) {
  require_same_shape(fragments.shape, aff.shape, "build_rag");
  if (bins == 0) throw Error("bin count must be positive");
  Rag rag;
  rag.bins = bins;
  std::unordered_map<Label, std::uint64_t> sizes;
  for (const auto l : fragments.data)
    if (l != 0) ++sizes[l];
  rag.labels.reserve(sizes.size());
  for (const auto& [l, c] : sizes) rag.labels.push_back(l);
  std::sort(rag.labels.begin(), rag.labels.end());
  if (rag.labels.size() > std::numeric_limits<std::uint32_t>::max()) throw Error("too many fragments for a RAG");
  std::unordered_map<Label, std::uint32_t> index;
  index.reserve(rag.labels.size());
  rag.sizes.reserve(rag.labels.size());
  for (std::uint32_t i = 0; i < rag.labels.size(); ++i) {
    index[rag.labels[i]] = i;
    rag.sizes.push_back(sizes[rag.labels[i]]);
  }

  std::unordered_map<std::uint64_t, float> contact;
  for_each_edge(aff.shape, [&](std::uint64_t flat, std::uint64_t u, std::uint64_t v) {
    const Label lu = fragments.data[u];
    const Label lv = fragments.data[v];
    if (lu == 0 || lv == 0 || lu == lv) return;
    auto a = index[lu];
    auto b = index[lv];
    if (a > b) std::swap(a, b);
    const auto key = (std::uint64_t{a} << 32) | b;
    auto [it, fresh] = contact.try_emplace(key, aff.data[flat]);
    if (!fresh) it->second = std::max(it->second, aff.data[flat]);
  });

  std::vector<std::pair<std::uint64_t, float>> sorted(contact.begin(), contact.end());
  std::sort(sorted.begin(), sorted.end());
  rag.edges.reserve(sorted.size());
  for (const auto& [key, max_aff] : sorted) {
    const double f0 = std::clamp(1.0 - static_cast<double>(max_aff), 0.0, 1.0);
    rag.edges.push_back({static_cast<std::uint32_t>(key >> 32), static_cast<std::uint32_t>(key & 0xffffffffULL),
                         ScoreHistogram(bin_of(f0, bins))});
  }
  return rag;
}

namespace {

enum class EdgeState : std::uint8_t { clean, stale, deleted };

constexpr std::uint32_t kInitialHistogram = std::numeric_limits<std::uint32_t>::max();

constexpr std::uint32_t kNil = std::numeric_limits<std::uint32_t>::max();

struct WorkEdge {
  std::uint32_t u;
  std::uint32_t v;
  // Intrusive incidence lists: next edge at the u side and at the v side.
  std::uint32_t next_u;
  std::uint32_t next_v;
  // Position of this edge's single queue entry.
  std::uint32_t entry_bin;
  EdgeState state;
  // Index into the fused-histogram pool, or kInitialHistogram.
  std::uint32_t hist;
  std::uint64_t entry_seq;
};

// Array of FIFO buckets with a monotone cursor.
class BucketQueue {
public:
  explicit BucketQueue(std::uint32_t bins) : buckets_(bins), head_(bins, 0) {}

  std::uint64_t push(std::uint32_t edge, std::uint32_t bin) {
    if (bin < cursor_) throw std::logic_error("bucket queue insert below the cursor");
    buckets_[bin].push_back(edge);
    return seq_++;
  }

  bool pop(std::uint32_t& edge, std::uint32_t& bin) {
    while (cursor_ < buckets_.size()) {
      auto& b = buckets_[cursor_];
      if (head_[cursor_] < b.size()) {
        edge = b[head_[cursor_]++];
        bin = cursor_;
        return true;
      }
      std::vector<std::uint32_t>().swap(b);
      ++cursor_;
    }
    return false;
  }

  // Edge that would be popped `ahead` entries from now in the current bucket, or kNil.
  std::uint32_t upcoming(std::size_t ahead) const {
    if (cursor_ >= buckets_.size()) return kNil;
    const auto& b = buckets_[cursor_];
    const auto i = head_[cursor_] + ahead;
    return i < b.size() ? b[i] : kNil;
  }

private:
  std::vector<std::vector<std::uint32_t>> buckets_;
  std::vector<std::size_t> head_;
  std::uint32_t cursor_ = 0;
  std::uint64_t seq_ = 0;
};

void check_threshold(double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error("threshold must lie in [0,1]");
}

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  return a < b ? (std::uint64_t{a} << 32) | b : (std::uint64_t{b} << 32) | a;
}

} // namespace

MergeHistory agglomerate(const Rag& rag, const MergeFunction& f, double threshold) {
  check_threshold(threshold);
  const auto bins = rag.bins;
  const auto n = static_cast<std::uint32_t>(rag.node_count());
  std::vector<std::uint64_t> size = rag.sizes;
  // Head of each node's incidence list; deleted edges are skipped lazily.
  std::vector<std::uint32_t> head(n, kNil);
  // Pair of live nodes -> the edge joining them. Keys naming an absorbed node
  // are never looked up again, so they are left in place.
  absl::flat_hash_map<std::uint64_t, std::uint32_t> between;
  between.reserve(rag.edge_count());
  std::vector<WorkEdge> edges;
  edges.reserve(rag.edge_count());
  std::vector<ScoreHistogram> fused;
  BucketQueue queue(bins);
  for (std::uint32_t i = 0; i < rag.edge_count(); ++i) {
    const auto& e = rag.edges[i];
    const auto bin = merge_score(e.histogram, f, bins);
    edges.push_back({e.u, e.v, head[e.u], head[e.v], bin, EdgeState::clean, kInitialHistogram, queue.push(i, bin)});
    head[e.u] = head[e.v] = i;
    between.emplace(pair_key(e.u, e.v), i);
  }

  auto histogram = [&](std::uint32_t id) -> ScoreHistogram& {
    auto& e = edges[id];
    if (e.hist == kInitialHistogram) {
      e.hist = static_cast<std::uint32_t>(fused.size());
      fused.push_back(rag.edges[id].histogram);
    }
    return fused[e.hist];
  };
  // Entry order: lower bin first, FIFO within a bin.
  auto entry_before = [&](std::uint32_t a, std::uint32_t b) {
    return std::pair(edges[a].entry_bin, edges[a].entry_seq) < std::pair(edges[b].entry_bin, edges[b].entry_seq);
  };

  MergeHistory history;
  std::uint32_t id = 0;
  std::uint32_t bin = 0;
  while (queue.pop(id, bin)) {
    if (const auto ahead = queue.upcoming(4); ahead != kNil) {
      __builtin_prefetch(&edges[ahead]);
    }
    auto& e = edges[id];
    if (e.state == EdgeState::deleted) continue;
    if (e.state == EdgeState::stale) {
      const auto fresh = merge_score(histogram(id), f, bins);
      // A fused edge never scores below its lower constituent.
      if (fresh < bin) throw std::logic_error("stale edge rescored below its queue position");
      e.entry_bin = fresh;
      e.entry_seq = queue.push(id, fresh);
      e.state = EdgeState::clean;
      continue;
    }
    const double score = bin_value(bin, bins);
    if (score >= threshold) break;
    if (!history.empty() && score < history.back().score)
      throw std::logic_error("merge scores decreased");

    auto s = e.u;
    auto a = e.v;
    if (size[a] > size[s] || (size[a] == size[s] && a < s)) std::swap(s, a);
    history.push_back({rag.labels[s], rag.labels[a], score});
    e.state = EdgeState::deleted;
    size[s] += size[a];

    auto relink = [&](std::uint32_t id2) {
      auto& m = edges[id2];
      auto& next = m.u == a ? m.next_u : m.next_v;
      (m.u == a ? m.u : m.v) = s;
      next = head[s];
      head[s] = id2;
    };
    for (auto other = head[a]; other != kNil;) {
      auto& m = edges[other];
      const auto cur = other;
      other = m.u == a ? m.next_u : m.next_v;
      if (m.state == EdgeState::deleted) continue;
      const auto w = m.u == a ? m.v : m.u;
      auto it = between.find(pair_key(s, w));
      if (it == between.end()) {
        // Contact with w is unchanged, only its endpoint moves.
        relink(cur);
        between.emplace(pair_key(s, w), cur);
        continue;
      }
      // w touches both: fuse into whichever edge sits earlier in the queue.
      const auto existing = it->second;
      const auto keep = entry_before(existing, cur) ? existing : cur;
      const auto drop = keep == existing ? cur : existing;
      if (edges[drop].hist == kInitialHistogram) histogram(keep).merge(rag.edges[drop].histogram);
      else histogram(keep).merge(fused[edges[drop].hist]);
      edges[keep].state = EdgeState::stale;
      edges[drop].state = EdgeState::deleted;
      if (keep == cur) {
        relink(cur);
        it->second = cur;
      }
    }
  }
  return history;
}

LabelVolume extract_segmentation(const LabelVolume& fragments, const MergeHistory& history, double threshold) {
  std::unordered_map<Label, std::uint64_t> index;
  std::vector<Label> labels;
  auto id = [&](Label l) {
    auto [it, fresh] = index.try_emplace(l, labels.size());
    if (fresh) labels.push_back(l);
    return it->second;
  };
  for (const auto& r : history) {
    if (!(r.score < threshold)) break;
    id(r.survivor);
    id(r.absorbed);
  }
  DisjointSets sets(labels.size());
  for (const auto& r : history) {
    if (!(r.score < threshold)) break;
    const auto s = sets.find(index[r.survivor]);
    const auto a = sets.find(index[r.absorbed]);
    if (s != a) sets.link_under(s, a);
  }
  LabelVolume out = fragments;
  for (auto& l : out.data) {
    if (l == 0) continue;
    auto it = index.find(l);
    if (it != index.end()) l = labels[sets.find(it->second)];
  }
  return out;
}

void write_history_csv(const MergeHistory& history, std::ostream& out) {
  out << "survivor,absorbed,score\n";
  char buf[64];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%.6f", r.score);
    out << r.survivor << ',' << r.absorbed << ',' << buf << '\n';
  }
}

void write_history_csv(const MergeHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string());
  write_history_csv(history, out);
}

MergeHistory read_history_csv(std::istream& in) {
  MergeHistory h;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("survivor", 0) == 0) continue;
    std::istringstream ls(line);
    MergeRecord r;
    char c1 = 0, c2 = 0;
    if (!(ls >> r.survivor >> c1 >> r.absorbed >> c2 >> r.score) || c1 != ',' || c2 != ',')
      throw Error("malformed merge history at line " + std::to_string(lineno));
    h.push_back(r);
  }
  return h;
}

MergeHistory read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_history_csv(in);
}

} // namespace mala
