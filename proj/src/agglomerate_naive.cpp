// Comparison-heap agglomeration with eager rescoring.
//
// Fused edges are rescored the moment they are fused. To reproduce the
// bucket queue's pop order exactly, every heap key records where the lazy
// queue would hold the edge: (bin, initial edge id) for entries present from
// the start, or (bin, previous entry) for an entry re-inserted when a stale
// edge was popped. Re-inserted entries of a bin follow its initial ones and
// are ordered among themselves by when their previous entry was popped, which
// is the order of the previous entries' keys.

#include <map>
#include <memory>
#include <queue>
#include <stdexcept>

#include "mala/agglomerate.hpp"

namespace mala {
namespace {

struct QueueKey {
  std::uint32_t bin;
  std::uint32_t edge;                     // initial entries only
  std::shared_ptr<const QueueKey> before; // set for re-inserted entries
};
using KeyPtr = std::shared_ptr<const QueueKey>;

bool key_less(const QueueKey* a, const QueueKey* b) {
  while (true) {
    if (a->bin != b->bin) return a->bin < b->bin;
    const bool a_initial = !a->before;
    const bool b_initial = !b->before;
    if (a_initial != b_initial) return a_initial;
    if (a_initial) return a->edge < b->edge;
    a = a->before.get();
    b = b->before.get();
  }
}

struct NaiveEdge {
  std::uint32_t u;
  std::uint32_t v;
  ScoreHistogram hist;
  std::uint32_t bin; // always current
  KeyPtr entry;      // where the lazy queue holds this edge
  bool stale = false;
  bool alive = true;
  std::uint32_t version = 0;
};

struct HeapItem {
  KeyPtr key;
  std::uint32_t edge;
  std::uint32_t version;
};

struct HeapOrder {
  bool operator()(const HeapItem& a, const HeapItem& b) const { return key_less(b.key.get(), a.key.get()); }
};

} // namespace

MergeHistory naive_agglomerate(const Rag& rag, const MergeFunction& f, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error("threshold must lie in [0,1]");
  const auto bins = rag.bins;
  std::vector<std::uint64_t> size = rag.sizes;
  std::vector<std::map<std::uint32_t, std::uint32_t>> adj(rag.node_count());
  std::vector<NaiveEdge> edges(rag.edge_count());
  std::priority_queue<HeapItem, std::vector<HeapItem>, HeapOrder> heap;

  auto effective_key = [&](const NaiveEdge& e) -> KeyPtr {
    if (!e.stale) return e.entry;
    return std::make_shared<const QueueKey>(QueueKey{e.bin, 0, e.entry});
  };

  for (std::uint32_t i = 0; i < rag.edge_count(); ++i) {
    const auto& re = rag.edges[i];
    auto& e = edges[i];
    e.u = re.u;
    e.v = re.v;
    e.hist = re.histogram;
    e.bin = merge_score(e.hist, f, bins);
    e.entry = std::make_shared<const QueueKey>(QueueKey{e.bin, i, nullptr});
    heap.push({e.entry, i, 0});
    adj[e.u][e.v] = i;
    adj[e.v][e.u] = i;
  }

  MergeHistory history;
  while (!heap.empty()) {
    const HeapItem top = heap.top();
    auto& e = edges[top.edge];
    if (!e.alive || top.version != e.version) {
      heap.pop();
      continue;
    }
    const double score = bin_value(top.key->bin, bins);
    if (score >= threshold) break;
    heap.pop();
    if (!history.empty() && score < history.back().score) throw std::logic_error("merge scores decreased");
    const QueueKey* popped = top.key.get();

    // The lazy queue has already re-inserted every stale entry that sorts
    // before the current pop.
    auto settle = [&](NaiveEdge& x) {
      if (x.stale && key_less(x.entry.get(), popped)) {
        x.entry = effective_key(x);
        x.stale = false;
      }
    };

    auto s = e.u;
    auto a = e.v;
    if (size[a] > size[s] || (size[a] == size[s] && a < s)) std::swap(s, a);
    history.push_back({rag.labels[s], rag.labels[a], score});
    e.alive = false;
    size[s] += size[a];
    adj[s].erase(a);
    adj[a].erase(s);

    for (const auto& [w, id] : adj[a]) {
      adj[w].erase(a);
      auto& moved = edges[id];
      auto it = adj[s].find(w);
      if (it == adj[s].end()) {
        (moved.u == a ? moved.u : moved.v) = s;
        adj[s][w] = id;
        adj[w][s] = id;
        continue;
      }
      auto& existing = edges[it->second];
      settle(existing);
      settle(moved);
      const bool keep_existing = key_less(existing.entry.get(), moved.entry.get());
      auto& keep = keep_existing ? existing : moved;
      auto& drop = keep_existing ? moved : existing;
      const auto keep_id = keep_existing ? it->second : id;
      keep.hist.merge(drop.hist);
      keep.bin = merge_score(keep.hist, f, bins);
      keep.stale = true;
      ++keep.version;
      heap.push({effective_key(keep), keep_id, keep.version});
      drop.alive = false;
      ++drop.version;
      if (!keep_existing) {
        (moved.u == a ? moved.u : moved.v) = s;
        it->second = id;
        adj[w][s] = id;
      }
    }
    adj[a].clear();
  }
  return history;
}

} // namespace mala
