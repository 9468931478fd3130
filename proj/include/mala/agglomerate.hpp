#pragma once

// Hierarchical agglomeration of watershed fragments over a region adjacency
// graph (RAG).
//
// Initial edge scores (1 - max boundary affinity) are discretised into k bins.
// A merged edge keeps the histogram of all initial scores beneath it, so
// quantile and mean merge functions cost O(k) regardless of history. The
// bucket-queue agglomeration marks fused edges stale and only rescores them
// when they are popped; the naive variant uses a binary heap and rescores
// eagerly. Both pop equal-bin edges in FIFO insertion order and produce
// identical merge histories.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mala/volume.hpp"

namespace mala {

inline constexpr std::uint32_t kDefaultBins = 256;

// min(floor(score * bins), bins - 1); throws for scores outside [0,1].
std::uint32_t bin_of(double score, std::uint32_t bins = kDefaultBins);
// Representative score of a bin: its centre (i + 0.5) / bins.
double bin_value(std::uint32_t bin, std::uint32_t bins = kDefaultBins);

// Counts of discretised initial-edge scores. Stored sparsely as sorted
// (bin, count) pairs; conceptually a k-bin counter array.
class ScoreHistogram {
public:
  ScoreHistogram() = default;
  explicit ScoreHistogram(std::uint32_t bin, std::uint64_t count = 1) { add(bin, count); }

  void add(std::uint32_t bin, std::uint64_t count = 1);
  void merge(const ScoreHistogram& other);

  std::uint64_t count(std::uint32_t bin) const;
  std::uint64_t total() const { return total_; }
  bool empty() const { return total_ == 0; }
  const std::vector<std::pair<std::uint32_t, std::uint64_t>>& entries() const { return entries_; }

  bool operator==(const ScoreHistogram&) const = default;

private:
  std::vector<std::pair<std::uint32_t, std::uint64_t>> entries_;
  std::uint64_t total_ = 0;
};

struct MergeFunction {
  enum class Kind { quantile, mean };
  Kind kind = Kind::quantile;
  double q = 0.5;

  static MergeFunction quantile(double q);
  static MergeFunction mean() { return {Kind::mean, 0.0}; }
  // "quantile:0.5" or "mean".
  static MergeFunction parse(const std::string& text);
  std::string str() const;
};

// quantile(q): smallest bin whose cumulative count reaches ceil(q * total).
// mean: bin of the mean of bin centres, computed exactly in integers.
std::uint32_t merge_score(const ScoreHistogram& h, const MergeFunction& f, std::uint32_t bins = kDefaultBins);

struct RagEdge {
  std::uint32_t u = 0; // node indices, u < v
  std::uint32_t v = 0;
  ScoreHistogram histogram;
};

struct Rag {
  std::uint32_t bins = kDefaultBins;
  std::vector<Label> labels;         // node index -> fragment label, ascending
  std::vector<std::uint64_t> sizes;  // node index -> voxel count
  std::vector<RagEdge> edges;        // ascending by (u, v)

  std::size_t node_count() const { return labels.size(); }
  std::size_t edge_count() const { return edges.size(); }
  // Throws if the graph is malformed (self loops, duplicates, unsorted, bad bins).
  void validate() const;
};

// One RAG edge per pair of distinct nonzero fragments that touch; its initial
// score is 1 - the largest affinity across their contact.
Rag build_rag(const LabelVolume& fragments, const AffinityVolume& aff, std::uint32_t bins = kDefaultBins);

struct MergeRecord {
  Label survivor = 0;
  Label absorbed = 0;
  double score = 0.0;
  bool operator==(const MergeRecord&) const = default;
};

using MergeHistory = std::vector<MergeRecord>;

// Merges edges in ascending score until the lowest remaining score reaches
// `threshold`. The survivor of a merge is the node with more voxels (ties:
// smaller label).
MergeHistory agglomerate(const Rag& rag, const MergeFunction& f, double threshold);
MergeHistory naive_agglomerate(const Rag& rag, const MergeFunction& f, double threshold);

// Replays all records with score < threshold and relabels every fragment by
// its surviving representative.
LabelVolume extract_segmentation(const LabelVolume& fragments, const MergeHistory& history, double threshold);

void write_history_csv(const MergeHistory& history, std::ostream& out);
void write_history_csv(const MergeHistory& history, const std::filesystem::path& path);
MergeHistory read_history_csv(std::istream& in);
MergeHistory read_history_csv(const std::filesystem::path& path);

} // namespace mala
