#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

namespace mala {

// Disjoint-set forest with union by size and path halving.
class DisjointSets {
public:
  explicit DisjointSets(std::size_t n = 0) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::uint64_t{0});
  }

  std::size_t count() const { return parent_.size(); }

  std::uint64_t find(std::uint64_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  std::uint64_t size(std::uint64_t root) const { return size_[root]; }

  // Links two roots; the larger tree becomes the new root (ties: `a`).
  std::uint64_t link(std::uint64_t a, std::uint64_t b) {
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return a;
  }

  // Links root `absorbed` under root `survivor` regardless of size.
  void link_under(std::uint64_t survivor, std::uint64_t absorbed) {
    parent_[absorbed] = survivor;
    size_[survivor] += size_[absorbed];
  }

private:
  std::vector<std::uint64_t> parent_;
  std::vector<std::uint64_t> size_;
};

} // namespace mala
