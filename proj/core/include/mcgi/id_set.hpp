#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mcgi/types.hpp"

namespace mcgi {

// Open-addressing set of node ids. One flat table, no per-element
// allocation; kInvalidNode marks empty slots and cannot be stored.
class IdSet {
 public:
  explicit IdSet(std::size_t expected = 64) { rehash(capacity_for(expected)); }

  // True when id was not present.
  bool insert(node_id id) {
    if (2 * (size_ + 1) > slots_.size()) rehash(slots_.size() * 2);
    return place(id);
  }
  bool contains(node_id id) const {
    for (std::size_t i = hash(id);; i = (i + 1) & mask_) {
      if (slots_[i] == id) return true;
      if (slots_[i] == kInvalidNode) return false;
    }
  }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

 private:
  static std::size_t capacity_for(std::size_t n) {
    std::size_t c = 16;
    while (c < 2 * n) c *= 2;
    return c;
  }
  std::size_t hash(node_id id) const {
    return static_cast<std::size_t>((static_cast<std::uint64_t>(id) * 0x9E3779B97F4A7C15ull) >> 32) &
           mask_;
  }
  bool place(node_id id) {
    for (std::size_t i = hash(id);; i = (i + 1) & mask_) {
      if (slots_[i] == id) return false;
      if (slots_[i] == kInvalidNode) {
        slots_[i] = id;
        ++size_;
        return true;
      }
    }
  }
  void rehash(std::size_t capacity) {
    std::vector<node_id> old = std::move(slots_);
    slots_.assign(capacity, kInvalidNode);
    mask_ = capacity - 1;
    size_ = 0;
    for (node_id id : old) {
      if (id != kInvalidNode) place(id);
    }
  }

  std::vector<node_id> slots_;
  std::size_t mask_ = 0;
  std::size_t size_ = 0;
};

}  // namespace mcgi
