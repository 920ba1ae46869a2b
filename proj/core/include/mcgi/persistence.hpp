#pragma once

// On-disk index layout (version 1, little-endian throughout):
//
//   block 0            header, zero-padded to block_size
//   block 1 + u        record of node u, zero-padded to block_size
//
// Header (56 bytes):
//   0  char[4]  "MCGI"
//   4  u32      version
//   8  u64      n
//   16 u32      dim
//   20 u32      element kind (0 float32, 1 uint8)
//   24 u32      max_degree (R used for the build)
//   28 u32      neighbor slots per record
//   32 u64      entry point
//   40 u32      block_size (power of two)
//   44 u32      flags (bit 0 has_alphas, bit 1 degree_uncapped)
//   48 u32      CRC-32 of bytes [0, 48)
//   52 u32      reserved, zero
//
// Node record:
//   0            u32    degree
//   4            u32    reserved, zero
//   8            f64    alpha (0 when the index has no alphas)
//   16           u64[slots] neighbor ids, unused slots = 2^64 - 1
//   16+8*slots   f32[dim]   vector (uint8 data stored widened)
//   ...          u32    CRC-32 of the preceding record bytes
//   ...          u32    reserved, zero

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "mcgi/dataset.hpp"
#include "mcgi/graph.hpp"
#include "mcgi/lid.hpp"
#include "mcgi/search.hpp"

namespace mcgi {

inline constexpr std::uint32_t kIndexVersion = 1;
inline constexpr std::uint32_t kDefaultBlockSize = 4096;
inline constexpr std::uint64_t kEmptySlot = ~std::uint64_t{0};
inline constexpr std::size_t kIndexHeaderSize = 56;

struct IndexHeader {
  std::uint32_t version = kIndexVersion;
  std::uint64_t n = 0;
  std::uint32_t dim = 0;
  ElementKind elements = ElementKind::float32;
  std::uint32_t max_degree = 0;
  std::uint32_t slots = 0;
  node_id entry_point = kInvalidNode;
  std::uint32_t block_size = kDefaultBlockSize;
  bool has_alphas = false;
  bool degree_uncapped = false;

  std::size_t record_size() const;
  std::uint64_t record_offset(node_id u) const {
    return static_cast<std::uint64_t>(block_size) * (1 + static_cast<std::uint64_t>(u));
  }
  std::uint64_t file_size() const { return static_cast<std::uint64_t>(block_size) * (1 + n); }
};

std::size_t node_record_size(std::size_t dim, std::size_t slots);
// Smallest power of two holding both the header and one node record.
std::uint32_t required_block_size(std::size_t dim, std::size_t slots);

// Empty `alphas` writes an index without per-node alphas. Throws
// ParameterError naming the required block size when a record does not fit.
void save_index(const Graph& graph, const VectorDataset& base, const MappedAlphas& alphas,
                const std::filesystem::path& path,
                std::uint32_t block_size = kDefaultBlockSize);

struct LoadedIndex {
  IndexHeader header;
  Graph graph;
  VectorDataset base;
  MappedAlphas alphas;
};

LoadedIndex load_index(const std::filesystem::path& path);
IndexHeader read_index_header(const std::filesystem::path& path);

enum class ReadMode { buffered, unbuffered };

// Disk-resident adjacency: every neighbors() call reads exactly one block
// with pread(). Routing distances use an in-memory copy of the vectors taken
// at open time (standing in for the compressed in-memory codes of a
// production disk index), so results match in-memory search exactly.
// Safe for any number of concurrent readers.
class DiskIndex final : public AdjacencySource {
 public:
  // Unbuffered mode asks the OS to bypass its page cache (O_DIRECT); where
  // that is refused it warns and reads buffered.
  DiskIndex(const std::filesystem::path& path, ReadMode mode);
  ~DiskIndex() override;
  DiskIndex(const DiskIndex&) = delete;
  DiskIndex& operator=(const DiskIndex&) = delete;

  std::size_t size() const override { return header_.n; }
  node_id entry_point() const override { return header_.entry_point; }
  void neighbors(node_id u, std::vector<node_id>& out) const override;

  const VectorDataset& vectors() const { return vectors_; }
  const IndexHeader& header() const { return header_; }
  bool unbuffered() const { return direct_; }
  std::uint64_t block_reads() const { return block_reads_.load(std::memory_order_relaxed); }

 private:
  void read_block(node_id u, unsigned char* buffer) const;

  std::filesystem::path path_;
  IndexHeader header_;
  int fd_ = -1;
  bool direct_ = false;
  VectorDataset vectors_;
  mutable std::atomic<std::uint64_t> block_reads_{0};
};

}  // namespace mcgi
