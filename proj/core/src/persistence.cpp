#include "mcgi/persistence.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <zlib.h>

#include "mcgi/error.hpp"
#include "mcgi/log.hpp"

namespace mcgi {

namespace {

constexpr char kIndexMagic[4] = {'M', 'C', 'G', 'I'};
constexpr std::uint32_t kFlagAlphas = 1u << 0;
constexpr std::uint32_t kFlagUncapped = 1u << 1;

std::uint32_t crc(const unsigned char* data, std::size_t size) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(size)));
}

template <typename T>
void store(unsigned char* at, T value) {
  std::memcpy(at, &value, sizeof(T));
}

template <typename T>
T fetch(const unsigned char* at) {
  T value;
  std::memcpy(&value, at, sizeof(T));
  return value;
}

void encode_header(const IndexHeader& h, unsigned char* out) {
  std::memset(out, 0, kIndexHeaderSize);
  std::memcpy(out, kIndexMagic, 4);
  store<std::uint32_t>(out + 4, h.version);
  store<std::uint64_t>(out + 8, h.n);
  store<std::uint32_t>(out + 16, h.dim);
  store<std::uint32_t>(out + 20, static_cast<std::uint32_t>(h.elements));
  store<std::uint32_t>(out + 24, h.max_degree);
  store<std::uint32_t>(out + 28, h.slots);
  store<std::uint64_t>(out + 32, h.entry_point);
  store<std::uint32_t>(out + 40, h.block_size);
  store<std::uint32_t>(out + 44, (h.has_alphas ? kFlagAlphas : 0) |
                                     (h.degree_uncapped ? kFlagUncapped : 0));
  store<std::uint32_t>(out + 48, crc(out, 48));
}

IndexHeader decode_header(const unsigned char* in, std::size_t available) {
  if (available < kIndexHeaderSize) {
    throw FormatError(fmt::format("truncated index: header needs {} bytes, file has {}",
                                  kIndexHeaderSize, available));
  }
  if (std::memcmp(in, kIndexMagic, 4) != 0) throw FormatError("not an MCGI index (bad magic)");
  IndexHeader h;
  h.version = fetch<std::uint32_t>(in + 4);
  if (h.version != kIndexVersion) {
    throw FormatError(fmt::format("unsupported index version {} (expected {})", h.version,
                                  kIndexVersion));
  }
  if (fetch<std::uint32_t>(in + 48) != crc(in, 48)) {
    throw FormatError("index header checksum mismatch");
  }
  h.n = fetch<std::uint64_t>(in + 8);
  h.dim = fetch<std::uint32_t>(in + 16);
  const auto kind = fetch<std::uint32_t>(in + 20);
  if (kind > 1) throw FormatError(fmt::format("unknown element kind {}", kind));
  h.elements = static_cast<ElementKind>(kind);
  h.max_degree = fetch<std::uint32_t>(in + 24);
  h.slots = fetch<std::uint32_t>(in + 28);
  const auto entry = fetch<std::uint64_t>(in + 32);
  h.block_size = fetch<std::uint32_t>(in + 40);
  const auto flags = fetch<std::uint32_t>(in + 44);
  h.has_alphas = (flags & kFlagAlphas) != 0;
  h.degree_uncapped = (flags & kFlagUncapped) != 0;

  if (h.n == 0) throw FormatError("index holds no nodes");
  if (h.dim == 0) throw FormatError("index dimension is zero");
  if (h.n > kInvalidNode) throw FormatError(fmt::format("node count {} too large", h.n));
  if (entry >= h.n) throw FormatError(fmt::format("entry point {} outside [0, {})", entry, h.n));
  h.entry_point = static_cast<node_id>(entry);
  if (!std::has_single_bit(h.block_size) || h.block_size < kIndexHeaderSize ||
      h.record_size() > h.block_size) {
    throw FormatError(fmt::format("inconsistent block size {} for record size {}", h.block_size,
                                  h.record_size()));
  }
  return h;
}

struct DecodedRecord {
  double alpha = 0.0;
  std::vector<node_id> neighbors;
};

// Validates a node record and returns its adjacency; the vector is copied
// into `vector_out` when non-null.
DecodedRecord decode_record(const IndexHeader& h, node_id u, const unsigned char* rec,
                            float* vector_out) {
  const std::size_t size = h.record_size();
  if (fetch<std::uint32_t>(rec + size - 8) != crc(rec, size - 8)) {
    throw FormatError(fmt::format("checksum mismatch in record of node {}", u));
  }
  const auto degree = fetch<std::uint32_t>(rec);
  if (degree > h.slots) {
    throw FormatError(fmt::format("node {} claims degree {} with only {} slots", u, degree, h.slots));
  }
  DecodedRecord out;
  out.alpha = fetch<double>(rec + 8);
  out.neighbors.resize(degree);
  const unsigned char* ids = rec + 16;
  for (std::uint32_t i = 0; i < h.slots; ++i) {
    const auto id = fetch<std::uint64_t>(ids + 8 * i);
    if (i < degree) {
      if (id >= h.n || id == u) {
        throw FormatError(fmt::format("node {} has invalid neighbor id {}", u, id));
      }
      out.neighbors[i] = static_cast<node_id>(id);
    } else if (id != kEmptySlot) {
      throw FormatError(fmt::format("node {} has a non-sentinel unused slot {}", u, i));
    }
  }
  if (vector_out) std::memcpy(vector_out, ids + 8 * h.slots, 4 * std::size_t{h.dim});
  return out;
}

}  // namespace

std::size_t IndexHeader::record_size() const { return node_record_size(dim, slots); }

std::size_t node_record_size(std::size_t dim, std::size_t slots) {
  return 16 + 8 * slots + 4 * dim + 8;
}

std::uint32_t required_block_size(std::size_t dim, std::size_t slots) {
  const std::size_t need = std::max(node_record_size(dim, slots), kIndexHeaderSize);
  return static_cast<std::uint32_t>(std::bit_ceil(need));
}

void save_index(const Graph& graph, const VectorDataset& base, const MappedAlphas& alphas,
                const std::filesystem::path& path, std::uint32_t block_size) {
  if (graph.n == 0) throw ParameterError("refusing to save an empty graph");
  graph.validate();
  base.validate();
  if (base.count != graph.n) {
    throw ParameterError(fmt::format("graph has {} nodes but dataset {} rows", graph.n, base.count));
  }
  if (!alphas.values.empty() && alphas.size() != graph.n) {
    throw ParameterError(fmt::format("{} alphas for {} nodes", alphas.size(), graph.n));
  }
  if (!std::has_single_bit(block_size)) {
    throw ParameterError(fmt::format("block size {} is not a power of two", block_size));
  }

  IndexHeader h;
  h.n = graph.n;
  h.dim = static_cast<std::uint32_t>(base.dim);
  h.elements = base.elements;
  h.max_degree = graph.max_degree;
  h.slots = graph.degree_uncapped
                ? static_cast<std::uint32_t>(std::max<std::size_t>(graph.max_out_degree(), 1))
                : graph.max_degree;
  h.entry_point = graph.entry_point;
  h.block_size = block_size;
  h.has_alphas = !alphas.values.empty();
  h.degree_uncapped = graph.degree_uncapped;
  const std::size_t rsize = h.record_size();
  if (rsize > block_size || block_size < kIndexHeaderSize) {
    throw ParameterError(fmt::format(
        "node record needs {} bytes (dim {}, {} neighbor slots) but block size is {}; "
        "use a block size >= {}",
        rsize, h.dim, h.slots, block_size, required_block_size(h.dim, h.slots)));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  std::vector<unsigned char> block(block_size);
  encode_header(h, block.data());
  out.write(reinterpret_cast<const char*>(block.data()), block_size);
  for (std::size_t u = 0; u < graph.n; ++u) {
    std::fill(block.begin(), block.end(), 0);
    const auto& list = graph.out_neighbors[u];
    store<std::uint32_t>(block.data(), static_cast<std::uint32_t>(list.size()));
    store<double>(block.data() + 8, h.has_alphas ? alphas[u] : 0.0);
    for (std::uint32_t i = 0; i < h.slots; ++i) {
      store<std::uint64_t>(block.data() + 16 + 8 * i, i < list.size() ? list[i] : kEmptySlot);
    }
    std::memcpy(block.data() + 16 + 8 * h.slots, base.data(u), 4 * base.dim);
    store<std::uint32_t>(block.data() + rsize - 8, crc(block.data(), rsize - 8));
    out.write(reinterpret_cast<const char*>(block.data()), block_size);
  }
  out.flush();
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

namespace {

// Header plus a size check; returns the header and the real file size.
std::pair<IndexHeader, std::uint64_t> inspect(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  const auto size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  unsigned char raw[kIndexHeaderSize] = {};
  const auto got = static_cast<std::size_t>(std::min<std::uint64_t>(size, kIndexHeaderSize));
  in.read(reinterpret_cast<char*>(raw), static_cast<std::streamsize>(got));
  IndexHeader h = decode_header(raw, got);
  if (size < h.file_size()) {
    const std::uint64_t first_bad = size < h.block_size ? 0 : (size - h.block_size) / h.block_size;
    if (size < h.block_size) {
      throw FormatError(fmt::format("truncated index: header block ends at byte offset {}, "
                                    "file size {}",
                                    h.block_size, size));
    }
    throw FormatError(fmt::format(
        "truncated index: record of node {} at byte offset {} extends past end of file "
        "(size {}, expected {})",
        first_bad, h.record_offset(static_cast<node_id>(first_bad)), size, h.file_size()));
  }
  return {h, size};
}

}  // namespace

IndexHeader read_index_header(const std::filesystem::path& path) { return inspect(path).first; }

LoadedIndex load_index(const std::filesystem::path& path) {
  auto [h, size] = inspect(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));

  LoadedIndex out;
  out.header = h;
  out.graph.n = h.n;
  out.graph.entry_point = h.entry_point;
  out.graph.max_degree = h.max_degree;
  out.graph.degree_uncapped = h.degree_uncapped;
  out.graph.out_neighbors.resize(h.n);
  out.base.count = h.n;
  out.base.dim = h.dim;
  out.base.elements = h.elements;
  out.base.values.resize(h.n * h.dim);
  if (h.has_alphas) out.alphas.values.resize(h.n);

  std::vector<unsigned char> block(h.block_size);
  for (std::uint64_t u = 0; u < h.n; ++u) {
    in.seekg(static_cast<std::streamoff>(h.record_offset(static_cast<node_id>(u))));
    if (!in.read(reinterpret_cast<char*>(block.data()), h.block_size)) {
      throw FormatError(fmt::format("short read of node {} at byte offset {}", u,
                                    h.record_offset(static_cast<node_id>(u))));
    }
    auto rec = decode_record(h, static_cast<node_id>(u), block.data(),
                             out.base.values.data() + u * h.dim);
    out.graph.out_neighbors[u] = std::move(rec.neighbors);
    if (h.has_alphas) out.alphas.values[u] = rec.alpha;
  }
  try {
    out.graph.validate();
  } catch (const ParameterError& e) {
    throw FormatError(fmt::format("index adjacency is invalid: {}", e.what()));
  }
  return out;
}

namespace {

struct AlignedFree {
  void operator()(unsigned char* p) const { std::free(p); }
};
using AlignedBuffer = std::unique_ptr<unsigned char, AlignedFree>;

AlignedBuffer aligned_block(std::size_t size) {
  void* p = nullptr;
  if (posix_memalign(&p, std::max<std::size_t>(size, 512), size) != 0) throw std::bad_alloc();
  return AlignedBuffer(static_cast<unsigned char*>(p));
}

}  // namespace

DiskIndex::DiskIndex(const std::filesystem::path& path, ReadMode mode) : path_(path) {
  header_ = inspect(path).first;

  if (mode == ReadMode::unbuffered) {
#ifdef O_DIRECT
    if (header_.block_size % 512 != 0) {
      warn(fmt::format("block size {} is not a multiple of 512; unbuffered reads unavailable, "
                       "reading {} buffered",
                       header_.block_size, path.string()));
    } else {
      fd_ = ::open(path.c_str(), O_RDONLY | O_DIRECT);
      if (fd_ < 0) {
        warn(fmt::format("O_DIRECT refused for {} ({}); reading buffered", path.string(),
                         std::strerror(errno)));
      } else {
        auto probe = aligned_block(header_.block_size);
        if (::pread(fd_, probe.get(), header_.block_size, 0) !=
            static_cast<ssize_t>(header_.block_size)) {
          warn(fmt::format("unbuffered read failed on {} ({}); reading buffered", path.string(),
                           std::strerror(errno)));
          ::close(fd_);
          fd_ = -1;
        } else {
          direct_ = true;
        }
      }
    }
#else
    warn("this platform has no O_DIRECT; reading buffered");
#endif
  }
  if (fd_ < 0) {
    fd_ = ::open(path.c_str(), O_RDONLY);
    if (fd_ < 0) {
      throw IoError(fmt::format("cannot open {}: {}", path.string(), std::strerror(errno)));
    }
  }

  vectors_.count = header_.n;
  vectors_.dim = header_.dim;
  vectors_.elements = header_.elements;
  vectors_.values.resize(header_.n * header_.dim);
  auto buffer = aligned_block(header_.block_size);
  for (std::uint64_t u = 0; u < header_.n; ++u) {
    read_block(static_cast<node_id>(u), buffer.get());
    decode_record(header_, static_cast<node_id>(u), buffer.get(),
                  vectors_.values.data() + u * header_.dim);
  }
}

DiskIndex::~DiskIndex() {
  if (fd_ >= 0) ::close(fd_);
}

void DiskIndex::read_block(node_id u, unsigned char* buffer) const {
  const auto offset = static_cast<off_t>(header_.record_offset(u));
  std::size_t done = 0;
  while (done < header_.block_size) {
    const ssize_t got = ::pread(fd_, buffer + done, header_.block_size - done,
                                offset + static_cast<off_t>(done));
    if (got < 0 && errno == EINTR) continue;
    if (got <= 0) {
      throw IoError(fmt::format("read of node {} at byte offset {} failed: {}", u, offset,
                                got < 0 ? std::strerror(errno) : "end of file"));
    }
    done += static_cast<std::size_t>(got);
  }
}

void DiskIndex::neighbors(node_id u, std::vector<node_id>& out) const {
  if (u >= header_.n) throw ParameterError(fmt::format("node {} outside the index", u));
  thread_local AlignedBuffer buffer;
  thread_local std::size_t buffer_size = 0;
  if (buffer_size != header_.block_size) {
    buffer = aligned_block(header_.block_size);
    buffer_size = header_.block_size;
  }
  read_block(u, buffer.get());
  block_reads_.fetch_add(1, std::memory_order_relaxed);
  out = decode_record(header_, u, buffer.get(), nullptr).neighbors;
}

}  // namespace mcgi
