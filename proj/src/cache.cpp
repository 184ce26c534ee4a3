// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include "frameind/cache.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <fstream>

#include "frameind/errors.hpp"
#include "json.hpp"

namespace frameind {

namespace {

constexpr char kMagic[4] = {'F', 'E', 'O', 'L'};
constexpr std::size_t kDimOffset = 6;        // after magic and version
constexpr std::size_t kFixedHeaderSize = 14;  // magic, version, dim, meta_len

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(const char* p) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(p[0]) |
                                    (static_cast<unsigned char>(p[1]) << 8));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

std::string encode_record(const EmbeddingRecord& record) {
  if (record.instance_id.size() > UINT16_MAX) throw DataError("cache: instance id too long");
  std::string out;
  out.reserve(2 + record.instance_id.size() + Digest::kSize + 4 * record.values.size() + 4);
  put_u16(out, static_cast<std::uint16_t>(record.instance_id.size()));
  out.append(record.instance_id);
  out.append(reinterpret_cast<const char*>(record.prompt_digest.bytes().data()), Digest::kSize);
  for (float f : record.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  put_u32(out, crc32(out));
  return out;
}

std::size_t record_size(std::size_t id_len, std::uint32_t dim) {
  return 2 + id_len + Digest::kSize + 4 * static_cast<std::size_t>(dim) + 4;
}

// Decodes a full record buffer (CRC included), verifying the checksum.
EmbeddingRecord decode_record(std::string_view bytes, std::uint32_t dim, const std::string& model,
                              std::uint64_t offset) {
  const std::uint16_t id_len = get_u16(bytes.data());
  if (bytes.size() != record_size(id_len, dim)) {
    throw CacheError("cache: malformed record at offset " + std::to_string(offset));
  }
  const std::uint32_t stored = get_u32(bytes.data() + bytes.size() - 4);
  if (crc32(bytes.substr(0, bytes.size() - 4)) != stored) {
    throw CacheError("cache: checksum mismatch in record at offset " + std::to_string(offset));
  }
  EmbeddingRecord record;
  record.model_id = model;
  record.instance_id.assign(bytes.data() + 2, id_len);
  Digest::Bytes digest{};
  std::memcpy(digest.data(), bytes.data() + 2 + id_len, Digest::kSize);
  record.prompt_digest = Digest(digest);
  record.values.resize(dim);
  const char* p = bytes.data() + 2 + id_len + Digest::kSize;
  for (std::uint32_t i = 0; i < dim; ++i) record.values[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  return record;
}

void write_all(int fd, std::string_view bytes, std::uint64_t offset) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::pwrite(fd, bytes.data() + done, bytes.size() - done,
                               static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw DataError(std::string("cache: write failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

void read_all(int fd, char* out, std::size_t size, std::uint64_t offset) {
  std::size_t done = 0;
  while (done < size) {
    const ssize_t n = ::pread(fd, out + done, size - done, static_cast<off_t>(offset + done));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw CacheError("cache: short read");
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace

// Sequential pass over an existing cache file.
struct CacheScanner {
  struct Header {
    std::uint32_t dim = 0;
    std::string model_id;
    std::uint64_t header_size = 0;
  };

  static Header read_header(std::istream& in, const std::filesystem::path& path) {
    char fixed[kFixedHeaderSize];
    if (!in.read(fixed, kFixedHeaderSize)) {
      throw CacheError("cache " + path.string() + ": truncated header");
    }
    if (std::memcmp(fixed, kMagic, 4) != 0) {
      throw CacheError("cache " + path.string() + ": bad magic bytes");
    }
    const std::uint16_t version = get_u16(fixed + 4);
    if (version != EmbeddingCache::kVersion) {
      throw CacheError("cache " + path.string() + ": unsupported version " +
                       std::to_string(version));
    }
    Header h;
    h.dim = get_u32(fixed + kDimOffset);
    const std::uint32_t meta_len = get_u32(fixed + 10);
    std::string meta(meta_len, '\0');
    if (!in.read(meta.data(), meta_len)) {
      throw CacheError("cache " + path.string() + ": truncated metadata");
    }
    try {
      h.model_id = nlohmann::json::parse(meta).at("model_id").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw CacheError("cache " + path.string() + ": bad metadata: " + e.what());
    }
    h.header_size = kFixedHeaderSize + meta_len;
    return h;
  }

  // Calls visit(record_offset, record_length, record) for every record and
  // returns the end offset.
  template <class Visit>
  static std::uint64_t scan(const std::filesystem::path& path, Header& header, Visit&& visit) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open cache " + path.string());
    header = read_header(in, path);
    std::uint64_t offset = header.header_size;
    std::string buffer;
    char len_bytes[2];
    while (in.read(len_bytes, 2)) {
      if (header.dim == 0) throw CacheError("cache " + path.string() + ": records without a dimension");
      const std::uint16_t id_len = get_u16(len_bytes);
      const std::size_t size = record_size(id_len, header.dim);
      buffer.assign(len_bytes, 2);
      buffer.resize(size);
      if (!in.read(buffer.data() + 2, static_cast<std::streamsize>(size - 2))) {
        throw CacheError("cache " + path.string() + ": truncated record at offset " +
                         std::to_string(offset));
      }
      visit(offset, static_cast<std::uint32_t>(size),
            decode_record(buffer, header.dim, header.model_id, offset));
      offset += size;
    }
    if (in.gcount() != 0) {
      throw CacheError("cache " + path.string() + ": truncated record at offset " +
                       std::to_string(offset));
    }
    return offset;
  }
};

EmbeddingCache::EmbeddingCache(std::filesystem::path path, int fd, std::string model_id,
                               std::uint32_t dim, std::uint64_t end)
    : path_(std::move(path)), fd_(fd), model_id_(std::move(model_id)), dim_(dim), end_(end) {}

EmbeddingCache::EmbeddingCache(EmbeddingCache&& other) noexcept
    : path_(std::move(other.path_)),
      fd_(std::exchange(other.fd_, -1)),
      model_id_(std::move(other.model_id_)),
      dim_(other.dim_),
      end_(other.end_),
      index_(std::move(other.index_)) {}

EmbeddingCache::~EmbeddingCache() {
  if (fd_ >= 0) ::close(fd_);
}

EmbeddingCache EmbeddingCache::open(const std::filesystem::path& path, const std::string& model_id) {
  if (model_id.empty()) throw std::invalid_argument("cache: empty model id");
  return open_impl(path, &model_id);
}

EmbeddingCache EmbeddingCache::open_existing(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("cache " + path.string() + " does not exist");
  return open_impl(path, nullptr);
}

EmbeddingCache EmbeddingCache::open_impl(const std::filesystem::path& path,
                                         const std::string* expected_model) {
  if (!std::filesystem::exists(path)) {
    const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_EXCL, 0644);
    if (fd < 0) throw DataError("cannot create cache " + path.string() + ": " + std::strerror(errno));
    const std::string meta = nlohmann::ordered_json{{"model_id", *expected_model}}.dump();
    std::string header(kMagic, 4);
    put_u16(header, kVersion);
    put_u32(header, 0);
    put_u32(header, static_cast<std::uint32_t>(meta.size()));
    header += meta;
    EmbeddingCache cache(path, fd, *expected_model, 0, 0);
    write_all(fd, header, 0);
    cache.end_ = header.size();
    return cache;
  }

  CacheScanner::Header header;
  std::unordered_map<Digest, Location, DigestHash> index;
  const std::uint64_t end = CacheScanner::scan(
      path, header, [&](std::uint64_t offset, std::uint32_t length, const EmbeddingRecord& r) {
        index[r.prompt_digest] = Location{offset, length};
      });
  if (expected_model != nullptr && header.model_id != *expected_model) {
    throw DataError("cache " + path.string() + " holds model '" + header.model_id +
                    "', not '" + *expected_model + "'");
  }
  const int fd = ::open(path.c_str(), O_RDWR);
  if (fd < 0) throw DataError("cannot open cache " + path.string() + ": " + std::strerror(errno));
  EmbeddingCache cache(path, fd, header.model_id, header.dim, end);
  cache.index_ = std::move(index);
  return cache;
}

void EmbeddingCache::validate(const std::filesystem::path& path) {
  CacheScanner::Header header;
  CacheScanner::scan(path, header, [](std::uint64_t, std::uint32_t, const EmbeddingRecord&) {});
}

std::uint32_t EmbeddingCache::dim() const {
  std::shared_lock lock(mutex_);
  return dim_;
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return index_.size();
}

bool EmbeddingCache::contains(const Digest& digest) const {
  std::shared_lock lock(mutex_);
  return index_.count(digest) != 0;
}

void EmbeddingCache::put(const EmbeddingRecord& record) {
  std::lock_guard writer(write_mutex_);
  if (record.model_id != model_id_) {
    throw DataError("cache holds model '" + model_id_ + "', cannot store '" + record.model_id + "'");
  }
  if (record.values.empty()) throw DataError("cache: empty embedding");
  std::uint32_t dim = 0;
  std::uint64_t end = 0;
  {
    std::shared_lock lock(mutex_);
    dim = dim_;
    end = end_;
  }
  if (dim != 0 && record.values.size() != dim) {
    throw DataError("cache dimension is " + std::to_string(dim) + ", record has " +
                    std::to_string(record.values.size()));
  }
  if (dim == 0) {
    dim = static_cast<std::uint32_t>(record.values.size());
    std::string field;
    put_u32(field, dim);
    write_all(fd_, field, kDimOffset);
  }
  const std::string bytes = encode_record(record);
  write_all(fd_, bytes, end);
  std::unique_lock lock(mutex_);
  dim_ = dim;
  index_[record.prompt_digest] = Location{end, static_cast<std::uint32_t>(bytes.size())};
  end_ = end + bytes.size();
}

std::optional<EmbeddingRecord> EmbeddingCache::get(std::string_view model_id,
                                                   const Digest& digest) const {
  if (model_id != model_id_) return std::nullopt;
  Location loc;
  std::uint32_t dim = 0;
  {
    std::shared_lock lock(mutex_);
    auto it = index_.find(digest);
    if (it == index_.end()) return std::nullopt;
    loc = it->second;
    dim = dim_;
  }
  std::string buffer(loc.length, '\0');
  read_all(fd_, buffer.data(), buffer.size(), loc.offset);
  return decode_record(buffer, dim, model_id_, loc.offset);
}

}  // namespace frameind
