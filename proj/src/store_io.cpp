#include <bit>
#include <cstring>
#include <fstream>

#include "cfq/embedding.hpp"
#include "cfq/error.hpp"

namespace cfq {
namespace {

constexpr char kMagic[4] = {'C', 'F', 'Q', 'E'};
constexpr std::uint16_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "store i/o assumes a little-endian host");

template <typename T>
void write_le(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw CfqError(ErrorKind::truncated,
                   std::string("file ends inside ") + what);
  }
  return value;
}

}  // namespace

void save_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CfqError(ErrorKind::io, "cannot write '" + path.string() + "'");
  }
  out.write(kMagic, sizeof(kMagic));
  write_le<std::uint16_t>(out, kFormatVersion);
  write_le<std::uint32_t>(out, store.dimension());
  write_le<std::uint64_t>(out, store.size());
  for (const auto& id : store.ids()) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  const auto& data = store.data();
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) {
    throw CfqError(ErrorKind::io, "short write to '" + path.string() + "'");
  }
}

EmbeddingStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CfqError(ErrorKind::io, "cannot open '" + path.string() + "'");
  }
  char magic[4] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CfqError(ErrorKind::format,
                   "'" + path.string() + "' is not an embedding store file");
  }
  auto version = read_le<std::uint16_t>(in, "header");
  if (version != kFormatVersion) {
    throw CfqError(ErrorKind::format,
                   "unsupported store format version " + std::to_string(version));
  }
  auto dimension = read_le<std::uint32_t>(in, "header");
  auto count = read_le<std::uint64_t>(in, "header");
  if (dimension == 0) {
    throw CfqError(ErrorKind::format, "store dimension is zero");
  }

  EmbeddingStore store;
  store.dimension_ = dimension;
  store.ids_.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto length = read_le<std::uint32_t>(in, "id table");
    std::string id(length, '\0');
    in.read(id.data(), length);
    if (!in) {
      throw CfqError(ErrorKind::truncated, "file ends inside id table");
    }
    if (!store.ids_.empty()) {
      if (id == store.ids_.back()) {
        throw CfqError(ErrorKind::duplicate,
                       "id '" + id + "' appears twice in id table");
      }
      if (id < store.ids_.back()) {
        throw CfqError(ErrorKind::format, "id table is not in ascending order");
      }
    }
    store.index_.emplace(id, store.ids_.size());
    store.ids_.push_back(std::move(id));
  }

  store.data_.resize(static_cast<std::size_t>(count) * dimension);
  in.read(reinterpret_cast<char*>(store.data_.data()),
          static_cast<std::streamsize>(store.data_.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) !=
      store.data_.size() * sizeof(float)) {
    throw CfqError(ErrorKind::truncated, "file ends inside vector block");
  }
  in.peek();
  if (!in.eof()) {
    throw CfqError(ErrorKind::format, "trailing bytes after vector block");
  }
  return store;
}

}  // namespace cfq
