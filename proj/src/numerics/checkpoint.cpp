// SPDX-License-Identifier: Apache-2.0
#include "pbgru/numerics/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <set>

#include "pbgru/numerics/errors.hpp"
#include "pbgru/numerics/io_util.hpp"

namespace pbgru {

namespace {

constexpr std::string_view kMagic = "PBGRUCK1";

template <typename T>
void put_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("checkpoint truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(std::span<const NamedTensor> params) {
  std::string out(kMagic);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) put_le<std::uint64_t>(out, d);
    for (double v : p.tensor.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::vector<CheckpointEntry> decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(kMagic.size()) != kMagic) throw DataError("not a checkpoint file (bad magic)");
  const auto count = r.get<std::uint32_t>();
  std::vector<CheckpointEntry> entries;
  std::set<std::string> seen;
  for (std::uint32_t k = 0; k < count; ++k) {
    CheckpointEntry e;
    e.name = std::string(r.take(r.get<std::uint32_t>()));
    if (!seen.insert(e.name).second) throw DataError("duplicate checkpoint entry '" + e.name + "'");
    const auto rank = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < rank; ++i) e.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    const std::size_t n = shape_numel(e.shape);
    e.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) e.values[i] = std::bit_cast<double>(r.get<std::uint64_t>());
    entries.push_back(std::move(e));
  }
  if (!r.done()) throw DataError("trailing bytes after checkpoint entries");
  return entries;
}

void write_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> params) {
  write_text_file(path, encode_checkpoint(params));
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_text_file(path));
}

void load_checkpoint_into(std::span<NamedTensor> params, const std::vector<CheckpointEntry>& entries) {
  if (params.size() != entries.size()) {
    throw DataError("checkpoint has " + std::to_string(entries.size()) + " entries, model expects " +
                    std::to_string(params.size()));
  }
  for (auto& p : params) {
    auto it = std::find_if(entries.begin(), entries.end(), [&](const CheckpointEntry& e) { return e.name == p.name; });
    if (it == entries.end()) throw DataError("checkpoint lacks parameter '" + p.name + "'");
    if (it->shape != p.tensor.shape()) {
      throw DataError("checkpoint shape " + shape_str(it->shape) + " for '" + p.name + "', model has " +
                      shape_str(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_values();
    std::copy(it->values.begin(), it->values.end(), dst.begin());
  }
}

}  // namespace pbgru
