#pragma once

// Binary container shared by checkpoints and datasets:
//   4-byte magic | u64 little-endian header length | JSON header | blobs.
// Blob offsets in the header are relative to the first byte after the JSON.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ffino/core/error.hpp"

namespace ffino::io {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

using json = nlohmann::json;

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

/// Appends float32 values to a blob buffer; returns the byte offset used.
template <typename T>
std::uint64_t append_f32(std::string& blobs, const T* values, std::size_t count) {
  const std::uint64_t offset = blobs.size();
  blobs.resize(blobs.size() + count * sizeof(float));
  char* dst = blobs.data() + offset;
  for (std::size_t i = 0; i < count; ++i) {
    const float f = static_cast<float>(values[i]);
    std::memcpy(dst + i * sizeof(float), &f, sizeof(float));
  }
  return offset;
}

inline void write_container(const std::string& path, const char (&magic)[5], const json& header,
                            const std::string& blobs) {
  const std::string text = header.dump();
  std::string head(magic, 4);
  put_u64(head, text.size());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(head.data(), static_cast<std::streamsize>(head.size()));
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  f.write(blobs.data(), static_cast<std::streamsize>(blobs.size()));
  if (!f) throw IoError("write to '" + path + "' failed");
}

struct Container {
  json header;
  std::vector<char> blobs;

  /// Copies `count` float32 values starting at byte `offset` of the blob area.
  template <typename T>
  std::vector<T> read_f32(std::uint64_t offset, std::size_t count, const std::string& what) const {
    if (offset > blobs.size() || count * sizeof(float) > blobs.size() - offset) {
      throw IoError("blob '" + what + "' at offset " + std::to_string(offset) + " with " + std::to_string(count) +
                    " floats runs past the end of the data (" + std::to_string(blobs.size()) + " bytes)");
    }
    std::vector<T> out(count);
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, blobs.data() + offset + i * sizeof(float), sizeof(float));
      out[i] = static_cast<T>(f);
    }
    return out;
  }
};

inline Container read_container(const std::string& path, const char (&magic)[5]) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  char head[12];
  f.read(head, 12);
  if (f.gcount() != 12) throw IoError("'" + path + "' is truncated: missing the 12-byte preamble");
  if (std::memcmp(head, magic, 4) != 0) {
    throw IoError("'" + path + "' has magic '" + std::string(head, 4) + "', expected '" + magic + "'");
  }
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(static_cast<unsigned char>(head[4 + i])) << (8 * i);
  f.seekg(0, std::ios::end);
  const auto total = static_cast<std::uint64_t>(f.tellg());
  if (len > total - 12) {
    throw IoError("'" + path + "' is truncated: header claims " + std::to_string(len) + " bytes at offset 12, file has " +
                  std::to_string(total));
  }
  f.seekg(12);
  std::string text(len, '\0');
  f.read(text.data(), static_cast<std::streamsize>(len));
  Container c;
  try {
    c.header = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError("'" + path + "' has a malformed header at offset 12: " + e.what());
  }
  c.blobs.resize(total - 12 - len);
  f.read(c.blobs.data(), static_cast<std::streamsize>(c.blobs.size()));
  if (!f) throw IoError("read of '" + path + "' failed");
  return c;
}

}  // namespace ffino::io
