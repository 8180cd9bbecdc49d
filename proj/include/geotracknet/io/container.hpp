#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "geotracknet/core/errors.hpp"
#include "json.hpp"

namespace geotracknet::io {

// All on-disk artifacts (track store, checkpoint, cell map) share one
// container layout:
//
//   bytes 0..7   ASCII magic identifying the file kind
//   bytes 8..15  little-endian u64: JSON header length in bytes
//   header       UTF-8 JSON document
//   payload      raw little-endian binary described by the header
//
// Doubles in payloads are IEEE-754 binary64, little-endian, so round trips
// are bitwise exact on the supported (little-endian) hosts.
struct Container {
  nlohmann::json header;
  std::vector<std::uint8_t> payload;
};

inline void write_u64_le(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), 8);
}

inline std::uint64_t read_u64_le(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

inline void write_container(const std::string& path, const std::string& magic8,
                            const Container& c) {
  if (magic8.size() != 8) throw IoError("container: magic must be 8 bytes");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("container: cannot write '" + path + "'");
  const std::string header = c.header.dump();
  out.write(magic8.data(), 8);
  write_u64_le(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(c.payload.data()),
            static_cast<std::streamsize>(c.payload.size()));
  if (!out) throw IoError("container: failed writing '" + path + "'");
}

inline Container read_container(const std::string& path, const std::string& magic8) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("container: cannot open '" + path + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), 8);
  if (!in || std::memcmp(magic.data(), magic8.data(), 8) != 0)
    throw DataError("container: '" + path + "' is not a " + magic8 + " file");
  const std::uint64_t hlen = read_u64_le(in);
  std::string header(hlen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw DataError("container: truncated header in '" + path + "'");
  Container c;
  c.header = nlohmann::json::parse(header);
  c.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return c;
}

// Append doubles to a payload as little-endian binary64.
inline void append_doubles(std::vector<std::uint8_t>& payload, const double* values,
                           std::size_t count) {
  const std::size_t at = payload.size();
  payload.resize(at + count * sizeof(double));
  std::memcpy(payload.data() + at, values, count * sizeof(double));
}

inline void read_doubles(const std::vector<std::uint8_t>& payload, std::size_t byte_offset,
                         double* values, std::size_t count) {
  if (byte_offset + count * sizeof(double) > payload.size())
    throw DataError("container: payload range out of bounds");
  std::memcpy(values, payload.data() + byte_offset, count * sizeof(double));
}

// FNV-1a 64-bit over a whole file; used for provenance stamps.
inline std::string fnv1a_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("hash: cannot open '" + path + "'");
  std::uint64_t h = 1469598103934665603ULL;
  char buf[8192];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<std::uint8_t>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return std::string(hex);
}

}  // namespace geotracknet::io
