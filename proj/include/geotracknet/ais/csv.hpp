#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geotracknet/ais/types.hpp"

namespace geotracknet::ais {

// Column-name mapping for the input CSV. Extra columns are ignored.
struct CsvSchema {
  std::string mmsi = "mmsi";
  std::string timestamp = "timestamp";
  std::string lat = "lat";
  std::string lon = "lon";
  std::string sog = "sog";
  std::string cog = "cog";
};

// One rejected row; `row` is the physical line number in the file (the
// header is line 1).
struct ParseError {
  std::size_t row = 0;
  std::string reason;
};

struct ParseResult {
  std::vector<AisMessage> messages;
  std::vector<ParseError> errors;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t begin = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(begin, i - begin)));
      begin = i + 1;
    }
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end) return std::nullopt;
  return v;
}

}  // namespace detail

// Parses AIS position reports from CSV text with a header row. Malformed
// rows are reported (and skipped) rather than aborting the parse; a missing
// mandatory column or an unreadable stream is fatal.
inline ParseResult parse_ais_csv(std::istream& in, const CsvSchema& schema = {}) {
  if (!in) throw IoError("ais csv: unreadable input stream");

  std::string line;
  if (!std::getline(in, line)) {
    if (in.bad()) throw IoError("ais csv: failed reading header");
    throw DataError("ais csv: missing header row");
  }

  std::vector<std::string_view> fields;
  detail::split_csv(line, fields);
  std::unordered_map<std::string, std::size_t> columns;
  for (std::size_t i = 0; i < fields.size(); ++i) columns.emplace(std::string(fields[i]), i);

  auto column = [&](const std::string& name) {
    auto it = columns.find(name);
    if (it == columns.end()) throw DataError("ais csv: missing mandatory column '" + name + "'");
    return it->second;
  };
  const std::size_t c_mmsi = column(schema.mmsi);
  const std::size_t c_time = column(schema.timestamp);
  const std::size_t c_lat = column(schema.lat);
  const std::size_t c_lon = column(schema.lon);
  const std::size_t c_sog = column(schema.sog);
  const std::size_t c_cog = column(schema.cog);
  const std::size_t need = std::max({c_mmsi, c_time, c_lat, c_lon, c_sog, c_cog}) + 1;

  ParseResult result;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    detail::split_csv(line, fields);
    auto reject = [&](const std::string& reason) { result.errors.push_back({row, reason}); };
    if (fields.size() < need) {
      reject("too few columns");
      continue;
    }
    const auto mmsi = detail::parse_int(fields[c_mmsi]);
    if (!mmsi || *mmsi < 0) {
      reject("bad mmsi");
      continue;
    }
    const auto t = detail::parse_int(fields[c_time]);
    if (!t) {
      reject("bad timestamp");
      continue;
    }
    const auto lat = detail::parse_double(fields[c_lat]);
    if (!lat) {
      reject("bad latitude");
      continue;
    }
    if (*lat < -90.0 || *lat > 90.0) {
      reject("out-of-range latitude");
      continue;
    }
    const auto lon = detail::parse_double(fields[c_lon]);
    if (!lon) {
      reject("bad longitude");
      continue;
    }
    if (*lon < -180.0 || *lon > 180.0) {
      reject("out-of-range longitude");
      continue;
    }
    const auto sog = detail::parse_double(fields[c_sog]);
    if (!sog || *sog < 0.0) {
      reject("bad speed over ground");
      continue;
    }
    const auto cog = detail::parse_double(fields[c_cog]);
    if (!cog) {
      reject("bad course over ground");
      continue;
    }
    AisMessage m;
    m.mmsi = static_cast<std::uint64_t>(*mmsi);
    m.t = *t;
    m.lat = *lat;
    m.lon = *lon;
    m.sog = *sog;
    m.cog = wrap_course(*cog);
    result.messages.push_back(m);
  }
  if (in.bad()) throw IoError("ais csv: stream failed mid-read");
  return result;
}

inline ParseResult parse_ais_csv_file(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("ais csv: cannot open '" + path + "'");
  return parse_ais_csv(in, schema);
}

// Sidecar `<input>.errors.csv` with columns row,reason. Always written so a
// rerun replaces stale results.
inline void write_errors_sidecar(const std::string& csv_path, const std::vector<ParseError>& errors) {
  const std::string path = csv_path + ".errors.csv";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("ais csv: cannot write '" + path + "'");
  out << "row,reason\n";
  for (const ParseError& e : errors) out << e.row << ',' << e.reason << '\n';
  if (!out) throw IoError("ais csv: failed writing '" + path + "'");
}

}  // namespace geotracknet::ais
