#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "geotracknet/core/errors.hpp"

namespace geotracknet::ais {

// One AIS position report. cog is kept in [0, 360).
struct AisMessage {
  std::uint64_t mmsi = 0;
  std::int64_t t = 0;  // Unix seconds
  double lat = 0.0;
  double lon = 0.0;
  double sog = 0.0;  // knots
  double cog = 0.0;  // degrees
};

struct Roi {
  double lat_min = 0.0;
  double lat_max = 0.0;
  double lon_min = 0.0;
  double lon_max = 0.0;

  bool contains(double lat, double lon) const {
    return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
  }

  void validate() const {
    if (!(lat_min < lat_max) || !(lon_min < lon_max))
      throw ConfigError("roi: min bounds must be strictly below max bounds");
  }

  bool operator==(const Roi&) const = default;
};

// Contiguous per-vessel message run: strictly increasing timestamps, gaps
// bounded by the assembly threshold.
struct RawTrack {
  std::uint64_t mmsi = 0;
  std::vector<AisMessage> messages;
};

struct TrackState {
  double lat = 0.0;
  double lon = 0.0;
  double sog = 0.0;
  double cog = 0.0;
};

// Fixed-rate voyage: states at t0, t0+dt, ...
struct ResampledTrack {
  std::uint64_t mmsi = 0;
  std::int64_t t0 = 0;
  double dt = 600.0;  // seconds
  std::vector<TrackState> states;

  // Voyage-length accounting treats each sample as covering one dt.
  double duration() const { return static_cast<double>(states.size()) * dt; }
};

class OutOfRoi : public DataError {
 public:
  explicit OutOfRoi(const std::string& what) : DataError(what) {}
};

class TrackTooShort : public DataError {
 public:
  explicit TrackTooShort(const std::string& what) : DataError(what) {}
};

// Wraps a course into [0, 360).
inline double wrap_course(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  if (r >= 360.0) r = 0.0;  // fmod can land exactly on 360 after the add
  return r;
}

// Signed shortest angular difference b - a in (-180, 180].
inline double course_difference(double a, double b) {
  double d = std::fmod(b - a, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

}  // namespace geotracknet::ais
