#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "geotracknet/ais/types.hpp"
#include "geotracknet/core/tensor.hpp"
#include "json.hpp"

namespace geotracknet::fourhot {

class InvalidFourHot : public DataError {
 public:
  explicit InvalidFourHot(const std::string& what) : DataError(what) {}
};

class SpecMismatch : public DataError {
 public:
  explicit SpecMismatch(const std::string& what) : DataError(what) {}
};

// Bucketing scheme for the concatenated one-hot representation. Bin counts
// and block offsets are pure functions of the fields, so persisting the spec
// pins the model's input dimension.
struct FourHotSpec {
  ais::Roi roi;
  double res_lat = 0.01;  // degrees per bin
  double res_lon = 0.01;
  double res_sog = 1.0;  // knots per bin
  double res_cog = 5.0;  // degrees per bin
  double sog_max = 30.0;

  // eps-nudged ceil, mirroring the eps-nudged floor used when binning, so
  // extents like 2.0/0.01 resolve to 200 bins on every platform.
  static std::size_t bins(double extent, double res) {
    return static_cast<std::size_t>(std::ceil(extent / res - 1e-9));
  }

  std::size_t n_lat() const { return bins(roi.lat_max - roi.lat_min, res_lat); }
  std::size_t n_lon() const { return bins(roi.lon_max - roi.lon_min, res_lon); }
  std::size_t n_sog() const { return bins(sog_max, res_sog); }
  std::size_t n_cog() const { return bins(360.0, res_cog); }

  std::size_t offset_lat() const { return 0; }
  std::size_t offset_lon() const { return n_lat(); }
  std::size_t offset_sog() const { return n_lat() + n_lon(); }
  std::size_t offset_cog() const { return n_lat() + n_lon() + n_sog(); }
  std::size_t dim() const { return n_lat() + n_lon() + n_sog() + n_cog(); }

  void validate() const {
    roi.validate();
    if (res_lat <= 0 || res_lon <= 0 || res_sog <= 0 || res_cog <= 0)
      throw ConfigError("fourhot: resolutions must be positive");
    if (sog_max <= 0) throw ConfigError("fourhot: sog_max must be positive");
  }

  bool operator==(const FourHotSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const FourHotSpec& s) {
  j = {{"roi",
        {{"lat_min", s.roi.lat_min},
         {"lat_max", s.roi.lat_max},
         {"lon_min", s.roi.lon_min},
         {"lon_max", s.roi.lon_max}}},
       {"res_lat", s.res_lat},
       {"res_lon", s.res_lon},
       {"res_sog", s.res_sog},
       {"res_cog", s.res_cog},
       {"sog_max", s.sog_max}};
}

inline void from_json(const nlohmann::json& j, FourHotSpec& s) {
  const auto& r = j.at("roi");
  s.roi.lat_min = r.at("lat_min").get<double>();
  s.roi.lat_max = r.at("lat_max").get<double>();
  s.roi.lon_min = r.at("lon_min").get<double>();
  s.roi.lon_max = r.at("lon_max").get<double>();
  s.res_lat = j.at("res_lat").get<double>();
  s.res_lon = j.at("res_lon").get<double>();
  s.res_sog = j.at("res_sog").get<double>();
  s.res_cog = j.at("res_cog").get<double>();
  s.sog_max = j.at("sog_max").get<double>();
}

// Per-block active bin indices of one encoded message.
struct FourHotVector {
  std::uint16_t i_lat = 0;
  std::uint16_t i_lon = 0;
  std::uint16_t i_sog = 0;
  std::uint16_t i_cog = 0;

  bool operator==(const FourHotVector&) const = default;
};

namespace detail {

// eps-nudged floor: stabilizes values like 48.005/0.01 that sit on a bin
// edge but round just below it in binary.
inline std::size_t bin_index(double value, double origin, double res, std::size_t n) {
  const double raw = std::floor((value - origin) / res + 1e-9);
  if (raw < 0.0) return 0;
  const std::size_t i = static_cast<std::size_t>(raw);
  return i >= n ? n - 1 : i;
}

}  // namespace detail

inline FourHotVector encode_state(const ais::TrackState& s, const FourHotSpec& spec) {
  if (!spec.roi.contains(s.lat, s.lon))
    throw ais::OutOfRoi("encode: state outside roi");
  FourHotVector v;
  v.i_lat = static_cast<std::uint16_t>(detail::bin_index(s.lat, spec.roi.lat_min, spec.res_lat, spec.n_lat()));
  v.i_lon = static_cast<std::uint16_t>(detail::bin_index(s.lon, spec.roi.lon_min, spec.res_lon, spec.n_lon()));
  v.i_sog = static_cast<std::uint16_t>(detail::bin_index(s.sog, 0.0, spec.res_sog, spec.n_sog()));
  v.i_cog = static_cast<std::uint16_t>(detail::bin_index(s.cog, 0.0, spec.res_cog, spec.n_cog()));
  return v;
}

// Bin-center decoding.
inline ais::TrackState decode_vector(const FourHotVector& v, const FourHotSpec& spec) {
  if (v.i_lat >= spec.n_lat() || v.i_lon >= spec.n_lon() || v.i_sog >= spec.n_sog() ||
      v.i_cog >= spec.n_cog())
    throw InvalidFourHot("decode: active index out of block range");
  ais::TrackState s;
  s.lat = spec.roi.lat_min + (static_cast<double>(v.i_lat) + 0.5) * spec.res_lat;
  s.lon = spec.roi.lon_min + (static_cast<double>(v.i_lon) + 0.5) * spec.res_lon;
  s.sog = (static_cast<double>(v.i_sog) + 0.5) * spec.res_sog;
  s.cog = (static_cast<double>(v.i_cog) + 0.5) * spec.res_cog;
  return s;
}

inline std::array<std::size_t, 4> active_indices(const FourHotVector& v, const FourHotSpec& spec) {
  return {spec.offset_lat() + v.i_lat, spec.offset_lon() + v.i_lon,
          spec.offset_sog() + v.i_sog, spec.offset_cog() + v.i_cog};
}

// Dense 0/1 vector of dimension spec.dim() with the four active entries set.
inline core::Tensor to_dense(const FourHotVector& v, const FourHotSpec& spec) {
  core::Tensor x = core::Tensor::vector(spec.dim(), 0.0);
  for (std::size_t i : active_indices(v, spec)) x[i] = 1.0;
  return x;
}

// Encoded voyage, x_{1:T}; carries its spec so model/track mismatches are
// detectable at scoring time.
struct EncodedTrack {
  FourHotSpec spec;
  std::string id;
  std::uint64_t mmsi = 0;
  std::int64_t t0 = 0;
  double dt = 600.0;
  std::vector<FourHotVector> states;

  std::size_t length() const { return states.size(); }
};

inline EncodedTrack encode_track(const ais::ResampledTrack& track, const FourHotSpec& spec,
                                 std::string id) {
  EncodedTrack out;
  out.spec = spec;
  out.id = std::move(id);
  out.mmsi = track.mmsi;
  out.t0 = track.t0;
  out.dt = track.dt;
  out.states.reserve(track.states.size());
  for (std::size_t i = 0; i < track.states.size(); ++i) {
    try {
      out.states.push_back(encode_state(track.states[i], spec));
    } catch (const ais::OutOfRoi&) {
      throw ais::OutOfRoi("encode: state " + std::to_string(i) + " of track '" + out.id +
                          "' outside roi");
    }
  }
  return out;
}

}  // namespace geotracknet::fourhot
