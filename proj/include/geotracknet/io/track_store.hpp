#pragma once

#include <string>
#include <vector>

#include "geotracknet/fourhot/fourhot.hpp"
#include "geotracknet/io/container.hpp"

namespace geotracknet::io {

inline constexpr const char* kStoreMagic = "GTNSTOR1";

// Encoded track store: JSON header carries the shared four-hot spec and a
// per-track directory (id, mmsi, t0, dt, length, payload offset); the
// payload packs each state as four little-endian u16 bin indices
// (lat, lon, sog, cog).
inline void save_track_store(const std::string& path, const fourhot::FourHotSpec& spec,
                             const std::vector<fourhot::EncodedTrack>& tracks,
                             const nlohmann::json& meta = {}) {
  Container c;
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& t : tracks) {
    if (!(t.spec == spec)) throw fourhot::SpecMismatch("store: track spec differs from header");
    dir.push_back({{"id", t.id},
                   {"mmsi", t.mmsi},
                   {"t0", t.t0},
                   {"dt", t.dt},
                   {"n", t.states.size()},
                   {"offset", c.payload.size()}});
    for (const auto& v : t.states) {
      for (std::uint16_t u : {v.i_lat, v.i_lon, v.i_sog, v.i_cog}) {
        c.payload.push_back(static_cast<std::uint8_t>(u & 0xff));
        c.payload.push_back(static_cast<std::uint8_t>(u >> 8));
      }
    }
  }
  c.header = {{"format", "gtn.track_store"},
              {"format_version", 1},
              {"spec", spec},
              {"tracks", dir}};
  if (!meta.is_null() && !meta.empty()) c.header["meta"] = meta;
  write_container(path, kStoreMagic, c);
}

struct TrackStore {
  fourhot::FourHotSpec spec;
  std::vector<fourhot::EncodedTrack> tracks;
};

inline TrackStore load_track_store(const std::string& path) {
  Container c = read_container(path, kStoreMagic);
  if (c.header.at("format_version").get<int>() != 1)
    throw DataError("store: unsupported format_version");
  TrackStore store;
  store.spec = c.header.at("spec").get<fourhot::FourHotSpec>();
  store.spec.validate();
  const std::size_t n_lat = store.spec.n_lat(), n_lon = store.spec.n_lon();
  const std::size_t n_sog = store.spec.n_sog(), n_cog = store.spec.n_cog();
  for (const auto& e : c.header.at("tracks")) {
    fourhot::EncodedTrack t;
    t.spec = store.spec;
    t.id = e.at("id").get<std::string>();
    t.mmsi = e.at("mmsi").get<std::uint64_t>();
    t.t0 = e.at("t0").get<std::int64_t>();
    t.dt = e.at("dt").get<double>();
    const std::size_t n = e.at("n").get<std::size_t>();
    std::size_t at = e.at("offset").get<std::size_t>();
    if (at + n * 8 > c.payload.size()) throw DataError("store: truncated payload");
    t.states.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto u16 = [&](std::size_t k) {
        return static_cast<std::uint16_t>(c.payload[at + 2 * k] |
                                          (c.payload[at + 2 * k + 1] << 8));
      };
      fourhot::FourHotVector v{u16(0), u16(1), u16(2), u16(3)};
      if (v.i_lat >= n_lat || v.i_lon >= n_lon || v.i_sog >= n_sog || v.i_cog >= n_cog)
        throw DataError("store: bin index out of range in track '" + t.id + "'");
      t.states.push_back(v);
      at += 8;
    }
    store.tracks.push_back(std::move(t));
  }
  return store;
}

}  // namespace geotracknet::io
