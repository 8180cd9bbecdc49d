#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "geotracknet/ais/types.hpp"

namespace geotracknet::ais {

// Drops messages outside the ROI, truncates SOG at sog_max and normalizes
// COG into [0, 360). Order-preserving and idempotent.
inline std::vector<AisMessage> clean_messages(const std::vector<AisMessage>& msgs, const Roi& roi,
                                              double sog_max) {
  std::vector<AisMessage> out;
  out.reserve(msgs.size());
  for (AisMessage m : msgs) {
    if (!roi.contains(m.lat, m.lon)) continue;
    m.sog = std::min(m.sog, sog_max);
    m.cog = wrap_course(m.cog);
    out.push_back(m);
  }
  return out;
}

// Groups messages by MMSI, sorts by time (stable, so the first of two
// equal-timestamp messages wins), collapses duplicate timestamps and starts
// a new track whenever the gap to the previous message exceeds gap_max
// strictly. An exactly-gap_max gap stays contiguous.
inline std::vector<RawTrack> assemble_tracks(const std::vector<AisMessage>& msgs,
                                             double gap_max_s) {
  std::map<std::uint64_t, std::vector<AisMessage>> by_vessel;
  for (const AisMessage& m : msgs) by_vessel[m.mmsi].push_back(m);

  std::vector<RawTrack> tracks;
  for (auto& [mmsi, group] : by_vessel) {
    std::stable_sort(group.begin(), group.end(),
                     [](const AisMessage& a, const AisMessage& b) { return a.t < b.t; });
    RawTrack current;
    current.mmsi = mmsi;
    for (const AisMessage& m : group) {
      if (!current.messages.empty()) {
        const std::int64_t prev = current.messages.back().t;
        if (m.t == prev) continue;  // duplicate timestamp: keep the first
        if (static_cast<double>(m.t - prev) > gap_max_s) {
          tracks.push_back(std::move(current));
          current = RawTrack{mmsi, {}};
        }
      }
      current.messages.push_back(m);
    }
    if (!current.messages.empty()) tracks.push_back(std::move(current));
  }
  return tracks;
}

namespace detail {

inline double lerp(double a, double b, double f) { return a + (b - a) * f; }

// Course interpolation along the shortest circular arc, e.g. 350 -> 10
// passes through 0 rather than 180.
inline double lerp_course(double a, double b, double f) {
  return wrap_course(a + course_difference(a, b) * f);
}

}  // namespace detail

// Linear resampling onto the grid t0, t0+dt, ... up to the last original
// timestamp. lat/lon/sog interpolate linearly, cog circularly.
inline ResampledTrack resample_track(const RawTrack& track, double dt_s) {
  if (track.messages.size() < 2)
    throw TrackTooShort("resample: track needs at least 2 messages");
  const auto& msgs = track.messages;
  ResampledTrack out;
  out.mmsi = track.mmsi;
  out.t0 = msgs.front().t;
  out.dt = dt_s;

  std::size_t seg = 0;  // msgs[seg], msgs[seg+1] bracket the sample time
  const double t_last = static_cast<double>(msgs.back().t);
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(out.t0) + static_cast<double>(k) * dt_s;
    if (t > t_last) break;
    while (seg + 2 < msgs.size() && static_cast<double>(msgs[seg + 1].t) < t) ++seg;
    const AisMessage& a = msgs[seg];
    const AisMessage& b = msgs[seg + 1];
    const double span = static_cast<double>(b.t - a.t);
    const double f = std::clamp((t - static_cast<double>(a.t)) / span, 0.0, 1.0);
    TrackState s;
    s.lat = detail::lerp(a.lat, b.lat, f);
    s.lon = detail::lerp(a.lon, b.lon, f);
    s.sog = detail::lerp(a.sog, b.sog, f);
    s.cog = detail::lerp_course(a.cog, b.cog, f);
    out.states.push_back(s);
  }
  return out;
}

// Cuts a resampled voyage into consecutive chunks of duration <= dur_max
// (duration = sample count * dt) and discards chunks shorter than dur_min.
inline std::vector<ResampledTrack> split_voyage(const ResampledTrack& track, double dur_min_s,
                                                double dur_max_s) {
  std::vector<ResampledTrack> chunks;
  const std::size_t max_len = static_cast<std::size_t>(dur_max_s / track.dt + 1e-9);
  const std::size_t min_len = static_cast<std::size_t>(std::ceil(dur_min_s / track.dt - 1e-9));
  if (max_len == 0) return chunks;
  for (std::size_t begin = 0; begin < track.states.size(); begin += max_len) {
    const std::size_t len = std::min(max_len, track.states.size() - begin);
    if (len < min_len) continue;  // short tail is dropped, not merged back
    ResampledTrack chunk;
    chunk.mmsi = track.mmsi;
    chunk.dt = track.dt;
    chunk.t0 = track.t0 + static_cast<std::int64_t>(static_cast<double>(begin) * track.dt);
    chunk.states.assign(track.states.begin() + static_cast<std::ptrdiff_t>(begin),
                        track.states.begin() + static_cast<std::ptrdiff_t>(begin + len));
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

}  // namespace geotracknet::ais
