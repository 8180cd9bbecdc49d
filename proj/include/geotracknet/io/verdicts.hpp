#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "geotracknet/contrario/contrario.hpp"
#include "geotracknet/fourhot/fourhot.hpp"
#include "json.hpp"

namespace geotracknet::io {

inline nlohmann::json verdict_to_json(const contrario::TrackVerdict& v) {
  return {{"track_id", v.track_id},
          {"mmsi", v.mmsi},
          {"t0", v.t0},
          {"T", v.length},
          {"abnormal", v.abnormal},
          {"min_nfa", v.min_nfa.nfa},
          {"segment", {{"start", v.min_nfa.start}, {"n", v.min_nfa.length}, {"k", v.min_nfa.abnormal}}},
          {"uncovered", v.uncovered},
          {"scores", v.scores},
          {"flags", v.flags}};
}

// One JSON object per track, in input order.
inline void write_verdicts_jsonl(const std::string& path,
                                 const std::vector<contrario::TrackVerdict>& verdicts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("verdicts: cannot write '" + path + "'");
  for (const auto& v : verdicts) out << verdict_to_json(v).dump() << '\n';
  if (!out) throw IoError("verdicts: failed writing '" + path + "'");
}

inline std::vector<contrario::TrackVerdict> read_verdicts_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("verdicts: cannot open '" + path + "'");
  std::vector<contrario::TrackVerdict> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    contrario::TrackVerdict v;
    v.track_id = j.at("track_id").get<std::string>();
    v.mmsi = j.at("mmsi").get<std::uint64_t>();
    v.t0 = j.at("t0").get<std::int64_t>();
    v.length = j.at("T").get<std::size_t>();
    v.abnormal = j.at("abnormal").get<bool>();
    v.min_nfa.nfa = j.at("min_nfa").get<double>();
    v.min_nfa.start = j.at("segment").at("start").get<std::size_t>();
    v.min_nfa.length = j.at("segment").at("n").get<std::size_t>();
    v.min_nfa.abnormal = j.at("segment").at("k").get<std::size_t>();
    v.uncovered = j.at("uncovered").get<std::size_t>();
    v.scores = j.at("scores").get<std::vector<double>>();
    v.flags = j.at("flags").get<std::vector<std::uint8_t>>();
    out.push_back(std::move(v));
  }
  return out;
}

// GeoJSON FeatureCollection: one LineString per track (bin-center
// coordinates, [lon, lat] order) plus one extra LineString per abnormal
// track covering its minimum-NFA segment.
inline nlohmann::json verdicts_to_geojson(const std::vector<contrario::TrackVerdict>& verdicts,
                                          const std::vector<fourhot::EncodedTrack>& tracks,
                                          const nlohmann::json& provenance = {}) {
  if (verdicts.size() != tracks.size())
    throw ShapeError("geojson: verdict/track count mismatch");
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const auto& v = verdicts[i];
    const auto& t = tracks[i];
    nlohmann::json coords = nlohmann::json::array();
    for (const auto& s : t.states) {
      const auto st = fourhot::decode_vector(s, t.spec);
      coords.push_back({st.lon, st.lat});
    }
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "LineString"}, {"coordinates", coords}}},
                        {"properties",
                         {{"track_id", v.track_id},
                          {"abnormal", v.abnormal},
                          {"min_nfa", v.min_nfa.nfa}}}});
    if (v.abnormal) {
      nlohmann::json seg = nlohmann::json::array();
      for (std::size_t k = v.min_nfa.start; k < v.min_nfa.start + v.min_nfa.length; ++k) {
        const auto st = fourhot::decode_vector(t.states[k], t.spec);
        seg.push_back({st.lon, st.lat});
      }
      if (seg.size() == 1) seg.push_back(seg[0]);  // LineString needs two positions
      features.push_back({{"type", "Feature"},
                          {"geometry", {{"type", "LineString"}, {"coordinates", seg}}},
                          {"properties",
                           {{"track_id", v.track_id},
                            {"role", "abnormal_segment"},
                            {"start", v.min_nfa.start},
                            {"n", v.min_nfa.length},
                            {"k", v.min_nfa.abnormal},
                            {"nfa", v.min_nfa.nfa}}}});
    }
  }
  nlohmann::json fc = {{"type", "FeatureCollection"}, {"features", features}};
  if (!provenance.is_null() && !provenance.empty()) fc["x_provenance"] = provenance;
  return fc;
}

inline void write_geojson(const std::string& path, const nlohmann::json& fc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("geojson: cannot write '" + path + "'");
  out << fc.dump(2) << '\n';
  if (!out) throw IoError("geojson: failed writing '" + path + "'");
}

}  // namespace geotracknet::io
