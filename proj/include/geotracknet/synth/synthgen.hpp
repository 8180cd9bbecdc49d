#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "geotracknet/ais/types.hpp"
#include "geotracknet/core/rng.hpp"
#include "json.hpp"

namespace geotracknet::synth {

// 1 knot = 1.852 km/h; 1 degree ~ 111.12 km at these latitudes. Planar
// degrees throughout: sub-bin error at ROI scale, and the same scale is
// applied to both axes.
inline constexpr double kDegPerHourPerKnot = 1.852 / 111.12;

struct RouteTemplate {
  std::vector<std::pair<double, double>> waypoints;  // (lat, lon)
  double speed_kn = 12.0;
  double speed_jitter_kn = 0.5;
  double cross_track_std_deg = 0.01;
  double weight = 1.0;
};

enum class AnomalyKind { route_deviation, u_turn, speed_drop, off_route_path };

inline const char* to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::route_deviation: return "route_deviation";
    case AnomalyKind::u_turn: return "u_turn";
    case AnomalyKind::speed_drop: return "speed_drop";
    case AnomalyKind::off_route_path: return "off_route_path";
  }
  return "?";
}

inline AnomalyKind anomaly_kind_from_string(const std::string& s) {
  if (s == "route_deviation") return AnomalyKind::route_deviation;
  if (s == "u_turn") return AnomalyKind::u_turn;
  if (s == "speed_drop") return AnomalyKind::speed_drop;
  if (s == "off_route_path") return AnomalyKind::off_route_path;
  throw ConfigError("synth: unknown anomaly kind '" + s + "'");
}

struct AnomalySpec {
  AnomalyKind kind = AnomalyKind::route_deviation;
  double magnitude_deg = 0.1;  // cross-track offset for route_deviation
  double speed_factor = 0.2;   // multiplier for speed_drop
  double onset_frac = 0.4;     // window start as a fraction of the track
  double duration_frac = 0.25;

  void validate() const {
    if (!(magnitude_deg > 0.0)) throw ConfigError("anomaly: magnitude must be positive");
    if (!(speed_factor > 0.0 && speed_factor < 1.0))
      throw ConfigError("anomaly: speed_factor must be in (0, 1)");
    if (!(onset_frac > 0.0 && onset_frac < 1.0))
      throw ConfigError("anomaly: onset_frac must be in (0, 1)");
    if (!(duration_frac > 0.0 && onset_frac + duration_frac <= 1.0))
      throw ConfigError("anomaly: window must fit inside the track");
  }
};

struct TrackLabel {
  std::string track_id;
  bool anomalous = false;
  std::string kind;  // empty when normal
  std::int64_t window_start = 0;
  std::int64_t window_end = 0;
  bool clipped = false;  // positions were clamped back into the roi
};

struct ScenarioConfig {
  ais::Roi roi;
  std::vector<RouteTemplate> templates;
  std::size_t train_tracks = 0;
  std::size_t validation_tracks = 0;
  std::size_t test_normal_tracks = 0;
  std::vector<AnomalySpec> anomalies;  // one extra anomalous test track each
  double min_span_frac = 0.6;          // traversed fraction of the polyline
  double msg_interval_min_s = 60.0;
  double msg_interval_max_s = 300.0;
  std::int64_t t_base = 1488326400;    // departures staggered over ~60 days
  std::uint64_t mmsi_base = 200000000;
  std::uint64_t seed = 0;

  void validate() const {
    roi.validate();
    if (templates.empty()) throw ConfigError("scenario: no route templates");
    if (train_tracks == 0 || validation_tracks == 0)
      throw ConfigError("scenario: train and validation counts must be positive");
    for (const auto& t : templates) {
      if (t.waypoints.size() < 2) throw ConfigError("scenario: template needs >= 2 waypoints");
      if (!(t.speed_kn > 0.0)) throw ConfigError("scenario: template speed must be positive");
      for (const auto& [lat, lon] : t.waypoints)
        if (!roi.contains(lat, lon)) throw ConfigError("scenario: template leaves the roi");
    }
    for (const auto& a : anomalies) a.validate();
    if (!(msg_interval_min_s > 0.0 && msg_interval_max_s >= msg_interval_min_s))
      throw ConfigError("scenario: bad message interval range");
    if (!(min_span_frac > 0.0 && min_span_frac <= 1.0))
      throw ConfigError("scenario: min_span_frac must be in (0, 1]");
  }
};

struct LabeledDataset {
  std::vector<ais::AisMessage> train;
  std::vector<ais::AisMessage> validation;
  std::vector<ais::AisMessage> test;
  std::vector<TrackLabel> labels;  // one per test track
};

namespace detail {

// Piecewise-linear path parameterized by cumulative arclength (degrees).
class Path {
 public:
  explicit Path(std::vector<std::pair<double, double>> pts) : pts_(std::move(pts)) {
    cum_.resize(pts_.size(), 0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) {
      const double dlat = pts_[i].first - pts_[i - 1].first;
      const double dlon = pts_[i].second - pts_[i - 1].second;
      cum_[i] = cum_[i - 1] + std::sqrt(dlat * dlat + dlon * dlon);
    }
  }

  double length() const { return cum_.back(); }
  const std::vector<double>& cumlen() const { return cum_; }

  std::pair<double, double> point_at(double s) const {
    const std::size_t i = segment_of(s);
    const double f = (cum_[i + 1] > cum_[i]) ? (s - cum_[i]) / (cum_[i + 1] - cum_[i]) : 0.0;
    return {pts_[i].first + f * (pts_[i + 1].first - pts_[i].first),
            pts_[i].second + f * (pts_[i + 1].second - pts_[i].second)};
  }

  // Unit direction (dlat, dlon) of the segment containing s.
  std::pair<double, double> direction_at(double s) const {
    const std::size_t i = segment_of(s);
    double dlat = pts_[i + 1].first - pts_[i].first;
    double dlon = pts_[i + 1].second - pts_[i].second;
    const double n = std::sqrt(dlat * dlat + dlon * dlon);
    if (n > 0.0) {
      dlat /= n;
      dlon /= n;
    }
    return {dlat, dlon};
  }

  double bearing_at(double s) const {
    const auto [dlat, dlon] = direction_at(s);
    return ais::wrap_course(std::atan2(dlon, dlat) * 180.0 / 3.141592653589793);
  }

  // Direction over a +-delta arclength baseline; irons out the zigzag of a
  // polyline built from noisy message positions.
  double bearing_smoothed(double s, double delta) const {
    const auto [lat0, lon0] = point_at(std::max(0.0, s - delta));
    const auto [lat1, lon1] = point_at(std::min(length(), s + delta));
    const double dlat = lat1 - lat0, dlon = lon1 - lon0;
    if (dlat == 0.0 && dlon == 0.0) return bearing_at(s);
    return ais::wrap_course(std::atan2(dlon, dlat) * 180.0 / 3.141592653589793);
  }

 private:
  std::size_t segment_of(double s) const {
    if (s <= 0.0) return 0;
    if (s >= cum_.back()) return pts_.size() - 2;
    std::size_t i =
        static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), s) - cum_.begin());
    return std::min(i - 1, pts_.size() - 2);
  }

  std::vector<std::pair<double, double>> pts_;
  std::vector<double> cum_;
};

inline bool clamp_into(ais::AisMessage& m, const ais::Roi& roi) {
  bool clipped = false;
  if (m.lat < roi.lat_min) { m.lat = roi.lat_min; clipped = true; }
  if (m.lat > roi.lat_max) { m.lat = roi.lat_max; clipped = true; }
  if (m.lon < roi.lon_min) { m.lon = roi.lon_min; clipped = true; }
  if (m.lon > roi.lon_max) { m.lon = roi.lon_max; clipped = true; }
  return clipped;
}

}  // namespace detail

// Simulates one normal voyage along a template: AR(1) speed around the
// nominal, AR(1) cross-track offset, messages at irregular 60-300 s
// intervals, and an extra message exactly at each waypoint so message chords
// never cut corners.
inline std::vector<ais::AisMessage> simulate_normal_track(const ScenarioConfig& cfg,
                                                          const RouteTemplate& tpl,
                                                          std::uint64_t mmsi,
                                                          std::int64_t t_start,
                                                          core::Rng& rng) {
  detail::Path path(tpl.waypoints);
  const double span_frac = rng.uniform(cfg.min_span_frac, 1.0);
  const double start_frac = rng.uniform(0.0, 1.0 - span_frac);
  double s = start_frac * path.length();
  const double s_end = (start_frac + span_frac) * path.length();

  const double rho_v = 0.9, rho_x = 0.95;
  double speed = tpl.speed_kn + tpl.speed_jitter_kn * rng.normal();
  double offset = tpl.cross_track_std_deg * rng.normal();

  std::vector<ais::AisMessage> out;
  double t = static_cast<double>(t_start);
  const double t_cap = t + 23.0 * 3600.0;  // one voyage chunk per vessel

  const auto& cum = path.cumlen();
  while (s < s_end && t < t_cap) {
    ais::AisMessage m;
    m.mmsi = mmsi;
    m.t = static_cast<std::int64_t>(std::llround(t));
    const auto [lat, lon] = path.point_at(s);
    const auto [dlat, dlon] = path.direction_at(s);
    m.lat = lat + offset * (-dlon);
    m.lon = lon + offset * dlat;
    m.sog = std::clamp(speed, 0.0, 29.9);
    m.cog = path.bearing_at(s);
    detail::clamp_into(m, cfg.roi);
    if (out.empty() || m.t > out.back().t) out.push_back(m);

    // next emission; stop at an upcoming waypoint if we would cross it
    const double interval = rng.uniform(cfg.msg_interval_min_s, cfg.msg_interval_max_s);
    const double v_deg_s = std::max(speed, 0.5) * kDegPerHourPerKnot / 3600.0;
    double ds = v_deg_s * interval;
    double next_boundary = s_end;
    for (double c : cum)
      if (c > s + 1e-12 && c < next_boundary) { next_boundary = c; break; }
    if (s + ds > next_boundary) ds = next_boundary - s;
    s += ds;
    t += ds / v_deg_s;

    speed = tpl.speed_kn + rho_v * (speed - tpl.speed_kn) +
            tpl.speed_jitter_kn * std::sqrt(1.0 - rho_v * rho_v) * rng.normal();
    offset = rho_x * offset +
             tpl.cross_track_std_deg * std::sqrt(1.0 - rho_x * rho_x) * rng.normal();
  }
  return out;
}

// Rebuilds a track's positions from a remapped arclength along its own
// polyline; used by speed_drop and u_turn.
namespace detail {

struct RemappedTrack {
  std::vector<ais::AisMessage> messages;
  bool clipped = false;
};

template <class RateFn>
RemappedTrack remap_arclength(const std::vector<ais::AisMessage>& msgs, const ais::Roi& roi,
                              std::int64_t t_on, std::int64_t t_off, RateFn&& rate,
                              double sog_factor_in_window, bool flip_course_when_reversed) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(msgs.size());
  for (const auto& m : msgs) pts.emplace_back(m.lat, m.lon);
  Path path(pts);

  RemappedTrack out;
  out.messages = msgs;
  double s = 0.0;
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    if (i > 0) {
      const double dlat = msgs[i].lat - msgs[i - 1].lat;
      const double dlon = msgs[i].lon - msgs[i - 1].lon;
      const double ds = std::sqrt(dlat * dlat + dlon * dlon);
      const double r = rate(msgs[i - 1].t, msgs[i].t);  // signed progress rate
      s = std::clamp(s + r * ds, 0.0, path.length());
    }
    auto& m = out.messages[i];
    const auto [lat, lon] = path.point_at(s);
    m.lat = lat;
    m.lon = lon;
    const bool in_window = m.t >= t_on && m.t < t_off;
    const double r_here = rate(m.t, m.t + 1);
    m.cog = path.bearing_smoothed(s, 0.02);
    if (flip_course_when_reversed && r_here < 0.0) m.cog = ais::wrap_course(m.cog + 180.0);
    if (in_window) m.sog = std::max(0.0, m.sog * sog_factor_in_window);
    out.clipped |= clamp_into(m, roi);
  }
  return out;
}

// Centripetal-flavored smooth path through random interior control points.
inline std::vector<std::pair<double, double>> smooth_random_path(const ais::Roi& roi,
                                                                 core::Rng& rng) {
  const double mlat = 0.12 * (roi.lat_max - roi.lat_min);
  const double mlon = 0.12 * (roi.lon_max - roi.lon_min);
  std::vector<std::pair<double, double>> ctrl(5);
  for (auto& [lat, lon] : ctrl) {
    lat = rng.uniform(roi.lat_min + mlat, roi.lat_max - mlat);
    lon = rng.uniform(roi.lon_min + mlon, roi.lon_max - mlon);
  }
  // Catmull-Rom through the control points, densely sampled
  auto cr = [](double p0, double p1, double p2, double p3, double u) {
    return 0.5 * ((2.0 * p1) + (-p0 + p2) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u * u * u);
  };
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i + 1 < ctrl.size(); ++i) {
    const auto& p0 = ctrl[i == 0 ? 0 : i - 1];
    const auto& p1 = ctrl[i];
    const auto& p2 = ctrl[i + 1];
    const auto& p3 = ctrl[std::min(i + 2, ctrl.size() - 1)];
    for (int k = 0; k < 24; ++k) {
      const double u = static_cast<double>(k) / 24.0;
      out.emplace_back(cr(p0.first, p1.first, p2.first, p3.first, u),
                       cr(p0.second, p1.second, p2.second, p3.second, u));
    }
  }
  out.push_back(ctrl.back());
  return out;
}

}  // namespace detail

struct InjectedTrack {
  std::vector<ais::AisMessage> messages;
  std::int64_t window_start = 0;
  std::int64_t window_end = 0;
  bool clipped = false;
};

// Applies one anomaly to an otherwise normal message stream. The window is
// [onset, onset + duration) in track time; its boundaries are reported for
// segment-level evaluation.
inline InjectedTrack inject_anomaly(const std::vector<ais::AisMessage>& track,
                                    const AnomalySpec& spec, std::uint64_t seed,
                                    const ais::Roi& roi) {
  spec.validate();
  if (track.size() < 8) throw ConfigError("inject: track too short for an anomaly window");
  core::Rng rng(core::mix_seed(seed, {0x616e6f6dULL}));

  const std::int64_t t0 = track.front().t;
  const std::int64_t t1 = track.back().t;
  const double dur = static_cast<double>(t1 - t0);
  InjectedTrack out;
  out.window_start = t0 + static_cast<std::int64_t>(spec.onset_frac * dur);
  out.window_end = t0 + static_cast<std::int64_t>((spec.onset_frac + spec.duration_frac) * dur);
  const std::int64_t t_on = out.window_start, t_off = out.window_end;

  switch (spec.kind) {
    case AnomalyKind::route_deviation: {
      out.messages = track;
      // amplitude slightly above magnitude so the peak offset clears it
      const double amp = 1.05 * spec.magnitude_deg;
      const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
      for (std::size_t i = 0; i < out.messages.size(); ++i) {
        auto& m = out.messages[i];
        if (m.t < t_on || m.t >= t_off) continue;
        const double u =
            static_cast<double>(m.t - t_on) / std::max(1.0, static_cast<double>(t_off - t_on));
        const double bump = std::sin(u * 3.141592653589793);
        const double rad = m.cog * 3.141592653589793 / 180.0;
        const double dlat = std::cos(rad), dlon = std::sin(rad);
        m.lat += side * amp * bump * (-dlon);
        m.lon += side * amp * bump * dlat;
        out.clipped |= detail::clamp_into(m, roi);
      }
      break;
    }
    case AnomalyKind::speed_drop: {
      auto r = detail::remap_arclength(
          track, roi, t_on, t_off,
          [&](std::int64_t ta, std::int64_t) {
            return (ta >= t_on && ta < t_off) ? spec.speed_factor : 1.0;
          },
          spec.speed_factor, /*flip_course_when_reversed=*/false);
      out.messages = std::move(r.messages);
      out.clipped = r.clipped;
      break;
    }
    case AnomalyKind::u_turn: {
      const std::int64_t t_mid = (t_on + t_off) / 2;
      auto r = detail::remap_arclength(
          track, roi, t_on, t_off,
          [&](std::int64_t ta, std::int64_t) {
            return (ta >= t_on && ta < t_mid) ? -1.0 : 1.0;  // back, then forward again
          },
          1.0, /*flip_course_when_reversed=*/true);
      out.messages = std::move(r.messages);
      out.clipped = r.clipped;
      break;
    }
    case AnomalyKind::off_route_path: {
      detail::Path path(detail::smooth_random_path(roi, rng));
      out.messages = track;
      const double speed_deg_s = path.length() / std::max(1.0, dur);
      for (auto& m : out.messages) {
        const double s = speed_deg_s * static_cast<double>(m.t - t0);
        const auto [lat, lon] = path.point_at(s);
        m.lat = lat;
        m.lon = lon;
        m.sog = std::clamp(speed_deg_s * 3600.0 / kDegPerHourPerKnot, 0.0, 29.9);
        m.cog = path.bearing_at(s);
        out.clipped |= detail::clamp_into(m, roi);
      }
      out.window_start = t0;
      out.window_end = t1;
      break;
    }
  }
  return out;
}

// Seeded scenario generation. Normal tracks follow weighted-random
// templates; anomalies are injected only into (extra) test tracks.
inline LabeledDataset generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  core::Rng rng(core::mix_seed(cfg.seed, {0x7363656eULL}));
  LabeledDataset ds;

  double total_weight = 0.0;
  for (const auto& t : cfg.templates) total_weight += t.weight;

  auto pick_template = [&]() -> const RouteTemplate& {
    double u = rng.uniform() * total_weight;
    for (const auto& t : cfg.templates) {
      if (u < t.weight) return t;
      u -= t.weight;
    }
    return cfg.templates.back();
  };

  std::uint64_t next_mmsi = cfg.mmsi_base;
  auto departure = [&]() {
    return cfg.t_base + rng.uniform_int(0, 60L * 24 * 3600);
  };

  auto emit_normal = [&](std::vector<ais::AisMessage>& sink) {
    const RouteTemplate& tpl = pick_template();
    auto msgs = simulate_normal_track(cfg, tpl, ++next_mmsi, departure(), rng);
    sink.insert(sink.end(), msgs.begin(), msgs.end());
    return msgs;
  };

  for (std::size_t i = 0; i < cfg.train_tracks; ++i) emit_normal(ds.train);
  for (std::size_t i = 0; i < cfg.validation_tracks; ++i) emit_normal(ds.validation);

  for (std::size_t i = 0; i < cfg.test_normal_tracks; ++i) {
    auto msgs = emit_normal(ds.test);
    TrackLabel label;
    label.track_id = std::to_string(msgs.front().mmsi);
    label.anomalous = false;
    ds.labels.push_back(std::move(label));
  }

  for (std::size_t i = 0; i < cfg.anomalies.size(); ++i) {
    const RouteTemplate& tpl = pick_template();
    auto base = simulate_normal_track(cfg, tpl, ++next_mmsi, departure(), rng);
    auto injected =
        inject_anomaly(base, cfg.anomalies[i], core::mix_seed(cfg.seed, {0x696e6aULL, i}), cfg.roi);
    ds.test.insert(ds.test.end(), injected.messages.begin(), injected.messages.end());
    TrackLabel label;
    label.track_id = std::to_string(injected.messages.front().mmsi);
    label.anomalous = true;
    label.kind = to_string(cfg.anomalies[i].kind);
    label.window_start = injected.window_start;
    label.window_end = injected.window_end;
    label.clipped = injected.clipped;
    ds.labels.push_back(std::move(label));
  }
  return ds;
}

// The generator emits exactly the CSV schema the ingest stage consumes.
inline void write_ais_csv(const std::string& path, const std::vector<ais::AisMessage>& msgs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("synth: cannot write '" + path + "'");
  out << "mmsi,timestamp,lat,lon,sog,cog\n";
  char buf[160];
  for (const auto& m : msgs) {
    std::snprintf(buf, sizeof buf, "%llu,%lld,%.12g,%.12g,%.12g,%.12g\n",
                  static_cast<unsigned long long>(m.mmsi), static_cast<long long>(m.t), m.lat,
                  m.lon, m.sog, m.cog);
    out << buf;
  }
  if (!out) throw IoError("synth: failed writing '" + path + "'");
}

inline void write_labels_jsonl(const std::string& path, const std::vector<TrackLabel>& labels) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("synth: cannot write '" + path + "'");
  for (const auto& l : labels) {
    nlohmann::json j{{"track_id", l.track_id}, {"anomalous", l.anomalous}};
    if (l.anomalous) {
      j["kind"] = l.kind;
      j["window"] = {l.window_start, l.window_end};
      if (l.clipped) j["clipped"] = true;
    } else {
      j["kind"] = nullptr;
      j["window"] = nullptr;
    }
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("synth: failed writing '" + path + "'");
}

inline std::vector<TrackLabel> read_labels_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("labels: cannot open '" + path + "'");
  std::vector<TrackLabel> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    TrackLabel l;
    l.track_id = j.at("track_id").get<std::string>();
    l.anomalous = j.at("anomalous").get<bool>();
    if (!j.at("kind").is_null()) l.kind = j.at("kind").get<std::string>();
    if (j.contains("window") && !j.at("window").is_null()) {
      l.window_start = j.at("window")[0].get<std::int64_t>();
      l.window_end = j.at("window")[1].get<std::int64_t>();
    }
    l.clipped = j.value("clipped", false);
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace geotracknet::synth
