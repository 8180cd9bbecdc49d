#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "geotracknet/core/parallel.hpp"
#include "geotracknet/io/container.hpp"
#include "geotracknet/vrnn/vrnn.hpp"

namespace geotracknet::cellmap {

class InactiveCell : public DataError {
 public:
  explicit InactiveCell(const std::string& what) : DataError(what) {}
};

class EmptyValidation : public DataError {
 public:
  explicit EmptyValidation(const std::string& what) : DataError(what) {}
};

// Uniform lat/lon grid over the ROI; cell (row, col) covers
// [lat_min + row*cell, ...) x [lon_min + col*cell, ...).
struct Grid {
  ais::Roi roi;
  double cell_size = 0.1;  // degrees, applied to both axes

  std::size_t n_rows() const {
    return fourhot::FourHotSpec::bins(roi.lat_max - roi.lat_min, cell_size);
  }
  std::size_t n_cols() const {
    return fourhot::FourHotSpec::bins(roi.lon_max - roi.lon_min, cell_size);
  }
  std::size_t n_cells() const { return n_rows() * n_cols(); }

  double lat_center(std::size_t row) const {
    return roi.lat_min + (static_cast<double>(row) + 0.5) * cell_size;
  }
  double lon_center(std::size_t col) const {
    return roi.lon_min + (static_cast<double>(col) + 0.5) * cell_size;
  }

  void validate() const {
    roi.validate();
    if (!(cell_size > 0.0)) throw ConfigError("grid: cell_size must be positive");
  }

  bool operator==(const Grid&) const = default;
};

// eps-nudged floor with boundary clamp: lat_max / lon_max land in the last
// row / column.
inline std::size_t cell_of(double lat, double lon, const Grid& grid) {
  if (!grid.roi.contains(lat, lon)) throw ais::OutOfRoi("cell_of: point outside roi");
  auto axis = [&](double v, double origin, std::size_t n) {
    const double raw = std::floor((v - origin) / grid.cell_size + 1e-9);
    if (raw < 0.0) return std::size_t{0};
    const std::size_t i = static_cast<std::size_t>(raw);
    return i >= n ? n - 1 : i;
  };
  const std::size_t row = axis(lat, grid.roi.lat_min, grid.n_rows());
  const std::size_t col = axis(lon, grid.roi.lon_min, grid.n_cols());
  return row * grid.n_cols() + col;
}

enum class CellForm { gaussian, kde };

inline const char* to_string(CellForm f) { return f == CellForm::gaussian ? "gaussian" : "kde"; }

inline CellForm cell_form_from_string(const std::string& s) {
  if (s == "gaussian") return CellForm::gaussian;
  if (s == "kde") return CellForm::kde;
  throw ConfigError("cellmap: unknown form '" + s + "' (expected gaussian|kde)");
}

// Distribution of per-message scores within one grid cell. Cells with fewer
// than m_min validation samples stay Inactive and are never used to flag.
struct CellModel {
  enum class State { inactive, gaussian, kde };

  State state = State::inactive;
  std::size_t count = 0;
  double mu = 0.0;                    // gaussian
  double sigma = 0.0;                 // gaussian
  std::vector<double> samples;        // kde: raw validation scores
  double bandwidth = 0.0;             // kde

  bool active() const { return state != State::inactive; }
};

inline constexpr double kSigmaFloorCell = 1e-6;
inline constexpr double kBandwidthFloor = 1e-3;

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

// Linear-interpolated quantile on a sorted copy (the usual "type 7" rule).
inline double quantile(std::vector<double> sorted, double f) {
  const double h = f * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace detail

// Silverman's rule with the robust IQR term: 0.9 min(std, IQR/1.34) m^(-1/5),
// floored so degenerate cells keep a usable kernel.
inline double silverman_bandwidth(const std::vector<double>& samples) {
  if (samples.size() < 2) throw DomainError("kde: need at least 2 samples");
  const double mean = detail::mean_of(samples);
  const double sd = detail::sample_std(samples, mean);
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  const double iqr = detail::quantile(sorted, 0.75) - detail::quantile(sorted, 0.25);
  const double spread = std::min(sd, iqr / 1.34);
  const double bw = 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
  return std::max(bw, kBandwidthFloor);
}

inline CellModel fit_kde(std::vector<double> samples) {
  CellModel cell;
  cell.state = CellModel::State::kde;
  cell.count = samples.size();
  cell.bandwidth = silverman_bandwidth(samples);
  cell.samples = std::move(samples);
  return cell;
}

inline CellModel fit_gaussian(const std::vector<double>& samples) {
  CellModel cell;
  cell.state = CellModel::State::gaussian;
  cell.count = samples.size();
  cell.mu = detail::mean_of(samples);
  cell.sigma = std::max(detail::sample_std(samples, cell.mu), kSigmaFloorCell);
  return cell;
}

// P(L < l) under the cell's fitted form.
inline double cell_cdf(const CellModel& cell, double l) {
  switch (cell.state) {
    case CellModel::State::gaussian:
      return detail::std_normal_cdf((l - cell.mu) / cell.sigma);
    case CellModel::State::kde: {
      double acc = 0.0;
      for (double s : cell.samples) acc += detail::std_normal_cdf((l - s) / cell.bandwidth);
      return acc / static_cast<double>(cell.samples.size());
    }
    case CellModel::State::inactive:
      break;
  }
  throw InactiveCell("cell_cdf: inactive cell");
}

struct Provenance {
  std::string checkpoint_hash;
  std::string validation_hash;
  double p = 0.0;
  std::size_t m_min = 0;
};

inline void to_json(nlohmann::json& j, const Provenance& p) {
  j = {{"checkpoint_hash", p.checkpoint_hash},
       {"validation_hash", p.validation_hash},
       {"p", p.p},
       {"m_min", p.m_min}};
}

inline void from_json(const nlohmann::json& j, Provenance& p) {
  p.checkpoint_hash = j.value("checkpoint_hash", "");
  p.validation_hash = j.value("validation_hash", "");
  p.p = j.value("p", 0.0);
  p.m_min = j.value("m_min", std::size_t{0});
}

// Dense per-cell normalcy reference built from validation scores.
struct CellMap {
  Grid grid;
  CellForm form = CellForm::kde;
  std::size_t m_min = 50;
  Provenance provenance;
  std::vector<CellModel> cells;  // n_rows * n_cols entries

  const CellModel& cell(std::size_t index) const { return cells.at(index); }

  std::size_t active_count() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += c.active() ? 1 : 0;
    return n;
  }

  std::size_t total_samples() const {
    std::size_t n = 0;
    for (const auto& c : cells) n += c.count;
    return n;
  }
};

// Scores every validation track, assigns each per-message score to the cell
// of its decoded (bin-center) position, and fits the selected form per cell.
// Tracks may be scored in parallel; per-cell collection merges in track
// order, so the result is independent of the thread count.
inline CellMap build_cell_map(const vrnn::VrnnModel& model,
                              const std::vector<fourhot::EncodedTrack>& validation,
                              const Grid& grid, std::size_t m_min, CellForm form,
                              int score_samples, std::uint64_t seed, unsigned threads = 1,
                              Provenance provenance = {}) {
  grid.validate();
  if (validation.empty()) throw EmptyValidation("build_cell_map: empty validation set");

  std::vector<std::vector<double>> track_scores(validation.size());
  core::parallel_for(validation.size(), threads, [&](std::size_t i) {
    track_scores[i] = vrnn::score_track(model, validation[i], score_samples,
                                        core::mix_seed(seed, {0x6d6170ULL, i}));
  });

  std::vector<std::vector<double>> per_cell(grid.n_cells());
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const auto& track = validation[i];
    for (std::size_t t = 0; t < track.states.size(); ++t) {
      const ais::TrackState s = fourhot::decode_vector(track.states[t], track.spec);
      per_cell[cell_of(s.lat, s.lon, grid)].push_back(track_scores[i][t]);
    }
  }

  CellMap map;
  map.grid = grid;
  map.form = form;
  map.m_min = m_min;
  map.provenance = std::move(provenance);
  map.provenance.m_min = m_min;
  map.cells.resize(grid.n_cells());
  for (std::size_t c = 0; c < per_cell.size(); ++c) {
    auto& samples = per_cell[c];
    if (samples.size() < m_min || samples.size() < 2) {
      // stays Inactive; the observed count is still recorded
      map.cells[c].count = samples.size();
      continue;
    }
    if (form == CellForm::gaussian) {
      map.cells[c] = fit_gaussian(samples);
    } else {
      map.cells[c] = fit_kde(std::move(samples));
    }
  }
  return map;
}

// Fig-style geospatial performance export: one CSV row per cell, dense over
// the whole grid; Inactive cells keep empty mean/std fields. KDE cells
// report the sample mean/std of their stored scores.
inline void export_performance_map(const CellMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("performance map: cannot write '" + path + "'");
  out << "cell_row,cell_col,lat_center,lon_center,count,mean,std\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  const std::size_t cols = map.grid.n_cols();
  for (std::size_t r = 0; r < map.grid.n_rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const CellModel& cell = map.cells[r * cols + c];
      out << r << ',' << c << ',' << fmt(map.grid.lat_center(r)) << ','
          << fmt(map.grid.lon_center(c)) << ',' << cell.count << ',';
      if (cell.state == CellModel::State::gaussian) {
        out << fmt(cell.mu) << ',' << fmt(cell.sigma);
      } else if (cell.state == CellModel::State::kde) {
        const double mean = detail::mean_of(cell.samples);
        out << fmt(mean) << ',' << fmt(detail::sample_std(cell.samples, mean));
      } else {
        out << ',';
      }
      out << '\n';
    }
  }
  if (!out) throw IoError("performance map: failed writing '" + path + "'");
}

inline constexpr const char* kCellMapMagic = "GTNCMAP1";

// Cell map container: JSON header (grid, form, m_min, provenance, per-cell
// directory) plus a payload holding the raw KDE sample arrays as
// little-endian binary64.
inline void save_cellmap(const std::string& path, const CellMap& map,
                         const nlohmann::json& extra = {}) {
  io::Container c;
  nlohmann::json cells = nlohmann::json::array();
  for (const CellModel& cell : map.cells) {
    nlohmann::json j;
    j["m"] = cell.count;
    switch (cell.state) {
      case CellModel::State::inactive:
        j["state"] = "inactive";
        break;
      case CellModel::State::gaussian:
        j["state"] = "gaussian";
        j["mu"] = cell.mu;
        j["sigma"] = cell.sigma;
        break;
      case CellModel::State::kde:
        j["state"] = "kde";
        j["bandwidth"] = cell.bandwidth;
        j["offset"] = c.payload.size();
        io::append_doubles(c.payload, cell.samples.data(), cell.samples.size());
        break;
    }
    cells.push_back(std::move(j));
  }
  c.header = {{"format", "gtn.cellmap"},
              {"format_version", 1},
              {"grid",
               {{"roi",
                 {{"lat_min", map.grid.roi.lat_min},
                  {"lat_max", map.grid.roi.lat_max},
                  {"lon_min", map.grid.roi.lon_min},
                  {"lon_max", map.grid.roi.lon_max}}},
                {"cell_size", map.grid.cell_size}}},
              {"form", to_string(map.form)},
              {"m_min", map.m_min},
              {"provenance", map.provenance},
              {"cells", cells}};
  if (!extra.is_null() && !extra.empty()) c.header["config_echo"] = extra;
  io::write_container(path, kCellMapMagic, c);
}

inline CellMap load_cellmap(const std::string& path) {
  io::Container c = io::read_container(path, kCellMapMagic);
  const auto& h = c.header;
  if (h.at("format_version").get<int>() != 1)
    throw DataError("cellmap: unsupported format_version");
  CellMap map;
  const auto& g = h.at("grid");
  map.grid.roi.lat_min = g.at("roi").at("lat_min").get<double>();
  map.grid.roi.lat_max = g.at("roi").at("lat_max").get<double>();
  map.grid.roi.lon_min = g.at("roi").at("lon_min").get<double>();
  map.grid.roi.lon_max = g.at("roi").at("lon_max").get<double>();
  map.grid.cell_size = g.at("cell_size").get<double>();
  map.grid.validate();
  map.form = cell_form_from_string(h.at("form").get<std::string>());
  map.m_min = h.at("m_min").get<std::size_t>();
  map.provenance = h.at("provenance").get<Provenance>();
  const auto& cells = h.at("cells");
  if (cells.size() != map.grid.n_cells())
    throw DataError("cellmap: cell count does not match grid");
  map.cells.reserve(cells.size());
  for (const auto& j : cells) {
    CellModel cell;
    cell.count = j.at("m").get<std::size_t>();
    const std::string state = j.at("state").get<std::string>();
    if (state == "gaussian") {
      cell.state = CellModel::State::gaussian;
      cell.mu = j.at("mu").get<double>();
      cell.sigma = j.at("sigma").get<double>();
    } else if (state == "kde") {
      cell.state = CellModel::State::kde;
      cell.bandwidth = j.at("bandwidth").get<double>();
      cell.samples.resize(cell.count);
      io::read_doubles(c.payload, j.at("offset").get<std::size_t>(), cell.samples.data(),
                       cell.count);
    } else if (state != "inactive") {
      throw DataError("cellmap: unknown cell state '" + state + "'");
    }
    map.cells.push_back(std::move(cell));
  }
  return map;
}

}  // namespace geotracknet::cellmap
