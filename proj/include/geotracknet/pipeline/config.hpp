#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "geotracknet/ais/csv.hpp"
#include "geotracknet/cellmap/cellmap.hpp"
#include "geotracknet/contrario/contrario.hpp"
#include "geotracknet/fourhot/fourhot.hpp"
#include "geotracknet/vrnn/train.hpp"
#include "json.hpp"

namespace geotracknet::pipeline {

struct DatasetPath {
  std::string name;  // train | validation | test (free-form allowed)
  std::string csv;
  std::string store;
};

struct Paths {
  std::vector<DatasetPath> datasets;
  std::string checkpoint;
  std::string history_csv;
  std::string cellmap;
  std::string performance_csv;
  std::string verdicts;
  std::string geojson;
  std::string sweep_csv;
  std::string labels;
  std::string metrics;
};

// Single JSON configuration for the whole pipeline; every command receives
// the same file and a canonical echo of it lands in each output's
// provenance header (or `.meta.json` sidecar for headerless formats).
struct PipelineConfig {
  std::uint64_t seed = 0;
  unsigned threads = 1;

  fourhot::FourHotSpec fourhot;  // includes the roi

  // preprocessing thresholds
  double gap_max_s = 7200.0;
  double dt_s = 600.0;
  double dur_min_s = 4.0 * 3600.0;
  double dur_max_s = 24.0 * 3600.0;
  double sog_max = 30.0;

  ais::CsvSchema csv;

  std::size_t hidden = 100;
  std::size_t width = 100;
  vrnn::TrainConfig train;

  double cell_size = 0.1;
  std::size_t m_min = 50;
  cellmap::CellForm form = cellmap::CellForm::kde;

  double p = 0.1;
  double epsilon = 0.0;  // 0 = unset; detect requires it or an explicit sweep
  int score_samples = 16;

  Paths paths;
  nlohmann::json echo;  // canonical effective config

  const DatasetPath& dataset(const std::string& name) const {
    for (const auto& d : paths.datasets)
      if (d.name == name) return d;
    throw ConfigError("config: no dataset named '" + name + "'");
  }

  cellmap::Grid grid() const { return {fourhot.roi, cell_size}; }
};

namespace detail {

inline void check_range(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("config: " + what);
}

}  // namespace detail

inline PipelineConfig parse_config(const nlohmann::json& j) {
  PipelineConfig c;
  c.seed = j.value("seed", std::uint64_t{0});
  c.threads = j.value("threads", 1u);

  if (!j.contains("roi")) throw ConfigError("config: missing roi");
  c.fourhot.roi.lat_min = j.at("roi").at("lat_min").get<double>();
  c.fourhot.roi.lat_max = j.at("roi").at("lat_max").get<double>();
  c.fourhot.roi.lon_min = j.at("roi").at("lon_min").get<double>();
  c.fourhot.roi.lon_max = j.at("roi").at("lon_max").get<double>();

  if (j.contains("fourhot")) {
    const auto& f = j.at("fourhot");
    c.fourhot.res_lat = f.value("res_lat", 0.01);
    c.fourhot.res_lon = f.value("res_lon", 0.01);
    c.fourhot.res_sog = f.value("res_sog", 1.0);
    c.fourhot.res_cog = f.value("res_cog", 5.0);
    c.fourhot.sog_max = f.value("sog_max", 30.0);
  }

  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    c.gap_max_s = p.value("gap_max_s", 7200.0);
    c.dt_s = p.value("dt_s", 600.0);
    c.dur_min_s = p.value("dur_min_s", 4.0 * 3600.0);
    c.dur_max_s = p.value("dur_max_s", 24.0 * 3600.0);
    c.sog_max = p.value("sog_max", 30.0);
  }
  if (j.contains("csv")) {
    const auto& s = j.at("csv");
    c.csv.mmsi = s.value("mmsi", "mmsi");
    c.csv.timestamp = s.value("timestamp", "timestamp");
    c.csv.lat = s.value("lat", "lat");
    c.csv.lon = s.value("lon", "lon");
    c.csv.sog = s.value("sog", "sog");
    c.csv.cog = s.value("cog", "cog");
  }

  if (j.contains("model")) {
    c.hidden = j.at("model").value("hidden", std::size_t{100});
    c.width = j.at("model").value("width", std::size_t{100});
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    c.train.lr = t.value("lr", 0.0003);
    c.train.batch_size = t.value("batch_size", std::size_t{8});
    c.train.max_epochs = t.value("max_epochs", std::size_t{50});
    c.train.patience = t.value("patience", std::size_t{5});
    c.train.mc_samples = t.value("mc_samples", 1);
    c.train.clip_norm = t.value("clip_norm", 5.0);
  }
  c.train.seed = c.seed;
  c.train.threads = c.threads;

  if (j.contains("grid")) c.cell_size = j.at("grid").value("cell_size", 0.1);
  if (j.contains("cellmap")) {
    c.m_min = j.at("cellmap").value("m_min", std::size_t{50});
    c.form = cellmap::cell_form_from_string(j.at("cellmap").value("form", std::string("kde")));
  }

  if (j.contains("detector")) {
    const auto& d = j.at("detector");
    c.p = d.value("p", 0.1);
    if (d.contains("epsilon") && !d.at("epsilon").is_null())
      c.epsilon = d.at("epsilon").get<double>();
    c.score_samples = d.value("mc_samples", 16);
  }

  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    if (p.contains("datasets"))
      for (const auto& d : p.at("datasets"))
        c.paths.datasets.push_back({d.at("name").get<std::string>(),
                                    d.at("csv").get<std::string>(),
                                    d.at("store").get<std::string>()});
    c.paths.checkpoint = p.value("checkpoint", "");
    c.paths.history_csv = p.value("history_csv", "");
    c.paths.cellmap = p.value("cellmap", "");
    c.paths.performance_csv = p.value("performance_csv", "");
    c.paths.verdicts = p.value("verdicts", "");
    c.paths.geojson = p.value("geojson", "");
    c.paths.sweep_csv = p.value("sweep_csv", "");
    c.paths.labels = p.value("labels", "");
    c.paths.metrics = p.value("metrics", "");
  }

  // range checks
  c.fourhot.validate();
  detail::check_range(c.gap_max_s > 0, "gap_max_s must be positive");
  detail::check_range(c.dt_s > 0, "dt_s must be positive");
  detail::check_range(c.dur_min_s > 0 && c.dur_max_s >= c.dur_min_s,
                      "need 0 < dur_min_s <= dur_max_s");
  detail::check_range(c.sog_max > 0, "sog_max must be positive");
  detail::check_range(c.hidden > 0 && c.width > 0, "model sizes must be positive");
  detail::check_range(c.train.lr >= 0, "lr must be >= 0");
  detail::check_range(c.train.batch_size > 0, "batch_size must be positive");
  detail::check_range(c.train.mc_samples >= 1, "train mc_samples must be >= 1");
  detail::check_range(c.cell_size > 0, "cell_size must be positive");
  detail::check_range(c.p > 0 && c.p < 1, "p must be in (0, 1)");
  detail::check_range(c.epsilon >= 0, "epsilon must be positive when given");
  detail::check_range(c.score_samples >= 1, "detector mc_samples must be >= 1");
  detail::check_range(c.threads >= 1, "threads must be >= 1");

  // all referenced output/input paths must be distinct
  std::set<std::string> seen;
  auto claim = [&](const std::string& path, const char* what) {
    if (path.empty()) return;
    if (!seen.insert(path).second)
      throw ConfigError(std::string("config: path used twice: ") + what + " '" + path + "'");
  };
  for (const auto& d : c.paths.datasets) {
    claim(d.csv, "dataset csv");
    claim(d.store, "dataset store");
  }
  claim(c.paths.checkpoint, "checkpoint");
  claim(c.paths.history_csv, "history_csv");
  claim(c.paths.cellmap, "cellmap");
  claim(c.paths.performance_csv, "performance_csv");
  claim(c.paths.verdicts, "verdicts");
  claim(c.paths.geojson, "geojson");
  claim(c.paths.sweep_csv, "sweep_csv");
  claim(c.paths.metrics, "metrics");

  c.echo = j;
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: invalid JSON in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

}  // namespace geotracknet::pipeline
