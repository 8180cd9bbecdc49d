#pragma once

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "geotracknet/ais/preprocess.hpp"
#include "geotracknet/io/track_store.hpp"
#include "geotracknet/io/verdicts.hpp"
#include "geotracknet/pipeline/config.hpp"
#include "geotracknet/synth/synthgen.hpp"
#include "geotracknet/vrnn/checkpoint.hpp"

namespace geotracknet::pipeline {

namespace detail {

inline void write_meta_sidecar(const std::string& output_path, const PipelineConfig& cfg,
                               const nlohmann::json& extra = {}) {
  nlohmann::json meta{{"config_echo", cfg.echo}};
  if (!extra.is_null() && !extra.empty()) meta["summary"] = extra;
  std::ofstream out(output_path + ".meta.json", std::ios::trunc);
  if (!out) throw IoError("meta: cannot write '" + output_path + ".meta.json'");
  out << meta.dump(2) << '\n';
}

}  // namespace detail

struct PreprocessSummary {
  std::size_t rows_parsed = 0;
  std::size_t parse_errors = 0;
  std::size_t dropped_outside_roi = 0;
  std::size_t raw_tracks = 0;
  std::size_t tracks_too_short = 0;
  std::size_t chunks_kept = 0;
  std::size_t chunks_dropped_short = 0;
  std::size_t messages_encoded = 0;
};

inline nlohmann::json to_json(const PreprocessSummary& s) {
  return {{"rows_parsed", s.rows_parsed},
          {"parse_errors", s.parse_errors},
          {"dropped_outside_roi", s.dropped_outside_roi},
          {"raw_tracks", s.raw_tracks},
          {"tracks_too_short", s.tracks_too_short},
          {"chunks_kept", s.chunks_kept},
          {"chunks_dropped_short", s.chunks_dropped_short},
          {"messages_encoded", s.messages_encoded}};
}

// clean -> assemble -> resample -> split -> encode for one csv/store pair.
// Track ids are the vessel MMSI, suffixed "#k" when one vessel yields
// several voyage chunks.
inline PreprocessSummary preprocess_dataset(const PipelineConfig& cfg, const std::string& csv,
                                            const std::string& store_path) {
  PreprocessSummary sum;
  auto parsed = ais::parse_ais_csv_file(csv, cfg.csv);
  ais::write_errors_sidecar(csv, parsed.errors);
  sum.rows_parsed = parsed.messages.size() + parsed.errors.size();
  sum.parse_errors = parsed.errors.size();

  auto cleaned = ais::clean_messages(parsed.messages, cfg.fourhot.roi, cfg.sog_max);
  sum.dropped_outside_roi = parsed.messages.size() - cleaned.size();

  auto raw_tracks = ais::assemble_tracks(cleaned, cfg.gap_max_s);
  sum.raw_tracks = raw_tracks.size();

  // chunks per vessel, in time order, for id assignment
  std::map<std::uint64_t, std::vector<ais::ResampledTrack>> chunks_by_vessel;
  for (const auto& raw : raw_tracks) {
    if (raw.messages.size() < 2) {
      ++sum.tracks_too_short;
      continue;
    }
    const auto resampled = ais::resample_track(raw, cfg.dt_s);
    auto chunks = ais::split_voyage(resampled, cfg.dur_min_s, cfg.dur_max_s);
    const std::size_t max_len = static_cast<std::size_t>(cfg.dur_max_s / cfg.dt_s + 1e-9);
    const std::size_t considered = (resampled.states.size() + max_len - 1) / max_len;
    sum.chunks_dropped_short += considered - chunks.size();
    for (auto& chunk : chunks) chunks_by_vessel[raw.mmsi].push_back(std::move(chunk));
  }

  std::vector<fourhot::EncodedTrack> encoded;
  for (auto& [mmsi, chunks] : chunks_by_vessel) {
    for (std::size_t k = 0; k < chunks.size(); ++k) {
      std::string id = std::to_string(mmsi);
      if (chunks.size() > 1) id += "#" + std::to_string(k);
      auto enc = fourhot::encode_track(chunks[k], cfg.fourhot, id);
      sum.messages_encoded += enc.length();
      encoded.push_back(std::move(enc));
      ++sum.chunks_kept;
    }
  }

  io::save_track_store(store_path, cfg.fourhot, encoded,
                       nlohmann::json{{"source_csv", csv}, {"summary", to_json(sum)}});
  detail::write_meta_sidecar(store_path, cfg, to_json(sum));
  return sum;
}

inline std::map<std::string, PreprocessSummary> cmd_preprocess(const PipelineConfig& cfg) {
  if (cfg.paths.datasets.empty())
    throw ConfigError("preprocess: config lists no datasets");
  std::map<std::string, PreprocessSummary> out;
  for (const auto& d : cfg.paths.datasets)
    out[d.name] = preprocess_dataset(cfg, d.csv, d.store);
  return out;
}

inline vrnn::TrainResult cmd_train(const PipelineConfig& cfg) {
  if (cfg.paths.checkpoint.empty()) throw ConfigError("train: paths.checkpoint not set");
  auto train_store = io::load_track_store(cfg.dataset("train").store);
  auto val_store = io::load_track_store(cfg.dataset("validation").store);
  if (!(train_store.spec == val_store.spec))
    throw fourhot::SpecMismatch("train: train/validation stores use different specs");
  if (!(train_store.spec == cfg.fourhot))
    throw fourhot::SpecMismatch("train: store spec differs from config");
  if (train_store.tracks.empty() || val_store.tracks.empty())
    throw DataError("train: empty train or validation store");

  auto model = vrnn::VrnnModel::create(cfg.fourhot, cfg.hidden, cfg.width,
                                       core::mix_seed(cfg.seed, {0x696e6974ULL}));
  auto result = vrnn::train(std::move(model), train_store.tracks, val_store.tracks, cfg.train);

  vrnn::HistorySummary hist{result.history.size(), result.best_epoch,
                            result.best_validation_elbo};
  vrnn::save_checkpoint(cfg.paths.checkpoint, result.model, cfg.seed, hist, cfg.echo);

  if (!cfg.paths.history_csv.empty()) {
    std::ofstream out(cfg.paths.history_csv, std::ios::trunc);
    if (!out) throw IoError("train: cannot write '" + cfg.paths.history_csv + "'");
    out << "epoch,train_elbo,val_elbo\n";
    char buf[96];
    for (const auto& e : result.history) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e.epoch, e.train_elbo,
                    e.validation_elbo);
      out << buf;
    }
    detail::write_meta_sidecar(cfg.paths.history_csv, cfg,
                               {{"best_epoch", result.best_epoch},
                                {"best_validation_elbo", result.best_validation_elbo},
                                {"skipped_batches", result.skipped_batches}});
  }
  return result;
}

inline cellmap::CellMap cmd_build_map(const PipelineConfig& cfg) {
  if (cfg.paths.checkpoint.empty() || cfg.paths.cellmap.empty())
    throw ConfigError("build-map: paths.checkpoint and paths.cellmap must be set");
  auto model = vrnn::load_checkpoint(cfg.paths.checkpoint);
  auto val_store = io::load_track_store(cfg.dataset("validation").store);
  if (!(model.spec == val_store.spec))
    throw fourhot::SpecMismatch("build-map: checkpoint spec differs from validation store");

  cellmap::Provenance prov;
  prov.checkpoint_hash = io::fnv1a_hex(cfg.paths.checkpoint);
  prov.validation_hash = io::fnv1a_hex(cfg.dataset("validation").store);
  prov.p = cfg.p;
  prov.m_min = cfg.m_min;

  auto map = cellmap::build_cell_map(model, val_store.tracks, cfg.grid(), cfg.m_min, cfg.form,
                                     cfg.score_samples, cfg.seed, cfg.threads, prov);
  cellmap::save_cellmap(cfg.paths.cellmap, map, cfg.echo);
  if (!cfg.paths.performance_csv.empty()) {
    cellmap::export_performance_map(map, cfg.paths.performance_csv);
    detail::write_meta_sidecar(cfg.paths.performance_csv, cfg,
                               {{"active_cells", map.active_count()},
                                {"total_samples", map.total_samples()}});
  }
  return map;
}

struct DetectOutput {
  std::vector<contrario::TrackVerdict> verdicts;
  std::vector<contrario::SweepRow> sweep;
  std::size_t abnormal = 0;
};

// Scores the test store against the checkpoint, assigns cells from decoded
// positions, and either writes verdicts (+GeoJSON) at the configured epsilon
// or emits the sweep table computed from cached min-NFA values.
inline DetectOutput cmd_detect(const PipelineConfig& cfg, const std::vector<double>& sweep_grid) {
  if (cfg.paths.checkpoint.empty() || cfg.paths.cellmap.empty())
    throw ConfigError("detect: paths.checkpoint and paths.cellmap must be set");
  const bool sweeping = !sweep_grid.empty();
  if (!sweeping && !(cfg.epsilon > 0.0))
    throw ConfigError("detect: detector.epsilon missing and no --sweep grid given");

  auto model = vrnn::load_checkpoint(cfg.paths.checkpoint);
  auto map = cellmap::load_cellmap(cfg.paths.cellmap);
  auto test_store = io::load_track_store(cfg.dataset("test").store);
  if (!(model.spec == test_store.spec))
    throw fourhot::SpecMismatch("detect: checkpoint spec differs from test store");
  if (!(map.grid.roi == model.spec.roi))
    throw fourhot::SpecMismatch("detect: cell map roi differs from model roi");
  const std::string ckpt_hash = io::fnv1a_hex(cfg.paths.checkpoint);
  if (!map.provenance.checkpoint_hash.empty() && map.provenance.checkpoint_hash != ckpt_hash)
    std::cerr << "warning: cell map was built from a different checkpoint ("
              << map.provenance.checkpoint_hash << " != " << ckpt_hash << ")\n";

  const auto& tracks = test_store.tracks;
  std::vector<std::vector<double>> scores(tracks.size());
  core::parallel_for(tracks.size(), cfg.threads, [&](std::size_t i) {
    scores[i] = vrnn::score_track(model, tracks[i], cfg.score_samples,
                                  core::mix_seed(cfg.seed, {0x646574ULL, i}));
  });

  contrario::DetectorConfig dcfg;
  dcfg.p = cfg.p;
  dcfg.epsilon = sweeping ? 1.0 : cfg.epsilon;  // placeholder while sweeping
  dcfg.score_samples = cfg.score_samples;
  dcfg.seed = cfg.seed;
  contrario::Detector detector(dcfg);
  std::size_t max_len = 0;
  for (const auto& t : tracks) max_len = std::max(max_len, t.length());
  detector.reserve(max_len);

  DetectOutput out;
  out.verdicts.reserve(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& t = tracks[i];
    std::vector<const cellmap::CellModel*> cells;
    cells.reserve(t.length());
    for (const auto& s : t.states) {
      const auto st = fourhot::decode_vector(s, t.spec);
      cells.push_back(&map.cell(cellmap::cell_of(st.lat, st.lon, map.grid)));
    }
    auto v = detector.detect_track(t.id, scores[i], cells);
    v.mmsi = t.mmsi;
    v.t0 = t.t0;
    out.verdicts.push_back(std::move(v));
  }

  if (sweeping) {
    std::vector<double> min_nfas;
    min_nfas.reserve(out.verdicts.size());
    for (const auto& v : out.verdicts) min_nfas.push_back(v.min_nfa.nfa);
    out.sweep = contrario::sweep_epsilon(min_nfas, sweep_grid);
    if (!cfg.paths.sweep_csv.empty()) {
      std::ofstream sw(cfg.paths.sweep_csv, std::ios::trunc);
      if (!sw) throw IoError("detect: cannot write '" + cfg.paths.sweep_csv + "'");
      sw << "epsilon,abnormal_tracks\n";
      char buf[64];
      for (const auto& row : out.sweep) {
        std::snprintf(buf, sizeof buf, "%.17g,%zu\n", row.epsilon, row.abnormal_tracks);
        sw << buf;
      }
      detail::write_meta_sidecar(cfg.paths.sweep_csv, cfg);
    }
    return out;
  }

  for (const auto& v : out.verdicts) out.abnormal += v.abnormal ? 1 : 0;
  if (!cfg.paths.verdicts.empty()) {
    io::write_verdicts_jsonl(cfg.paths.verdicts, out.verdicts);
    detail::write_meta_sidecar(cfg.paths.verdicts, cfg,
                               {{"tracks", out.verdicts.size()}, {"abnormal", out.abnormal}});
  }
  if (!cfg.paths.geojson.empty()) {
    nlohmann::json prov{{"config_echo", cfg.echo}};
    io::write_geojson(cfg.paths.geojson, io::verdicts_to_geojson(out.verdicts, tracks, prov));
  }
  return out;
}

struct EvalReport {
  std::size_t labeled = 0;
  std::size_t joined = 0;
  std::size_t anomalous_labeled = 0;
  std::size_t anomalous_detected = 0;
  std::size_t normal_labeled = 0;
  std::size_t normal_flagged = 0;
  double detection_rate = 0.0;
  double false_positive_rate = 0.0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_kind;  // total, detected
  std::vector<std::string> warnings;
};

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json kinds;
  for (const auto& [kind, counts] : r.per_kind)
    kinds[kind] = {{"total", counts.first}, {"detected", counts.second}};
  return {{"labeled", r.labeled},
          {"joined", r.joined},
          {"anomalous_labeled", r.anomalous_labeled},
          {"anomalous_detected", r.anomalous_detected},
          {"normal_labeled", r.normal_labeled},
          {"normal_flagged", r.normal_flagged},
          {"detection_rate", r.detection_rate},
          {"false_positive_rate", r.false_positive_rate},
          {"per_kind", kinds},
          {"warnings", r.warnings}};
}

// Joins verdicts to generator labels on track_id (intersection, with a
// warning when ids are missing on either side).
inline EvalReport cmd_eval(const PipelineConfig& cfg) {
  if (cfg.paths.verdicts.empty() || cfg.paths.labels.empty())
    throw ConfigError("eval: paths.verdicts and paths.labels must be set");
  const auto verdicts = io::read_verdicts_jsonl(cfg.paths.verdicts);
  const auto labels = synth::read_labels_jsonl(cfg.paths.labels);

  std::map<std::string, const contrario::TrackVerdict*> by_id;
  for (const auto& v : verdicts) by_id[v.track_id] = &v;

  EvalReport r;
  r.labeled = labels.size();
  std::size_t missing = 0;
  for (const auto& label : labels) {
    auto it = by_id.find(label.track_id);
    if (it == by_id.end()) {
      ++missing;
      continue;
    }
    ++r.joined;
    const bool flagged = it->second->abnormal;
    if (label.anomalous) {
      ++r.anomalous_labeled;
      auto& k = r.per_kind[label.kind];
      ++k.first;
      if (flagged) {
        ++r.anomalous_detected;
        ++k.second;
      }
    } else {
      ++r.normal_labeled;
      if (flagged) ++r.normal_flagged;
    }
  }
  if (missing > 0)
    r.warnings.push_back(std::to_string(missing) +
                         " labeled track(s) missing from verdicts; joined on intersection");
  if (verdicts.size() > r.joined)
    r.warnings.push_back(std::to_string(verdicts.size() - r.joined) +
                         " verdict track(s) have no label");
  r.detection_rate = r.anomalous_labeled
                         ? static_cast<double>(r.anomalous_detected) /
                               static_cast<double>(r.anomalous_labeled)
                         : 0.0;
  r.false_positive_rate = r.normal_labeled
                              ? static_cast<double>(r.normal_flagged) /
                                    static_cast<double>(r.normal_labeled)
                              : 0.0;

  if (!cfg.paths.metrics.empty()) {
    std::ofstream out(cfg.paths.metrics, std::ios::trunc);
    if (!out) throw IoError("eval: cannot write '" + cfg.paths.metrics + "'");
    nlohmann::json doc = to_json(r);
    doc["config_echo"] = cfg.echo;
    out << doc.dump(2) << '\n';
  }
  return r;
}

}  // namespace geotracknet::pipeline
