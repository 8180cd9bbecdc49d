// Pipeline driver: preprocess | train | build-map | detect | eval, all
// configured by one JSON file. Exit codes: 0 ok, 1 usage/config, 2 data
// error, 3 numeric failure.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "geotracknet/pipeline/commands.hpp"

namespace {

using namespace geotracknet;

std::vector<double> parse_sweep_grid(const std::string& arg) {
  std::vector<double> grid;
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      grid.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("detect: bad --sweep value '" + item + "'");
    }
    if (!(grid.back() > 0.0)) throw ConfigError("detect: sweep epsilons must be positive");
  }
  if (grid.empty()) throw ConfigError("detect: empty --sweep grid");
  return grid;
}

int run(int argc, char** argv) {
  CLI::App app{"vessel-track anomaly detection pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string sweep_arg;
  unsigned threads_override = 0;
  app.add_option("--threads", threads_override, "cap worker threads (overrides config)");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "pipeline config JSON")->required();
    return sub;
  };
  auto* cmd_pre = add_common(app.add_subcommand("preprocess", "csv -> encoded track stores"));
  auto* cmd_train = add_common(app.add_subcommand("train", "fit the track model"));
  auto* cmd_map = add_common(app.add_subcommand("build-map", "fit per-cell score distributions"));
  auto* cmd_detect = add_common(app.add_subcommand("detect", "score and flag test tracks"));
  cmd_detect->add_option("--sweep", sweep_arg, "comma-separated epsilon grid; emits counts instead of verdicts");
  auto* cmd_eval = add_common(app.add_subcommand("eval", "verdicts vs labels metrics"));

  CLI11_PARSE(app, argc, argv);

  auto cfg = pipeline::load_config(config_path);
  if (threads_override > 0) {
    cfg.threads = threads_override;
    cfg.train.threads = threads_override;
  }

  if (cmd_pre->parsed()) {
    auto summaries = pipeline::cmd_preprocess(cfg);
    for (const auto& [name, s] : summaries)
      std::printf("%s: %zu rows -> %zu tracks (%zu messages), %zu parse errors\n", name.c_str(),
                  s.rows_parsed, s.chunks_kept, s.messages_encoded, s.parse_errors);
  } else if (cmd_train->parsed()) {
    auto result = pipeline::cmd_train(cfg);
    std::printf("trained %zu epochs, best epoch %zu, best validation elbo %.6f\n",
                result.history.size(), result.best_epoch, result.best_validation_elbo);
  } else if (cmd_map->parsed()) {
    auto map = pipeline::cmd_build_map(cfg);
    std::printf("cell map: %zu/%zu active cells, %zu samples\n", map.active_count(),
                map.cells.size(), map.total_samples());
  } else if (cmd_detect->parsed()) {
    std::vector<double> grid;
    if (!sweep_arg.empty()) grid = parse_sweep_grid(sweep_arg);
    auto out = pipeline::cmd_detect(cfg, grid);
    if (!grid.empty()) {
      std::printf("epsilon,abnormal_tracks\n");
      for (const auto& row : out.sweep)
        std::printf("%g,%zu\n", row.epsilon, row.abnormal_tracks);
    } else {
      std::printf("%zu/%zu tracks abnormal at epsilon %g\n", out.abnormal, out.verdicts.size(),
                  cfg.epsilon);
    }
  } else if (cmd_eval->parsed()) {
    auto r = pipeline::cmd_eval(cfg);
    std::printf("joined %zu/%zu, detection rate %.3f, false positive rate %.3f\n", r.joined,
                r.labeled, r.detection_rate, r.false_positive_rate);
    for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
