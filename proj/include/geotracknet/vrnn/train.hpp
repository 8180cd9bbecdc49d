#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "geotracknet/core/adam.hpp"
#include "geotracknet/core/parallel.hpp"
#include "geotracknet/vrnn/vrnn.hpp"

namespace geotracknet::vrnn {

struct TrainConfig {
  double lr = 0.0003;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;      // epochs without validation improvement
  int mc_samples = 1;            // S during training
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const {
    if (!(lr >= 0.0)) throw ConfigError("train: lr must be >= 0");
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (mc_samples < 1) throw ConfigError("train: mc_samples must be >= 1");
  }
};

struct EpochStats {
  std::size_t epoch = 0;          // 1-based
  double train_elbo = 0.0;        // mean per-message bound over train tracks
  double validation_elbo = 0.0;   // same over validation tracks
};

struct TrainResult {
  VrnnModel model;  // best-validation checkpoint
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  double best_validation_elbo = 0.0;
  long skipped_batches = 0;
};

namespace detail {

// Mean per-message ELBO over a track set. Per-track seeds depend only on the
// track index, so epoch-to-epoch validation numbers are comparable.
inline double mean_per_message_elbo(const VrnnModel& m,
                                    const std::vector<fourhot::EncodedTrack>& tracks,
                                    int samples, std::uint64_t seed, unsigned threads) {
  std::vector<double> per_track(tracks.size());
  core::parallel_for(tracks.size(), threads, [&](std::size_t i) {
    per_track[i] =
        elbo(m, tracks[i], samples, core::mix_seed(seed, {0x76616cULL, i})).per_message();
  });
  double acc = 0.0;
  for (double v : per_track) acc += v;
  return tracks.empty() ? 0.0 : acc / static_cast<double>(tracks.size());
}

}  // namespace detail

// Minimizes -mean ELBO with Adam over shuffled whole-track batches.
// Per-track passes inside a batch may run in parallel; the gradient
// reduction is an ordered sum over batch slots, so results do not depend on
// the thread count. Returns the best-validation model.
inline TrainResult train(VrnnModel model, const std::vector<fourhot::EncodedTrack>& train_set,
                         const std::vector<fourhot::EncodedTrack>& validation_set,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty() || validation_set.empty())
    throw DataError("train: empty train or validation set");

  core::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  std::vector<Tensor*> params = model.parameters();
  core::AdamState adam(adam_cfg, params);

  TrainResult result;
  result.best_validation_elbo = -std::numeric_limits<double>::infinity();
  result.best_epoch = 0;
  result.model = model;  // placeholder until the first epoch completes

  std::size_t stall = 0;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    core::Rng shuffle_rng(core::mix_seed(cfg.seed, {0x73687566ULL, epoch}));
    shuffle_rng.shuffle(order);

    double epoch_bound = 0.0;
    std::size_t epoch_messages = 0;
    std::size_t batches = 0, skipped_now = 0;

    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - at);
      std::vector<std::vector<Tensor>> slot_grads(count);
      std::vector<double> slot_total(count), slot_msgs(count);

      core::parallel_for(count, cfg.threads, [&](std::size_t slot) {
        const std::size_t track_idx = order[at + slot];
        const fourhot::EncodedTrack& track = train_set[track_idx];
        Tape tape;
        TapeWeights w = bind_weights(tape, model, /*trainable=*/true);
        ElboGraph g = build_elbo_graph(tape, w, model, track, cfg.mc_samples,
                                       core::mix_seed(cfg.seed, {0x747261696eULL, epoch, track_idx}));
        tape.backward(g.total);
        std::vector<Tensor> grads;
        grads.reserve(19);
        for (Var leaf : w.leaves()) grads.push_back(tape.grad(leaf));
        slot_grads[slot] = std::move(grads);
        slot_total[slot] = tape.scalar_value(g.total);
        slot_msgs[slot] = static_cast<double>(track.length());
      });

      // ordered reduction: loss = -(1/B) sum_b elbo_b
      std::vector<Tensor> grads = std::move(slot_grads[0]);
      for (std::size_t slot = 1; slot < count; ++slot)
        for (std::size_t gi = 0; gi < grads.size(); ++gi)
          for (std::size_t j = 0; j < grads[gi].size(); ++j)
            grads[gi][j] += slot_grads[slot][gi][j];
      const double scale = -1.0 / static_cast<double>(count);
      for (Tensor& g : grads)
        for (std::size_t j = 0; j < g.size(); ++j) g[j] *= scale;

      core::clip_gradients(grads, cfg.clip_norm);
      ++batches;
      try {
        core::adam_step(params, grads, adam);
      } catch (const NonFiniteGradient&) {
        adam.note_skipped();
        ++skipped_now;
      }
      for (std::size_t slot = 0; slot < count; ++slot) {
        epoch_bound += slot_total[slot];
        epoch_messages += static_cast<std::size_t>(slot_msgs[slot]);
      }
    }

    if (batches > 0 && skipped_now == batches)
      throw NumericError("train: every batch in epoch " + std::to_string(epoch) +
                         " had non-finite gradients");

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_elbo = epoch_messages ? epoch_bound / static_cast<double>(epoch_messages) : 0.0;
    stats.validation_elbo = detail::mean_per_message_elbo(model, validation_set, cfg.mc_samples,
                                                          cfg.seed, cfg.threads);
    result.history.push_back(stats);

    if (stats.validation_elbo > result.best_validation_elbo) {
      result.best_validation_elbo = stats.validation_elbo;
      result.best_epoch = epoch;
      result.model = model;
      stall = 0;
    } else if (++stall >= cfg.patience) {
      break;
    }
  }

  result.skipped_batches = adam.skipped();
  return result;
}

}  // namespace geotracknet::vrnn
