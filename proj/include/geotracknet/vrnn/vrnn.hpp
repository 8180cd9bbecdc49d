#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geotracknet/core/rng.hpp"
#include "geotracknet/core/tape.hpp"
#include "geotracknet/vrnn/model.hpp"

namespace geotracknet::vrnn {

using core::Tape;
using core::Var;

// Model weights registered on a tape, either as trainable leaves (training)
// or constants (scoring).
struct TapeWeights {
  Var lstm_W, lstm_U, lstm_b;
  Var prior_hW, prior_hb, prior_mW, prior_mb, prior_sW, prior_sb;
  Var post_hW, post_hb, post_mW, post_mb, post_sW, post_sb;
  Var emis_hW, emis_hb, emis_lW, emis_lb;

  std::vector<Var> leaves() const {
    return {lstm_W,   lstm_U,   lstm_b,   prior_hW, prior_hb, prior_mW, prior_mb,
            prior_sW, prior_sb, post_hW,  post_hb,  post_mW,  post_mb,  post_sW,
            post_sb,  emis_hW,  emis_hb,  emis_lW,  emis_lb};
  }
};

inline TapeWeights bind_weights(Tape& tape, const VrnnModel& m, bool trainable) {
  auto reg = [&](const Tensor& t) { return trainable ? tape.param(t) : tape.constant(t); };
  TapeWeights w;
  w.lstm_W = reg(m.lstm.W);
  w.lstm_U = reg(m.lstm.U);
  w.lstm_b = reg(m.lstm.b);
  w.prior_hW = reg(m.prior.hidden.W);
  w.prior_hb = reg(m.prior.hidden.b);
  w.prior_mW = reg(m.prior.mean.W);
  w.prior_mb = reg(m.prior.mean.b);
  w.prior_sW = reg(m.prior.stddev_raw.W);
  w.prior_sb = reg(m.prior.stddev_raw.b);
  w.post_hW = reg(m.posterior.hidden.W);
  w.post_hb = reg(m.posterior.hidden.b);
  w.post_mW = reg(m.posterior.mean.W);
  w.post_mb = reg(m.posterior.mean.b);
  w.post_sW = reg(m.posterior.stddev_raw.W);
  w.post_sb = reg(m.posterior.stddev_raw.b);
  w.emis_hW = reg(m.emis_hidden.W);
  w.emis_hb = reg(m.emis_hidden.b);
  w.emis_lW = reg(m.emis_logits.W);
  w.emis_lb = reg(m.emis_logits.b);
  return w;
}

struct LstmState {
  Var h;
  Var c;
};

// One LSTM cell update on input concat(x_prev, z_prev). Gate rows in
// W/U/b are ordered input, forget, cell, output.
inline LstmState lstm_step(Tape& t, const TapeWeights& w, Var x_prev, Var z_prev,
                           const LstmState& state, std::size_t H) {
  Var in = t.concat(x_prev, z_prev);
  Var gates = t.add(t.add(t.matmul(w.lstm_W, in), t.matmul(w.lstm_U, state.h)), w.lstm_b);
  Var gi = t.sigmoid(t.slice(gates, 0, H));
  Var gf = t.sigmoid(t.slice(gates, H, H));
  Var gg = t.tanh(t.slice(gates, 2 * H, H));
  Var go = t.sigmoid(t.slice(gates, 3 * H, H));
  Var c = t.add(t.mul(gf, state.c), t.mul(gi, gg));
  Var h = t.mul(go, t.tanh(c));
  return {h, c};
}

struct GaussianVars {
  Var mean;
  Var stddev;
};

// tanh hidden layer, then mean and softplus-floored stddev heads.
inline GaussianVars gaussian_net(Tape& t, Var in, Var hW, Var hb, Var mW, Var mb, Var sW,
                                 Var sb) {
  Var a = t.tanh(t.add(t.matmul(hW, in), hb));
  Var mean = t.add(t.matmul(mW, a), mb);
  Var stddev = t.add_scalar(t.softplus(t.add(t.matmul(sW, a), sb)), kSigmaFloor);
  return {mean, stddev};
}

// sum_i [ log(sp/sq) + (sq^2 + (mq-mp)^2) / (2 sp^2) - 1/2 ]
inline Var kl_node(Tape& t, const GaussianVars& q, const GaussianVars& p) {
  Var log_ratio = t.add(t.log(p.stddev), t.scale(t.log(q.stddev), -1.0));
  Var dm = t.add(q.mean, t.scale(p.mean, -1.0));
  Var num = t.add(t.mul(q.stddev, q.stddev), t.mul(dm, dm));
  Var den = t.scale(t.mul(p.stddev, p.stddev), 2.0);
  Var per_dim = t.add_scalar(t.add(log_ratio, t.div(num, den)), -0.5);
  return t.sum(per_dim);
}

// Bernoulli log-likelihood of the binary vector x under probabilities
// sigmoid(logits) clamped to [kProbClamp, 1-kProbClamp].
inline Var bernoulli_loglik(Tape& t, Var logits, const Tensor& x) {
  Var theta = t.clamp(t.sigmoid(logits), kProbClamp, 1.0 - kProbClamp);
  Tensor ones_minus_x = x;
  for (auto& v : ones_minus_x.values()) v = 1.0 - v;
  Var on = t.mul(t.constant(x), t.log(theta));
  Var off = t.mul(t.constant(std::move(ones_minus_x)),
                  t.log(t.add_scalar(t.scale(theta, -1.0), 1.0)));
  return t.add(t.sum(on), t.sum(off));
}

struct StepVars {
  Var recon;
  Var kl;
  Var elbo;
};

struct ElboGraph {
  Var total;
  std::vector<StepVars> steps;
};

// Unrolls the full sequence bound: for each t the prior comes from h_t, the
// posterior from (x_t, h_t), z_t is reparameterized noise, reconstruction is
// the S-sample mean Bernoulli log-likelihood from (z_t, h_t), and the state
// advances on concat(x_t, first z_t). Noise is drawn from `seed` alone, so a
// fixed seed pins the whole graph (finite differences rely on this).
inline ElboGraph build_elbo_graph(Tape& t, const TapeWeights& w, const VrnnModel& m,
                                  const fourhot::EncodedTrack& track, int samples,
                                  std::uint64_t seed) {
  if (samples < 1) throw ConfigError("elbo: samples must be >= 1");
  const std::size_t H = m.hidden;
  const std::size_t Z = m.latent;
  core::Rng noise(core::mix_seed(seed, {0x656c626fULL}));

  ElboGraph graph;
  LstmState state{t.constant(Tensor::vector(H, 0.0)), t.constant(Tensor::vector(H, 0.0))};

  for (std::size_t step = 0; step < track.states.size(); ++step) {
    const Tensor x = fourhot::to_dense(track.states[step], m.spec);
    Var x_var = t.constant(x);

    GaussianVars prior =
        gaussian_net(t, state.h, w.prior_hW, w.prior_hb, w.prior_mW, w.prior_mb, w.prior_sW, w.prior_sb);
    GaussianVars post = gaussian_net(t, t.concat(x_var, state.h), w.post_hW, w.post_hb,
                                     w.post_mW, w.post_mb, w.post_sW, w.post_sb);

    Var recon{};
    Var z_first{};
    for (int s = 0; s < samples; ++s) {
      Tensor eta = Tensor::vector(Z);
      for (std::size_t i = 0; i < Z; ++i) eta[i] = noise.normal();
      Var z = t.add(post.mean, t.mul(post.stddev, t.constant(std::move(eta))));
      if (s == 0) z_first = z;
      Var hid = t.tanh(t.add(t.matmul(w.emis_hW, t.concat(z, state.h)), w.emis_hb));
      Var logits = t.add(t.matmul(w.emis_lW, hid), w.emis_lb);
      Var ll = bernoulli_loglik(t, logits, x);
      recon = (s == 0) ? ll : t.add(recon, ll);
    }
    if (samples > 1) recon = t.scale(recon, 1.0 / static_cast<double>(samples));

    Var kl = kl_node(t, post, prior);
    Var elbo_t = t.add(recon, t.scale(kl, -1.0));
    graph.steps.push_back({recon, kl, elbo_t});
    graph.total = (step == 0) ? elbo_t : t.add(graph.total, elbo_t);

    state = lstm_step(t, w, x_var, z_first, state, H);
  }
  return graph;
}

// Per-timestep bound decomposition; recon - kl = elbo_t <= 0 and kl >= 0.
struct ElboBreakdown {
  std::vector<double> recon;
  std::vector<double> kl;
  std::vector<double> elbo_t;
  double total = 0.0;

  std::size_t length() const { return elbo_t.size(); }
  double per_message() const {
    return elbo_t.empty() ? 0.0 : total / static_cast<double>(elbo_t.size());
  }
};

inline ElboBreakdown elbo(const VrnnModel& m, const fourhot::EncodedTrack& track, int samples,
                          std::uint64_t seed) {
  if (track.states.empty()) throw DataError("elbo: empty track");
  Tape tape;
  TapeWeights w = bind_weights(tape, m, /*trainable=*/false);
  ElboGraph g = build_elbo_graph(tape, w, m, track, samples, seed);
  ElboBreakdown out;
  out.recon.reserve(g.steps.size());
  for (std::size_t i = 0; i < g.steps.size(); ++i) {
    const double recon = tape.scalar_value(g.steps[i].recon);
    const double kl = tape.scalar_value(g.steps[i].kl);
    const double e = tape.scalar_value(g.steps[i].elbo);
    if (!std::isfinite(e))
      throw NonFiniteValue("elbo: non-finite value at timestep " + std::to_string(i));
    out.recon.push_back(recon);
    out.kl.push_back(kl);
    out.elbo_t.push_back(e);
    out.total += e;
  }
  return out;
}

// Per-message scores l_t: the per-timestep bound on log p(x_t | h_t),
// Monte Carlo averaged over `samples` draws; deterministic given seed.
inline std::vector<double> score_track(const VrnnModel& m, const fourhot::EncodedTrack& track,
                                       int samples, std::uint64_t seed) {
  if (!(track.spec == m.spec))
    throw fourhot::SpecMismatch("score: track '" + track.id +
                                "' was encoded under a different four-hot spec");
  return elbo(m, track, samples, seed).elbo_t;
}

}  // namespace geotracknet::vrnn
