#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "geotracknet/core/gradcheck.hpp"
#include "geotracknet/vrnn/checkpoint.hpp"
#include "geotracknet/vrnn/train.hpp"
#include "geotracknet/vrnn/vrnn.hpp"

using namespace geotracknet;
using core::Tape;
using core::Tensor;
using core::Var;
using fourhot::EncodedTrack;
using fourhot::FourHotSpec;
using vrnn::VrnnModel;

namespace {

// Small spec with dim 5+5+4+6 = 20 unless overridden.
FourHotSpec tiny_spec(std::size_t n_lat = 5, std::size_t n_lon = 5, std::size_t n_sog = 4,
                      std::size_t n_cog = 6) {
  FourHotSpec s;
  s.roi = {48.0, 48.0 + 0.01 * static_cast<double>(n_lat), -5.0,
           -5.0 + 0.01 * static_cast<double>(n_lon)};
  s.res_lat = 0.01;
  s.res_lon = 0.01;
  s.sog_max = static_cast<double>(n_sog);
  s.res_sog = 1.0;
  s.res_cog = 360.0 / static_cast<double>(n_cog);
  return s;
}

EncodedTrack random_track(const FourHotSpec& spec, std::size_t T, std::uint64_t seed,
                          std::string id = "t") {
  core::Rng rng(seed);
  EncodedTrack track;
  track.spec = spec;
  track.id = std::move(id);
  track.mmsi = 1;
  track.t0 = 0;
  track.dt = 600;
  for (std::size_t t = 0; t < T; ++t) {
    fourhot::FourHotVector v;
    v.i_lat = static_cast<std::uint16_t>(rng.uniform_int(0, static_cast<std::int64_t>(spec.n_lat()) - 1));
    v.i_lon = static_cast<std::uint16_t>(rng.uniform_int(0, static_cast<std::int64_t>(spec.n_lon()) - 1));
    v.i_sog = static_cast<std::uint16_t>(rng.uniform_int(0, static_cast<std::int64_t>(spec.n_sog()) - 1));
    v.i_cog = static_cast<std::uint16_t>(rng.uniform_int(0, static_cast<std::int64_t>(spec.n_cog()) - 1));
    track.states.push_back(v);
  }
  return track;
}

void zero_all(VrnnModel& m) {
  for (Tensor* t : m.parameters()) t->fill(0.0);
}

}  // namespace

TEST_CASE("lstm_step basics") {
  const std::size_t H = 4, X = 6, Z = 4;

  SECTION("zero weights and zero state give zero output") {
    Tape t;
    vrnn::TapeWeights w{};
    w.lstm_W = t.constant(Tensor::matrix(4 * H, X + Z, 0.0));
    w.lstm_U = t.constant(Tensor::matrix(4 * H, H, 0.0));
    w.lstm_b = t.constant(Tensor::vector(4 * H, 0.0));
    vrnn::LstmState s{t.constant(Tensor::vector(H, 0.0)), t.constant(Tensor::vector(H, 0.0))};
    auto out = vrnn::lstm_step(t, w, t.constant(Tensor::vector(X, 0.5)),
                               t.constant(Tensor::vector(Z, -0.5)), s, H);
    for (std::size_t i = 0; i < H; ++i) {
      REQUIRE(t.value(out.h)[i] == 0.0);
      REQUIRE(t.value(out.c)[i] == 0.0);
    }
  }

  SECTION("determinism: identical inputs give identical outputs") {
    core::Rng rng(5);
    auto mk = [&](std::size_t r, std::size_t c) {
      Tensor m = Tensor::matrix(r, c);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-0.3, 0.3);
      return m;
    };
    const Tensor W = mk(4 * H, X + Z), U = mk(4 * H, H);
    const Tensor b = Tensor::vector(4 * H, 0.1);
    const Tensor x = mk(1, X), z = mk(1, Z), h0 = mk(1, H), c0 = mk(1, H);
    auto run = [&]() {
      Tape t;
      vrnn::TapeWeights w{};
      w.lstm_W = t.constant(W);
      w.lstm_U = t.constant(U);
      w.lstm_b = t.constant(b);
      vrnn::LstmState s{t.constant(Tensor::from(h0.values(), {H})),
                        t.constant(Tensor::from(c0.values(), {H}))};
      auto out = vrnn::lstm_step(t, w, t.constant(Tensor::from(x.values(), {X})),
                                 t.constant(Tensor::from(z.values(), {Z})), s, H);
      return t.value(out.h);
    };
    const Tensor h1 = run(), h2 = run();
    for (std::size_t i = 0; i < H; ++i) REQUIRE(h1[i] == h2[i]);
  }

  SECTION("gradient of |h|^2 w.r.t. LSTM weights matches finite differences") {
    core::Rng rng(7);
    auto rnd = [&](Tensor t) {
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-0.4, 0.4);
      return t;
    };
    const Tensor x = rnd(Tensor::vector(X)), z = rnd(Tensor::vector(Z));
    const Tensor h0 = rnd(Tensor::vector(H)), c0 = rnd(Tensor::vector(H));
    auto build = [&](Tape& t, const std::vector<Var>& p) {
      vrnn::TapeWeights w{};
      w.lstm_W = p[0];
      w.lstm_U = p[1];
      w.lstm_b = p[2];
      vrnn::LstmState s{t.constant(h0), t.constant(c0)};
      auto out = vrnn::lstm_step(t, w, t.constant(x), t.constant(z), s, H);
      return t.sum(t.mul(out.h, out.h));
    };
    auto r = core::check_gradients(
        build, {rnd(Tensor::matrix(4 * H, X + Z)), rnd(Tensor::matrix(4 * H, H)), rnd(Tensor::vector(4 * H))},
        1e-5);
    REQUIRE(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("kl of diagonal gaussians") {
  using vrnn::GaussianParams;

  SECTION("q = p gives exactly zero") {
    GaussianParams q{Tensor::from({0.3, -1.2}), Tensor::from({0.7, 2.0})};
    REQUIRE(vrnn::kl_diag_gaussians(q, q) == 0.0);
  }

  SECTION("N(1,1) vs N(0,1) = 0.5") {
    GaussianParams q{Tensor::from({1.0}), Tensor::from({1.0})};
    GaussianParams p{Tensor::from({0.0}), Tensor::from({1.0})};
    REQUIRE(vrnn::kl_diag_gaussians(q, p) == Catch::Approx(0.5).margin(1e-12));
  }

  SECTION("asymmetry in general") {
    GaussianParams q{Tensor::from({1.0}), Tensor::from({0.5})};
    GaussianParams p{Tensor::from({0.0}), Tensor::from({2.0})};
    REQUIRE(vrnn::kl_diag_gaussians(q, p) != vrnn::kl_diag_gaussians(p, q));
  }

  SECTION("non-positive sigma is rejected") {
    GaussianParams q{Tensor::from({0.0}), Tensor::from({0.0})};
    GaussianParams p{Tensor::from({0.0}), Tensor::from({1.0})};
    REQUIRE_THROWS_AS(vrnn::kl_diag_gaussians(q, p), DomainError);
  }

  SECTION("analytic KL matches a Monte Carlo estimate within 3 standard errors") {
    GaussianParams q{Tensor::from({0.8, -0.4, 0.1}), Tensor::from({0.9, 1.4, 0.6})};
    GaussianParams p{Tensor::from({0.0, 0.3, -0.2}), Tensor::from({1.2, 0.8, 1.0})};
    const double analytic = vrnn::kl_diag_gaussians(q, p);

    auto log_pdf = [](double x, double mu, double s) {
      const double d = (x - mu) / s;
      return -0.5 * d * d - std::log(s) - 0.5 * std::log(2.0 * 3.141592653589793);
    };
    core::Rng rng(123);
    const std::size_t N = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      double term = 0.0;
      for (std::size_t d = 0; d < 3; ++d) {
        const double x = q.mean[d] + q.stddev[d] * rng.normal();
        term += log_pdf(x, q.mean[d], q.stddev[d]) - log_pdf(x, p.mean[d], p.stddev[d]);
      }
      sum += term;
      sumsq += term * term;
    }
    const double mc = sum / static_cast<double>(N);
    const double var = (sumsq / static_cast<double>(N) - mc * mc) / static_cast<double>(N);
    const double se = std::sqrt(var);
    REQUIRE(std::fabs(analytic - mc) < 3.0 * se);
  }
}

TEST_CASE("elbo structure and values") {
  const FourHotSpec spec = tiny_spec();

  SECTION("bound signs: every kl >= 0, every elbo_t <= 0") {
    VrnnModel m = VrnnModel::create(spec, 6, 8, 21);
    const EncodedTrack track = random_track(spec, 12, 99);
    auto b = vrnn::elbo(m, track, 2, 7);
    REQUIRE(b.length() == 12);
    for (std::size_t t = 0; t < b.length(); ++t) {
      REQUIRE(b.kl[t] >= 0.0);
      REQUIRE(b.elbo_t[t] <= 0.0);
      REQUIRE(b.elbo_t[t] == Catch::Approx(b.recon[t] - b.kl[t]).margin(1e-12));
    }
  }

  SECTION("zeroed model: reconstruction is exactly D * ln(1/2) and kl is 0") {
    VrnnModel m = VrnnModel::create(spec, 6, 8, 21);
    zero_all(m);
    const EncodedTrack track = random_track(spec, 5, 100);
    auto b = vrnn::elbo(m, track, 3, 11);
    const double expected = static_cast<double>(spec.dim()) * std::log(0.5);
    for (std::size_t t = 0; t < b.length(); ++t) {
      REQUIRE(b.recon[t] == Catch::Approx(expected).margin(1e-9));
      REQUIRE(b.kl[t] == 0.0);
    }
  }

  SECTION("same seed and S give an identical breakdown") {
    VrnnModel m = VrnnModel::create(spec, 6, 8, 22);
    const EncodedTrack track = random_track(spec, 9, 101);
    auto a = vrnn::elbo(m, track, 4, 555);
    auto b = vrnn::elbo(m, track, 4, 555);
    REQUIRE(a.total == b.total);
    for (std::size_t t = 0; t < a.length(); ++t) REQUIRE(a.elbo_t[t] == b.elbo_t[t]);
  }

  SECTION("forcing sigma_q to the floor makes the bound seed-insensitive") {
    VrnnModel m = VrnnModel::create(spec, 6, 8, 23);
    for (Tensor* t : m.parameters())
      for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] *= 0.2;
    // park the posterior stddev head deep in the softplus tail
    m.posterior.stddev_raw.W.fill(0.0);
    m.posterior.stddev_raw.b.fill(-40.0);
    const EncodedTrack track = random_track(spec, 6, 102);
    auto a = vrnn::elbo(m, track, 1, 1);
    auto b = vrnn::elbo(m, track, 1, 2);
    REQUIRE(std::fabs(a.total - b.total) < 1e-6);
  }

  SECTION("multi-sample averaging does not degrade the expected bound") {
    VrnnModel m = VrnnModel::create(spec, 6, 8, 24);
    const std::size_t N = 200;
    std::vector<double> diff(N);
    for (std::size_t i = 0; i < N; ++i) {
      const EncodedTrack track = random_track(spec, 6, 1000 + i, "r" + std::to_string(i));
      const double e16 = vrnn::elbo(m, track, 16, 40 + i).per_message();
      const double e1 = vrnn::elbo(m, track, 1, 90000 + i).per_message();
      diff[i] = e16 - e1;
    }
    double mean = 0.0;
    for (double d : diff) mean += d;
    mean /= static_cast<double>(N);
    double var = 0.0;
    for (double d : diff) var += (d - mean) * (d - mean);
    var /= static_cast<double>(N - 1);
    const double se = std::sqrt(var / static_cast<double>(N));
    REQUIRE(mean >= -3.0 * se);
  }

  SECTION("score variance shrinks with more samples") {
    VrnnModel m = VrnnModel::create(spec, 6, 8, 25);
    double d1 = 0.0, d64 = 0.0;
    const std::size_t N = 40;
    for (std::size_t i = 0; i < N; ++i) {
      const EncodedTrack track = random_track(spec, 6, 2000 + i, "v" + std::to_string(i));
      auto mean_of = [&](int S, std::uint64_t seed) {
        return vrnn::elbo(m, track, S, seed).per_message();
      };
      d1 += std::fabs(mean_of(1, 11 + i) - mean_of(1, 77000 + i));
      d64 += std::fabs(mean_of(64, 11 + i) - mean_of(64, 77000 + i));
    }
    REQUIRE(d64 / static_cast<double>(N) < d1 / static_cast<double>(N));
  }

  SECTION("score_track rejects a spec mismatch") {
    VrnnModel m = VrnnModel::create(spec, 6, 8, 26);
    EncodedTrack track = random_track(tiny_spec(5, 5, 4, 8), 4, 103);
    REQUIRE_THROWS_AS(vrnn::score_track(m, track, 1, 0), fourhot::SpecMismatch);
  }
}

TEST_CASE("full elbo gradient matches finite differences on a small model") {
  // Smaller than the acceptance-gate model so the unit suite stays fast.
  const FourHotSpec spec = tiny_spec(4, 4, 3, 4);  // D = 15
  VrnnModel m = VrnnModel::create(spec, 4, 6, 31);
  const EncodedTrack track = random_track(spec, 3, 300);
  const std::uint64_t noise_seed = 17;

  std::vector<Tensor> params;
  for (Tensor* t : m.parameters()) params.push_back(*t);

  auto build = [&](Tape& tape, const std::vector<Var>& leaves) {
    vrnn::TapeWeights w{};
    std::size_t i = 0;
    w.lstm_W = leaves[i++];
    w.lstm_U = leaves[i++];
    w.lstm_b = leaves[i++];
    w.prior_hW = leaves[i++];
    w.prior_hb = leaves[i++];
    w.prior_mW = leaves[i++];
    w.prior_mb = leaves[i++];
    w.prior_sW = leaves[i++];
    w.prior_sb = leaves[i++];
    w.post_hW = leaves[i++];
    w.post_hb = leaves[i++];
    w.post_mW = leaves[i++];
    w.post_mb = leaves[i++];
    w.post_sW = leaves[i++];
    w.post_sb = leaves[i++];
    w.emis_hW = leaves[i++];
    w.emis_hb = leaves[i++];
    w.emis_lW = leaves[i++];
    w.emis_lb = leaves[i++];
    return vrnn::build_elbo_graph(tape, w, m, track, 1, noise_seed).total;
  };

  auto r = core::check_gradients(build, params, 1e-5);
  INFO("worst group " << r.worst_group << " index " << r.worst_index << " analytic "
                      << r.worst_analytic << " numeric " << r.worst_numeric);
  REQUIRE(r.max_rel_error < 1e-4);
}

TEST_CASE("training") {
  const FourHotSpec spec = tiny_spec();

  SECTION("lr = 0 leaves parameters unchanged") {
    VrnnModel m = VrnnModel::create(spec, 5, 6, 41);
    const VrnnModel before = m;
    std::vector<EncodedTrack> train_set, val_set;
    for (std::size_t i = 0; i < 4; ++i) train_set.push_back(random_track(spec, 6, 500 + i));
    for (std::size_t i = 0; i < 2; ++i) val_set.push_back(random_track(spec, 6, 600 + i));
    vrnn::TrainConfig cfg;
    cfg.lr = 0.0;
    cfg.max_epochs = 3;
    cfg.patience = 99;
    auto result = vrnn::train(m, train_set, val_set, cfg);
    REQUIRE(result.model.same_weights(before));
    REQUIRE(result.history.size() == 3);
  }

  SECTION("a few epochs improve the bound on a learnable pattern") {
    // all tracks sit on the same two alternating symbols
    std::vector<EncodedTrack> train_set, val_set;
    for (std::size_t i = 0; i < 6; ++i) {
      EncodedTrack t;
      t.spec = spec;
      t.id = "fix" + std::to_string(i);
      t.dt = 600;
      for (std::size_t k = 0; k < 8; ++k) {
        fourhot::FourHotVector v;
        v.i_lat = k % 2 ? 1 : 2;
        v.i_lon = 3;
        v.i_sog = 1;
        v.i_cog = k % 2 ? 0 : 5;
        t.states.push_back(v);
      }
      if (i < 4)
        train_set.push_back(t);
      else
        val_set.push_back(t);
    }
    VrnnModel m = VrnnModel::create(spec, 6, 10, 42);
    const double before = vrnn::detail::mean_per_message_elbo(m, val_set, 1, 7, 1);
    vrnn::TrainConfig cfg;
    cfg.lr = 0.003;  // aggressive on purpose, tiny model
    cfg.batch_size = 4;
    cfg.max_epochs = 40;
    cfg.patience = 40;
    cfg.seed = 7;
    auto result = vrnn::train(m, train_set, val_set, cfg);
    REQUIRE(result.best_validation_elbo > before);
    REQUIRE(result.best_epoch >= 1);
  }

  SECTION("thread count does not change the result") {
    std::vector<EncodedTrack> train_set, val_set;
    for (std::size_t i = 0; i < 6; ++i) train_set.push_back(random_track(spec, 5, 700 + i));
    for (std::size_t i = 0; i < 2; ++i) val_set.push_back(random_track(spec, 5, 800 + i));
    auto run = [&](unsigned threads) {
      VrnnModel m = VrnnModel::create(spec, 5, 6, 43);
      vrnn::TrainConfig cfg;
      cfg.max_epochs = 2;
      cfg.patience = 99;
      cfg.batch_size = 3;
      cfg.seed = 9;
      cfg.threads = threads;
      return vrnn::train(m, train_set, val_set, cfg).model;
    };
    REQUIRE(run(1).same_weights(run(3)));
  }
}

TEST_CASE("checkpoint round trip") {
  const FourHotSpec spec = tiny_spec();
  VrnnModel m = VrnnModel::create(spec, 6, 8, 51);
  const EncodedTrack track = random_track(spec, 10, 900);

  const auto dir = std::filesystem::temp_directory_path() / "gtn_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();

  vrnn::HistorySummary hist{12, 9, -41.5};
  vrnn::save_checkpoint(path, m, 77, hist);
  VrnnModel loaded = vrnn::load_checkpoint(path);

  SECTION("weights and metadata survive bitwise") {
    REQUIRE(loaded.same_weights(m));
    REQUIRE(loaded.spec == m.spec);
    REQUIRE(loaded.hidden == m.hidden);
    auto h = vrnn::checkpoint_history(path);
    REQUIRE(h.best_epoch == 9);
    REQUIRE(h.best_validation_elbo == -41.5);
  }

  SECTION("save -> load -> score reproduces scores bitwise") {
    const auto a = vrnn::score_track(m, track, 4, 1234);
    const auto b = vrnn::score_track(loaded, track, 4, 1234);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
  }

  SECTION("a truncated file is rejected") {
    const std::string bad = (dir / "bad.ckpt").string();
    std::ofstream out(bad, std::ios::binary);
    out << "GTNCKPT1xx";
    out.close();
    REQUIRE_THROWS_AS(vrnn::load_checkpoint(bad), DataError);
  }
}
