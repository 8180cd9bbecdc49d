#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "geotracknet/core/rng.hpp"
#include "geotracknet/core/tensor.hpp"
#include "geotracknet/fourhot/fourhot.hpp"

namespace geotracknet::vrnn {

using core::Tensor;

// Diagonal Gaussian, sigma strictly positive.
struct GaussianParams {
  Tensor mean;
  Tensor stddev;
};

// y = W x + b
struct Dense {
  Tensor W;
  Tensor b;
};

// tanh hidden layer feeding a mean head and a raw-stddev head
// (sigma = softplus(raw) + 1e-6).
struct GaussianNet {
  Dense hidden;
  Dense mean;
  Dense stddev_raw;
};

// Gate layout in W/U/b: input, forget, cell, output (4H rows).
struct LstmParams {
  Tensor W;  // [4H, input]
  Tensor U;  // [4H, H]
  Tensor b;  // [4H]
};

inline constexpr double kSigmaFloor = 1e-6;
inline constexpr double kProbClamp = 1e-6;

// Full parameter set of the track model: LSTM recurrence over
// concat(x_{t-1}, z_{t-1}), Gaussian prior p(z|h) and posterior q(z|x,h),
// and a Bernoulli emission over the four-hot dimension.
struct VrnnModel {
  fourhot::FourHotSpec spec;
  std::size_t hidden = 100;
  std::size_t latent = 100;  // always equal to hidden
  std::size_t width = 100;   // hidden-layer size of the three subnets
  std::string version = "1";
  std::uint64_t init_seed = 0;

  LstmParams lstm;
  GaussianNet prior;      // h -> (mu_p, sigma_p)
  GaussianNet posterior;  // (x, h) -> (mu_q, sigma_q)
  Dense emis_hidden;      // (z, h) -> tanh hidden
  Dense emis_logits;      // hidden -> D logits

  std::size_t dim() const { return spec.dim(); }

  std::vector<std::pair<std::string, Tensor*>> named_parameters() {
    return {
        {"lstm.W", &lstm.W},
        {"lstm.U", &lstm.U},
        {"lstm.b", &lstm.b},
        {"prior.hidden.W", &prior.hidden.W},
        {"prior.hidden.b", &prior.hidden.b},
        {"prior.mean.W", &prior.mean.W},
        {"prior.mean.b", &prior.mean.b},
        {"prior.stddev_raw.W", &prior.stddev_raw.W},
        {"prior.stddev_raw.b", &prior.stddev_raw.b},
        {"posterior.hidden.W", &posterior.hidden.W},
        {"posterior.hidden.b", &posterior.hidden.b},
        {"posterior.mean.W", &posterior.mean.W},
        {"posterior.mean.b", &posterior.mean.b},
        {"posterior.stddev_raw.W", &posterior.stddev_raw.W},
        {"posterior.stddev_raw.b", &posterior.stddev_raw.b},
        {"emission.hidden.W", &emis_hidden.W},
        {"emission.hidden.b", &emis_hidden.b},
        {"emission.logits.W", &emis_logits.W},
        {"emission.logits.b", &emis_logits.b},
    };
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
  }

  std::vector<const Tensor*> parameters() const {
    auto& self = const_cast<VrnnModel&>(*this);
    std::vector<const Tensor*> out;
    for (auto& [name, t] : self.named_parameters()) out.push_back(t);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* t : parameters()) n += t->size();
    return n;
  }

  // LSTM weights uniform in [-0.08, 0.08], dense layers fan-in-scaled
  // normal, biases zero. One seeded stream in fixed parameter order.
  static VrnnModel create(const fourhot::FourHotSpec& spec, std::size_t hidden,
                          std::size_t width, std::uint64_t seed) {
    spec.validate();
    VrnnModel m;
    m.spec = spec;
    m.hidden = hidden;
    m.latent = hidden;
    m.width = width;
    m.init_seed = seed;

    const std::size_t D = spec.dim();
    const std::size_t H = hidden;
    const std::size_t Z = m.latent;
    core::Rng rng(core::mix_seed(seed, {0x6d6f64656cULL}));

    auto uniform_init = [&](std::size_t r, std::size_t c) {
      Tensor t = Tensor::matrix(r, c);
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-0.08, 0.08);
      return t;
    };
    auto dense_init = [&](std::size_t out, std::size_t in) {
      Dense d;
      d.W = Tensor::matrix(out, in);
      const double scale = 1.0 / std::sqrt(static_cast<double>(in));
      for (std::size_t i = 0; i < d.W.size(); ++i) d.W[i] = rng.normal(0.0, scale);
      d.b = Tensor::vector(out, 0.0);
      return d;
    };
    auto gaussian_net = [&](std::size_t in) {
      GaussianNet g;
      g.hidden = dense_init(width, in);
      g.mean = dense_init(Z, width);
      g.stddev_raw = dense_init(Z, width);
      return g;
    };

    m.lstm.W = uniform_init(4 * H, D + Z);
    m.lstm.U = uniform_init(4 * H, H);
    m.lstm.b = Tensor::vector(4 * H, 0.0);
    m.prior = gaussian_net(H);
    m.posterior = gaussian_net(D + H);
    m.emis_hidden = dense_init(width, Z + H);
    m.emis_logits = dense_init(D, width);
    return m;
  }

  bool same_weights(const VrnnModel& o) const {
    auto a = parameters();
    auto b = o.parameters();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i]->same_shape(*b[i])) return false;
      for (std::size_t j = 0; j < a[i]->size(); ++j)
        if ((*a[i])[j] != (*b[i])[j]) return false;
    }
    return true;
  }
};

// Closed-form KL between diagonal Gaussians, KL[q || p] >= 0.
inline double kl_diag_gaussians(const GaussianParams& q, const GaussianParams& p) {
  if (q.mean.size() != p.mean.size() || q.stddev.size() != p.stddev.size() ||
      q.mean.size() != q.stddev.size())
    throw ShapeError("kl: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < q.mean.size(); ++i) {
    const double sq = q.stddev[i], sp = p.stddev[i];
    if (!(sq > 0.0) || !(sp > 0.0)) throw DomainError("kl: non-positive stddev");
    const double dm = q.mean[i] - p.mean[i];
    acc += std::log(sp / sq) + (sq * sq + dm * dm) / (2.0 * sp * sp) - 0.5;
  }
  return acc;
}

}  // namespace geotracknet::vrnn
