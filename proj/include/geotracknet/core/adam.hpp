#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "geotracknet/core/errors.hpp"
#include "geotracknet/core/tensor.hpp"

namespace geotracknet::core {

struct AdamConfig {
  double lr = 0.0003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam with per-parameter moment accumulators.
class AdamState {
 public:
  AdamState(AdamConfig cfg, const std::vector<Tensor*>& params) : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor* p : params) {
      Tensor z = *p;
      z.fill(0.0);
      m_.push_back(z);
      v_.push_back(std::move(z));
    }
  }

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return step_; }
  long skipped() const { return skipped_; }
  void note_skipped() { ++skipped_; }

  // Descent step on params in place. Throws NonFiniteGradient (and leaves
  // params and moments untouched) if any gradient entry is not finite.
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw ShapeError("adam: parameter/gradient group count mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
      if (!params[i]->same_shape(grads[i]))
        throw ShapeError("adam: gradient shape mismatch at group " + std::to_string(i));
      if (!grads[i].all_finite())
        throw NonFiniteGradient("adam: non-finite gradient in group " + std::to_string(i));
    }
    ++step_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = *params[i];
      const Tensor& g = grads[i];
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        const double mhat = m[j] / c1;
        const double vhat = v[j] / c2;
        p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  long step_ = 0;
  long skipped_ = 0;
};

inline void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                      AdamState& state) {
  state.step(params, grads);
}

// Global-norm gradient clipping; returns the pre-clip norm.
inline double clip_gradients(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Tensor& g : grads)
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
  }
  return norm;
}

}  // namespace geotracknet::core
