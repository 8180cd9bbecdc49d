#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "geotracknet/core/errors.hpp"
#include "geotracknet/core/tensor.hpp"

namespace geotracknet::core {

// Floor used by the guarded log/div variants: log(max(x, kGuardFloor)).
inline constexpr double kGuardFloor = 1e-12;

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double stable_softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

// Handle to a node on a Tape. Only valid for the tape that produced it.
struct Var {
  std::uint32_t id = 0;
};

// Define-by-run reverse-mode tape. Records one node per primitive in
// execution order, which is also a topological order; backward() walks the
// record in reverse. Single-threaded by contract; run one tape per worker.
class Tape {
  enum class Op : std::uint8_t {
    kConstant,
    kParam,
    kMatMul,
    kAdd,        // same shape, or [m,n] + [n] broadcast over the leading axis
    kMul,
    kDiv,        // guarded: denominator floored at kGuardFloor
    kTanh,
    kSigmoid,
    kExp,
    kLog,        // guarded: log(max(x, kGuardFloor))
    kSoftplus,
    kConcat,     // vectors
    kSlice,      // contiguous vector slice
    kSum,        // -> scalar
    kLogSumExp,  // -> scalar, max-shifted
    kScale,      // elementwise a*s
    kAddScalar,  // elementwise a+s
    kClamp,      // elementwise clamp to [lo, hi]
  };

  struct Node {
    Op op;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    Tensor value;
    double p0 = 0.0;  // scale factor / added scalar / clamp lo / slice begin
    double p1 = 0.0;  // clamp hi / slice length
    bool trainable = false;
  };

 public:
  Var constant(Tensor v) { return push(Op::kConstant, 0, 0, std::move(v)); }

  Var param(Tensor v) {
    Var id = push(Op::kParam, 0, 0, std::move(v));
    nodes_[id.id].trainable = true;
    return id;
  }

  // [m,n]x[n] -> [m] or [m,n]x[n,p] -> [m,p]
  Var matmul(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2) throw ShapeError("matmul: lhs must be rank 2, got " + A.shape_str());
    const std::size_t m = A.shape()[0], n = A.shape()[1];
    if (B.rank() == 1) {
      if (B.shape()[0] != n)
        throw ShapeError("matmul: " + A.shape_str() + " x " + B.shape_str());
      Tensor y = Tensor::vector(m);
      for (std::size_t i = 0; i < m; ++i) y[i] = dot(A.data() + i * n, B.data(), n);
      return push(Op::kMatMul, a.id, b.id, std::move(y));
    }
    if (B.rank() == 2) {
      if (B.shape()[0] != n)
        throw ShapeError("matmul: " + A.shape_str() + " x " + B.shape_str());
      const std::size_t p = B.shape()[1];
      Tensor y = Tensor::matrix(m, p);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) {
          const double aik = A.at(i, k);
          for (std::size_t j = 0; j < p; ++j) y.at(i, j) += aik * B.at(k, j);
        }
      return push(Op::kMatMul, a.id, b.id, std::move(y));
    }
    throw ShapeError("matmul: rhs must be rank 1 or 2");
  }

  Var add(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.same_shape(B)) {
      Tensor y = A;
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += B[i];
      return push(Op::kAdd, a.id, b.id, std::move(y));
    }
    // [m,n] + [n]: broadcast rhs over the leading axis
    if (A.rank() == 2 && B.rank() == 1 && A.shape()[1] == B.shape()[0]) {
      Tensor y = A;
      const std::size_t m = A.shape()[0], n = A.shape()[1];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) y.at(i, j) += B[j];
      return push(Op::kAdd, a.id, b.id, std::move(y));
    }
    throw ShapeError("add: incompatible shapes " + A.shape_str() + " + " + B.shape_str());
  }

  Var mul(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B))
      throw ShapeError("mul: shape mismatch " + A.shape_str() + " * " + B.shape_str());
    Tensor y = A;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= B[i];
    return push(Op::kMul, a.id, b.id, std::move(y));
  }

  Var div(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B))
      throw ShapeError("div: shape mismatch " + A.shape_str() + " / " + B.shape_str());
    Tensor y = A;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] /= std::max(B[i], kGuardFloor);
    return push(Op::kDiv, a.id, b.id, std::move(y));
  }

  Var tanh(Var a) {
    Tensor y = val(a);
    for (auto& v : y.values()) v = std::tanh(v);
    return push(Op::kTanh, a.id, 0, std::move(y));
  }

  Var sigmoid(Var a) {
    Tensor y = val(a);
    for (auto& v : y.values()) v = stable_sigmoid(v);
    return push(Op::kSigmoid, a.id, 0, std::move(y));
  }

  Var exp(Var a) {
    Tensor y = val(a);
    for (auto& v : y.values()) v = std::exp(v);
    return push(Op::kExp, a.id, 0, std::move(y));
  }

  Var log(Var a) {
    Tensor y = val(a);
    for (auto& v : y.values()) v = std::log(std::max(v, kGuardFloor));
    return push(Op::kLog, a.id, 0, std::move(y));
  }

  Var softplus(Var a) {
    Tensor y = val(a);
    for (auto& v : y.values()) v = stable_softplus(v);
    return push(Op::kSoftplus, a.id, 0, std::move(y));
  }

  Var concat(Var a, Var b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 1 || B.rank() != 1) throw ShapeError("concat: vectors only");
    Tensor y = Tensor::vector(A.size() + B.size());
    std::copy(A.data(), A.data() + A.size(), y.data());
    std::copy(B.data(), B.data() + B.size(), y.data() + A.size());
    return push(Op::kConcat, a.id, b.id, std::move(y));
  }

  Var slice(Var a, std::size_t begin, std::size_t len) {
    const Tensor& A = val(a);
    if (A.rank() != 1) throw ShapeError("slice: vectors only");
    if (begin + len > A.size()) throw ShapeError("slice: out of range");
    Tensor y = Tensor::vector(len);
    std::copy(A.data() + begin, A.data() + begin + len, y.data());
    Var v = push(Op::kSlice, a.id, 0, std::move(y));
    nodes_[v.id].p0 = static_cast<double>(begin);
    nodes_[v.id].p1 = static_cast<double>(len);
    return v;
  }

  Var sum(Var a) {
    const Tensor& A = val(a);
    double acc = 0.0;  // fixed left-to-right order
    for (std::size_t i = 0; i < A.size(); ++i) acc += A[i];
    return push(Op::kSum, a.id, 0, Tensor::scalar(acc));
  }

  Var log_sum_exp(Var a) {
    const Tensor& A = val(a);
    if (A.size() == 0) throw ShapeError("log_sum_exp: empty input");
    double mx = A[0];
    for (std::size_t i = 1; i < A.size(); ++i) mx = std::max(mx, A[i]);
    double acc = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) acc += std::exp(A[i] - mx);
    return push(Op::kLogSumExp, a.id, 0, Tensor::scalar(mx + std::log(acc)));
  }

  Var scale(Var a, double s) {
    Tensor y = val(a);
    for (auto& v : y.values()) v *= s;
    Var out = push(Op::kScale, a.id, 0, std::move(y));
    nodes_[out.id].p0 = s;
    return out;
  }

  Var add_scalar(Var a, double s) {
    Tensor y = val(a);
    for (auto& v : y.values()) v += s;
    Var out = push(Op::kAddScalar, a.id, 0, std::move(y));
    nodes_[out.id].p0 = s;
    return out;
  }

  Var clamp(Var a, double lo, double hi) {
    Tensor y = val(a);
    for (auto& v : y.values()) v = std::min(std::max(v, lo), hi);
    Var out = push(Op::kClamp, a.id, 0, std::move(y));
    nodes_[out.id].p0 = lo;
    nodes_[out.id].p1 = hi;
    return out;
  }

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  double scalar_value(Var v) const { return nodes_[v.id].value[0]; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse accumulation from a scalar output. Gradients of every node are
  // available through grad() afterwards; leaves keep theirs until the next
  // backward() or clear().
  void backward(Var output) {
    const Tensor& out = val(output);
    if (!out.is_scalar()) throw GradError("backward: output must be scalar");
    grads_.assign(nodes_.size(), Tensor{});
    touch(output.id) [0] = 1.0;
    for (std::size_t idx = output.id + 1; idx-- > 0;) {
      const Node& node = nodes_[idx];
      if (grads_[idx].size() == 0) continue;  // not on any path to the output
      const Tensor& g = grads_[idx];
      switch (node.op) {
        case Op::kConstant:
        case Op::kParam:
          break;
        case Op::kMatMul: {
          const Tensor& A = nodes_[node.a].value;
          const Tensor& B = nodes_[node.b].value;
          Tensor& dA = touch(node.a);
          Tensor& dB = touch(node.b);
          const std::size_t m = A.shape()[0], n = A.shape()[1];
          if (B.rank() == 1) {
            for (std::size_t i = 0; i < m; ++i) {
              const double gi = g[i];
              if (gi == 0.0) continue;
              const double* brow = B.data();
              double* darow = dA.data() + i * n;
              for (std::size_t j = 0; j < n; ++j) darow[j] += gi * brow[j];
            }
            for (std::size_t i = 0; i < m; ++i) {
              const double gi = g[i];
              if (gi == 0.0) continue;
              const double* arow = A.data() + i * n;
              for (std::size_t j = 0; j < n; ++j) dB[j] += arow[j] * gi;
            }
          } else {
            const std::size_t p = B.shape()[1];
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < p; ++j) {
                const double gij = g[i * p + j];
                if (gij == 0.0) continue;
                for (std::size_t k = 0; k < n; ++k) {
                  dA.at(i, k) += gij * B.at(k, j);
                  dB.at(k, j) += A.at(i, k) * gij;
                }
              }
          }
          break;
        }
        case Op::kAdd: {
          const Tensor& A = nodes_[node.a].value;
          const Tensor& B = nodes_[node.b].value;
          Tensor& dA = touch(node.a);
          Tensor& dB = touch(node.b);
          for (std::size_t i = 0; i < g.size(); ++i) dA[i] += g[i];
          if (A.same_shape(B)) {
            for (std::size_t i = 0; i < g.size(); ++i) dB[i] += g[i];
          } else {  // broadcast over leading axis
            const std::size_t m = A.shape()[0], n = A.shape()[1];
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < n; ++j) dB[j] += g[i * n + j];
          }
          break;
        }
        case Op::kMul: {
          const Tensor& A = nodes_[node.a].value;
          const Tensor& B = nodes_[node.b].value;
          Tensor& dA = touch(node.a);
          Tensor& dB = touch(node.b);
          for (std::size_t i = 0; i < g.size(); ++i) {
            dA[i] += g[i] * B[i];
            dB[i] += g[i] * A[i];
          }
          break;
        }
        case Op::kDiv: {
          const Tensor& B = nodes_[node.b].value;
          Tensor& dA = touch(node.a);
          Tensor& dB = touch(node.b);
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (B[i] > kGuardFloor) {
              dA[i] += g[i] / B[i];
              dB[i] -= g[i] * node.value[i] / B[i];
            } else {
              dA[i] += g[i] / kGuardFloor;  // d/db is zero in the clamped region
            }
          }
          break;
        }
        case Op::kTanh: {
          Tensor& dA = touch(node.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            dA[i] += g[i] * (1.0 - node.value[i] * node.value[i]);
          break;
        }
        case Op::kSigmoid: {
          Tensor& dA = touch(node.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            dA[i] += g[i] * node.value[i] * (1.0 - node.value[i]);
          break;
        }
        case Op::kExp: {
          Tensor& dA = touch(node.a);
          for (std::size_t i = 0; i < g.size(); ++i) dA[i] += g[i] * node.value[i];
          break;
        }
        case Op::kLog: {
          const Tensor& A = nodes_[node.a].value;
          Tensor& dA = touch(node.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            if (A[i] > kGuardFloor) dA[i] += g[i] / A[i];
          break;
        }
        case Op::kSoftplus: {
          const Tensor& A = nodes_[node.a].value;
          Tensor& dA = touch(node.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            dA[i] += g[i] * stable_sigmoid(A[i]);
          break;
        }
        case Op::kConcat: {
          Tensor& dA = touch(node.a);
          Tensor& dB = touch(node.b);
          const std::size_t na = dA.size();
          for (std::size_t i = 0; i < na; ++i) dA[i] += g[i];
          for (std::size_t i = 0; i < dB.size(); ++i) dB[i] += g[na + i];
          break;
        }
        case Op::kSlice: {
          Tensor& dA = touch(node.a);
          const std::size_t begin = static_cast<std::size_t>(node.p0);
          for (std::size_t i = 0; i < g.size(); ++i) dA[begin + i] += g[i];
          break;
        }
        case Op::kSum: {
          Tensor& dA = touch(node.a);
          const double gv = g[0];
          for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += gv;
          break;
        }
        case Op::kLogSumExp: {
          const Tensor& A = nodes_[node.a].value;
          Tensor& dA = touch(node.a);
          const double y = node.value[0], gv = g[0];
          for (std::size_t i = 0; i < dA.size(); ++i)
            dA[i] += gv * std::exp(A[i] - y);
          break;
        }
        case Op::kScale: {
          Tensor& dA = touch(node.a);
          for (std::size_t i = 0; i < g.size(); ++i) dA[i] += g[i] * node.p0;
          break;
        }
        case Op::kAddScalar: {
          Tensor& dA = touch(node.a);
          for (std::size_t i = 0; i < g.size(); ++i) dA[i] += g[i];
          break;
        }
        case Op::kClamp: {
          const Tensor& A = nodes_[node.a].value;
          Tensor& dA = touch(node.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            if (A[i] >= node.p0 && A[i] <= node.p1) dA[i] += g[i];
          break;
        }
      }
    }
  }

  // Gradient of the last backward() output w.r.t. node v (zeros if v was
  // not reached).
  Tensor grad(Var v) const {
    if (v.id < grads_.size() && grads_[v.id].size() > 0) return grads_[v.id];
    return zeros_like(nodes_[v.id].value);
  }

  void clear() {
    nodes_.clear();
    grads_.clear();
  }

 private:
  static Tensor zeros_like(const Tensor& t) {
    Tensor z = t;
    z.fill(0.0);
    return z;
  }

  const Tensor& val(Var v) const {
    if (v.id >= nodes_.size()) throw ShapeError("tape: invalid node handle");
    return nodes_[v.id].value;
  }

  Tensor& touch(std::uint32_t id) {
    if (grads_[id].size() == 0) grads_[id] = zeros_like(nodes_[id].value);
    return grads_[id];
  }

  Var push(Op op, std::uint32_t a, std::uint32_t b, Tensor value) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

}  // namespace geotracknet::core
