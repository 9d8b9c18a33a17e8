/*
 * Copyright 2026 The hkgx Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Tape-based reverse-mode differentiation over a fixed set of dense matrix
// primitives, plus the Adam optimizer.

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hkgx/error.hpp"
#include "hkgx/rng.hpp"

namespace hkgx::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Mode { train, eval };

/// Learnable matrix with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zeroGrad() { grad.setZero(); }
  [[nodiscard]] Eigen::Index size() const { return value.size(); }
};

struct Var {
  std::int32_t id = -1;
  [[nodiscard]] bool valid() const { return id >= 0; }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, Var self)>;

  Var constant(Matrix value) { return push(std::move(value), nullptr, false, {}); }

  Var param(Parameter& p) { return push(p.value, &p, true, {}); }

  /// Records an op node. `backward` runs only when the node received a
  /// gradient, and should call `accumulate` on its inputs.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
  }

  Var record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
    bool needsGrad = false;
    for (Var v : inputs) needsGrad = needsGrad || nodes_.at(static_cast<std::size_t>(v.id)).requiresGrad;
    return push(std::move(value), nullptr, needsGrad, needsGrad ? std::move(backward) : Backward{});
  }

  [[nodiscard]] const Matrix& value(Var v) const { return node(v).value; }
  [[nodiscard]] bool requiresGrad(Var v) const { return node(v).requiresGrad; }

  /// Gradient of the loss w.r.t. `v`; zero until backward reaches it.
  [[nodiscard]] const Matrix& grad(Var v) {
    auto& n = node(v);
    ensureGrad(n);
    return n.grad;
  }

  /// Returns a writable gradient slot for `v`, or nullptr when `v` does not
  /// lead to any parameter.
  Matrix* accumulate(Var v) {
    auto& n = node(v);
    if (!n.requiresGrad) return nullptr;
    ensureGrad(n);
    return &n.grad;
  }

  /// Backpropagates from a 1x1 loss and adds the result into each reached
  /// Parameter::grad.
  void backward(Var loss) {
    auto& l = node(loss);
    if (l.value.rows() != 1 || l.value.cols() != 1) {
      throw ShapeError("backward needs a scalar loss");
    }
    ensureGrad(l);
    l.grad(0, 0) += 1.0;
    for (auto i = static_cast<std::int32_t>(nodes_.size()) - 1; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.hasGrad) continue;
      if (n.backward) n.backward(*this, Var{i});
      if (n.param) n.param->grad += n.grad;
    }
  }

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool hasGrad = false;
    bool requiresGrad = false;
    Parameter* param = nullptr;
    Backward backward;
  };

  Var push(Matrix value, Parameter* p, bool needsGrad, Backward bw) {
    Node n;
    n.value = std::move(value);
    n.param = p;
    n.requiresGrad = needsGrad;
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
  [[nodiscard]] const Node& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }

  static void ensureGrad(Node& n) {
    if (!n.hasGrad) {
      n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
      n.hasGrad = true;
    }
  }

  std::vector<Node> nodes_;
};

namespace detail {
inline std::string shapeOf(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}
inline void requireSameShape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shapeOf(a) + " vs " + shapeOf(b));
  }
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

inline Var add(Tape& t, Var a, Var b) {
  detail::requireSameShape(t.value(a), t.value(b), "add");
  return t.record(t.value(a) + t.value(b), {a, b}, [a, b](Tape& tp, Var self) {
    const Matrix& g = tp.grad(self);
    if (auto* ga = tp.accumulate(a)) *ga += g;
    if (auto* gb = tp.accumulate(b)) *gb += g;
  });
}

inline Var sub(Tape& t, Var a, Var b) {
  detail::requireSameShape(t.value(a), t.value(b), "sub");
  return t.record(t.value(a) - t.value(b), {a, b}, [a, b](Tape& tp, Var self) {
    const Matrix& g = tp.grad(self);
    if (auto* ga = tp.accumulate(a)) *ga += g;
    if (auto* gb = tp.accumulate(b)) *gb -= g;
  });
}

inline Var mul(Tape& t, Var a, Var b) {
  detail::requireSameShape(t.value(a), t.value(b), "mul");
  return t.record(t.value(a).cwiseProduct(t.value(b)), {a, b}, [a, b](Tape& tp, Var self) {
    const Matrix& g = tp.grad(self);
    if (auto* ga = tp.accumulate(a)) *ga += g.cwiseProduct(tp.value(b));
    if (auto* gb = tp.accumulate(b)) *gb += g.cwiseProduct(tp.value(a));
  });
}

inline Var scale(Tape& t, Var a, double c) {
  return t.record(t.value(a) * c, {a}, [a, c](Tape& tp, Var self) {
    if (auto* ga = tp.accumulate(a)) *ga += c * tp.grad(self);
  });
}

inline Var tanh(Tape& t, Var a) {
  Matrix y = t.value(a).array().tanh().matrix();
  return t.record(std::move(y), {a}, [a](Tape& tp, Var self) {
    if (auto* ga = tp.accumulate(a)) {
      const Matrix& y = tp.value(self);
      *ga += tp.grad(self).cwiseProduct((1.0 - y.array().square()).matrix());
    }
  });
}

/// Sum of all entries, 1x1.
inline Var sum(Tape& t, Var a) {
  Matrix s(1, 1);
  s(0, 0) = t.value(a).sum();
  return t.record(std::move(s), {a}, [a](Tape& tp, Var self) {
    if (auto* ga = tp.accumulate(a)) ga->array() += tp.grad(self)(0, 0);
  });
}

// ---------------------------------------------------------------------------
// Linear algebra and layout
// ---------------------------------------------------------------------------

/// a (n x k) times b (k x m).
inline Var matmul(Tape& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + detail::shapeOf(av) + " x " +
                     detail::shapeOf(bv));
  }
  Matrix y = av * bv;
  return t.record(std::move(y), {a, b}, [a, b](Tape& tp, Var self) {
    const Matrix& g = tp.grad(self);
    if (auto* ga = tp.accumulate(a)) ga->noalias() += g * tp.value(b).transpose();
    if (auto* gb = tp.accumulate(b)) gb->noalias() += tp.value(a).transpose() * g;
  });
}

inline Var concatCols(Tape& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.rows() != bv.rows()) throw ShapeError("concatCols: row counts differ");
  Matrix y(av.rows(), av.cols() + bv.cols());
  y << av, bv;
  const auto ca = av.cols();
  const auto cb = bv.cols();
  return t.record(std::move(y), {a, b}, [a, b, ca, cb](Tape& tp, Var self) {
    const Matrix& g = tp.grad(self);
    if (auto* ga = tp.accumulate(a)) *ga += g.leftCols(ca);
    if (auto* gb = tp.accumulate(b)) *gb += g.rightCols(cb);
  });
}

inline Var concatRows(Tape& t, Var a, Var b) {
  const auto& av = t.value(a);
  const auto& bv = t.value(b);
  if (av.cols() != bv.cols()) throw ShapeError("concatRows: column counts differ");
  Matrix y(av.rows() + bv.rows(), av.cols());
  y.topRows(av.rows()) = av;
  y.bottomRows(bv.rows()) = bv;
  const auto ra = av.rows();
  const auto rb = bv.rows();
  return t.record(std::move(y), {a, b}, [a, b, ra, rb](Tape& tp, Var self) {
    const Matrix& g = tp.grad(self);
    if (auto* ga = tp.accumulate(a)) *ga += g.topRows(ra);
    if (auto* gb = tp.accumulate(b)) *gb += g.bottomRows(rb);
  });
}

/// Stacks any number of blocks with equal column counts.
inline Var concatRows(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concatRows: no inputs");
  const auto cols = t.value(parts.front()).cols();
  Eigen::Index rows = 0;
  for (Var v : parts) {
    if (t.value(v).cols() != cols) throw ShapeError("concatRows: column counts differ");
    rows += t.value(v).rows();
  }
  Matrix y(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (Var v : parts) {
    offsets.push_back(at);
    y.middleRows(at, t.value(v).rows()) = t.value(v);
    at += t.value(v).rows();
  }
  auto shared = std::make_shared<std::vector<Var>>(parts);
  auto offs = std::make_shared<std::vector<Eigen::Index>>(std::move(offsets));
  return t.record(std::move(y), parts, [shared, offs](Tape& tp, Var self) {
    const Matrix& g = tp.grad(self);
    for (std::size_t i = 0; i < shared->size(); ++i) {
      Var v = (*shared)[i];
      if (auto* gv = tp.accumulate(v)) *gv += g.middleRows((*offs)[i], tp.value(v).rows());
    }
  });
}

/// Weighted row routing: out[dst[i]] += weight[i] * x[src[i]]. Covers row
/// gather (dst = 0..n-1), scatter-add and mean aggregation (weight = 1/deg).
struct SegmentMap {
  std::vector<std::int32_t> src;
  std::vector<std::int32_t> dst;
  std::vector<double> weight;  // empty means all ones
  std::size_t numOut = 0;

  [[nodiscard]] double w(std::size_t i) const { return weight.empty() ? 1.0 : weight[i]; }
};

inline Var segment(Tape& t, Var x, std::shared_ptr<const SegmentMap> map) {
  const auto& xv = t.value(x);
  if (map->src.size() != map->dst.size() ||
      (!map->weight.empty() && map->weight.size() != map->src.size())) {
    throw ShapeError("segment: inconsistent map lengths");
  }
  for (std::size_t i = 0; i < map->src.size(); ++i) {
    if (map->src[i] < 0 || map->src[i] >= xv.rows() || map->dst[i] < 0 ||
        static_cast<std::size_t>(map->dst[i]) >= map->numOut) {
      throw ShapeError("segment: row index out of range");
    }
  }
  const auto cols = xv.cols();
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(map->numOut), cols);
  for (std::size_t i = 0; i < map->src.size(); ++i) {
    const double w = map->w(i);
    const double* in = xv.data() + static_cast<Eigen::Index>(map->src[i]) * cols;
    double* out = y.data() + static_cast<Eigen::Index>(map->dst[i]) * cols;
    for (Eigen::Index c = 0; c < cols; ++c) out[c] += w * in[c];
  }
  return t.record(std::move(y), {x}, [x, map, cols](Tape& tp, Var self) {
    auto* gx = tp.accumulate(x);
    if (!gx) return;
    const Matrix& g = tp.grad(self);
    for (std::size_t i = 0; i < map->src.size(); ++i) {
      const double w = map->w(i);
      const double* in = g.data() + static_cast<Eigen::Index>(map->dst[i]) * cols;
      double* out = gx->data() + static_cast<Eigen::Index>(map->src[i]) * cols;
      for (Eigen::Index c = 0; c < cols; ++c) out[c] += w * in[c];
    }
  });
}

inline std::shared_ptr<const SegmentMap> gatherMap(std::vector<std::int32_t> rows) {
  auto m = std::make_shared<SegmentMap>();
  m->numOut = rows.size();
  m->dst.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) m->dst[i] = static_cast<std::int32_t>(i);
  m->src = std::move(rows);
  return m;
}

inline Var gather(Tape& t, Var x, std::vector<std::int32_t> rows) {
  return segment(t, x, gatherMap(std::move(rows)));
}

// ---------------------------------------------------------------------------
// Composition and regularization
// ---------------------------------------------------------------------------

/// Rotation by a unit-modulus phase. Row halves are (real, imaginary) parts;
/// each (r_re, r_im) pair of `r` is normalized to modulus one before the
/// complex product. A zero pair acts as the identity.
inline Var rotate(Tape& t, Var x, Var r) {
  const auto& xv = t.value(x);
  const auto& rv = t.value(r);
  detail::requireSameShape(xv, rv, "rotate");
  if (xv.cols() % 2 != 0) throw ShapeError("rotate: dimension must be even");
  const auto half = xv.cols() / 2;
  Matrix y(xv.rows(), xv.cols());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    for (Eigen::Index j = 0; j < half; ++j) {
      const double a = rv(i, j);
      const double b = rv(i, j + half);
      const double n = std::sqrt(a * a + b * b);
      const double c = n > 0 ? a / n : 1.0;
      const double s = n > 0 ? b / n : 0.0;
      const double xr = xv(i, j);
      const double xi = xv(i, j + half);
      y(i, j) = xr * c - xi * s;
      y(i, j + half) = xr * s + xi * c;
    }
  }
  return t.record(std::move(y), {x, r}, [x, r, half](Tape& tp, Var self) {
    const Matrix& g = tp.grad(self);
    const Matrix& xv = tp.value(x);
    const Matrix& rv = tp.value(r);
    auto* gx = tp.accumulate(x);
    auto* gr = tp.accumulate(r);
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      for (Eigen::Index j = 0; j < half; ++j) {
        const double a = rv(i, j);
        const double b = rv(i, j + half);
        const double n = std::sqrt(a * a + b * b);
        const double c = n > 0 ? a / n : 1.0;
        const double s = n > 0 ? b / n : 0.0;
        const double gr_ = g(i, j);
        const double gi = g(i, j + half);
        const double xr = xv(i, j);
        const double xi = xv(i, j + half);
        if (gx) {
          (*gx)(i, j) += gr_ * c + gi * s;
          (*gx)(i, j + half) += -gr_ * s + gi * c;
        }
        if (gr && n > 0) {
          const double dc = gr_ * xr + gi * xi;
          const double ds = -gr_ * xi + gi * xr;
          const double n3 = n * n * n;
          (*gr)(i, j) += (dc * b * b - ds * a * b) / n3;
          (*gr)(i, j + half) += (-dc * a * b + ds * a * a) / n3;
        }
      }
    }
  });
}

/// Inverted dropout: in train mode each entry is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate). Identity in eval mode.
inline Var dropout(Tape& t, Var x, double rate, Mode mode, RngStream& rng) {
  if (mode == Mode::eval || rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout rate must be below 1");
  const auto& xv = t.value(x);
  auto mask = std::make_shared<Matrix>(xv.rows(), xv.cols());
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask->size(); ++i) {
    mask->data()[i] = rng.uniform() < rate ? 0.0 : keep;
  }
  Matrix y = xv.cwiseProduct(*mask);
  return t.record(std::move(y), {x}, [x, mask](Tape& tp, Var self) {
    if (auto* gx = tp.accumulate(x)) *gx += tp.grad(self).cwiseProduct(*mask);
  });
}

/// Per-column normalization over all rows followed by an affine map:
/// y = gamma * (x - mean) / sqrt(var + eps) + beta. gamma/beta are 1 x d.
inline Var batchNorm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5) {
  const auto& xv = t.value(x);
  const auto& gv = t.value(gamma);
  const auto& bv = t.value(beta);
  if (gv.rows() != 1 || gv.cols() != xv.cols() || bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ShapeError("batchNorm: gamma/beta must be 1 x " + std::to_string(xv.cols()));
  }
  if (xv.rows() == 0) throw ShapeError("batchNorm: empty input");
  const double rows = static_cast<double>(xv.rows());
  Eigen::RowVectorXd mean = xv.colwise().mean();
  Matrix centered = xv.rowwise() - mean;
  Eigen::RowVectorXd var = centered.array().square().colwise().sum().matrix() / rows;
  auto invStd = std::make_shared<Eigen::RowVectorXd>(
      (var.array() + eps).sqrt().inverse().matrix());
  auto xhat = std::make_shared<Matrix>(centered.array().rowwise() * invStd->array());
  Matrix y = (xhat->array().rowwise() * gv.row(0).array()).rowwise() + bv.row(0).array();
  return t.record(std::move(y), {x, gamma, beta},
                  [x, gamma, beta, invStd, xhat, rows](Tape& tp, Var self) {
                    const Matrix& g = tp.grad(self);
                    if (auto* gb = tp.accumulate(beta)) *gb += g.colwise().sum();
                    if (auto* gg = tp.accumulate(gamma)) {
                      *gg += g.cwiseProduct(*xhat).colwise().sum();
                    }
                    if (auto* gx = tp.accumulate(x)) {
                      Matrix dxhat = g.array().rowwise() * tp.value(gamma).row(0).array();
                      Eigen::RowVectorXd sumD = dxhat.colwise().sum();
                      Eigen::RowVectorXd sumDX = dxhat.cwiseProduct(*xhat).colwise().sum();
                      Matrix dx = (rows * dxhat.array()).rowwise() - sumD.array();
                      dx.array() -= xhat->array().rowwise() * sumDX.array();
                      dx.array().rowwise() *= (invStd->array() / rows);
                      *gx += dx;
                    }
                  });
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Contiguous block of scores whose first entry is the positive.
struct ScoreGroup {
  std::size_t start = 0;
  std::size_t length = 0;
};

/// Sum over groups of -log softmax(positive), computed with max subtraction.
/// Groups of length <= 1 contribute zero.
inline Var softmaxCrossEntropy(Tape& t, Var scores, std::vector<ScoreGroup> groups) {
  const auto& sv = t.value(scores);
  if (sv.cols() != 1) throw ShapeError("softmaxCrossEntropy: scores must be a column");
  for (const auto& g : groups) {
    if (g.start + g.length > static_cast<std::size_t>(sv.rows())) {
      throw ShapeError("softmaxCrossEntropy: group out of range");
    }
  }
  double loss = 0.0;
  for (const auto& g : groups) {
    if (g.length <= 1) continue;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.length; ++i) m = std::max(m, sv(static_cast<Eigen::Index>(g.start + i), 0));
    double z = 0.0;
    for (std::size_t i = 0; i < g.length; ++i) z += std::exp(sv(static_cast<Eigen::Index>(g.start + i), 0) - m);
    loss += m + std::log(z) - sv(static_cast<Eigen::Index>(g.start), 0);
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  auto shared = std::make_shared<std::vector<ScoreGroup>>(std::move(groups));
  return t.record(std::move(out), {scores}, [scores, shared](Tape& tp, Var self) {
    auto* gs = tp.accumulate(scores);
    if (!gs) return;
    const double up = tp.grad(self)(0, 0);
    const Matrix& sv = tp.value(scores);
    for (const auto& g : *shared) {
      if (g.length <= 1) continue;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < g.length; ++i) m = std::max(m, sv(static_cast<Eigen::Index>(g.start + i), 0));
      double z = 0.0;
      for (std::size_t i = 0; i < g.length; ++i) z += std::exp(sv(static_cast<Eigen::Index>(g.start + i), 0) - m);
      for (std::size_t i = 0; i < g.length; ++i) {
        const auto row = static_cast<Eigen::Index>(g.start + i);
        double p = std::exp(sv(row, 0) - m) / z;
        (*gs)(row, 0) += up * (p - (i == 0 ? 1.0 : 0.0));
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Initialization and optimization
// ---------------------------------------------------------------------------

inline Matrix uniformMatrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi,
                            RngStream& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

/// Glorot-uniform square-ish weight.
inline Matrix xavierMatrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return uniformMatrix(rows, cols, -bound, bound, rng);
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed list of parameters.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      first_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      second_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zeroGrad() {
    for (auto* p : params_) p->zeroGrad();
  }

  /// Applies one update from the accumulated gradients. Throws NumericError
  /// naming the first parameter with a non-finite gradient; nothing is
  /// updated in that case.
  void step() {
    for (auto* p : params_) {
      if (!p->grad.allFinite()) {
        throw NumericError("non-finite gradient in parameter '" + p->name + "'");
      }
    }
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      auto& m = first_[i];
      auto& v = second_[i];
      const auto n = p.value.size();
      double* w = p.value.data();
      const double* g = p.grad.data();
      double* md = m.data();
      double* vd = v.data();
      for (Eigen::Index k = 0; k < n; ++k) {
        md[k] = cfg_.beta1 * md[k] + (1.0 - cfg_.beta1) * g[k];
        vd[k] = cfg_.beta2 * vd[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
        const double mhat = md[k] / c1;
        const double vhat = vd[k] / c2;
        w[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  [[nodiscard]] std::uint64_t stepCount() const { return step_; }
  [[nodiscard]] const AdamConfig& config() const { return cfg_; }
  [[nodiscard]] const std::vector<Matrix>& firstMoments() const { return first_; }
  [[nodiscard]] const std::vector<Matrix>& secondMoments() const { return second_; }

  void restore(std::uint64_t step, std::vector<Matrix> first, std::vector<Matrix> second) {
    if (first.size() != params_.size() || second.size() != params_.size()) {
      throw ShapeError("optimizer state does not match parameter count");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      detail::requireSameShape(first[i], params_[i]->value, "adam restore");
      detail::requireSameShape(second[i], params_[i]->value, "adam restore");
    }
    step_ = step;
    first_ = std::move(first);
    second_ = std::move(second);
  }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  std::uint64_t step_ = 0;
};

}  // namespace hkgx::nn
