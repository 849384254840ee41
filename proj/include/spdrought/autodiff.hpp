/*
 * Copyright 2026 The SPDrought Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Minimal reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every operation of a forward pass as a node holding its value
// and a backward closure. Nodes are appended in evaluation order, so a single
// reverse sweep visits every node after all of its consumers. Parameters are
// leaves bound to a Parameter object; the sweep adds their gradient into
// Parameter::grad, which lets a caller accumulate gradients over several tapes
// before an optimizer step.

#include <Eigen/Core>

#include <cmath>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "spdrought/error.hpp"
#include "spdrought/rng.hpp"

namespace spdrought::ad {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
};

template <class T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    if (find(name) != nullptr) throw Error(ErrorKind::kInvariantViolation, "duplicate parameter " + name);
    auto& p = params_.emplace_back();
    p.name = std::move(name);
    p.value = Matrix<T>::Zero(rows, cols);
    p.grad = Matrix<T>::Zero(rows, cols);
    return p;
  }

  Parameter<T>* find(std::string_view name) {
    for (auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }
  const Parameter<T>* find(std::string_view name) const {
    for (const auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }
  Parameter<T>& at(std::string_view name) {
    auto* p = find(name);
    if (p == nullptr) throw Error(ErrorKind::kInvariantViolation, "no parameter " + std::string(name));
    return *p;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter<T>> params_;  // stable addresses for tape bindings
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <class T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  // With parameter_gradients off, parameters enter as constants: nothing is
  // written to Parameter::grad, so several tapes may share one model.
  explicit Tape(bool parameter_gradients = true) : parameter_gradients_(parameter_gradients) {}

  Var constant(Matrix<T> value) { return push(std::move(value), false, nullptr, nullptr); }
  Var input(Matrix<T> value) { return push(std::move(value), true, nullptr, nullptr); }

  Var param(Parameter<T>& p) {
    if (auto it = bound_.find(&p); it != bound_.end()) return Var{it->second};
    const Var v = push(p.value, parameter_gradients_, nullptr, parameter_gradients_ ? &p : nullptr);
    bound_.emplace(&p, v.id);
    return v;
  }

  // Appends an op result. `bw` is dropped when no input requires a gradient.
  Var record(Matrix<T> value, bool requires_grad, Backward bw) {
    return push(std::move(value), requires_grad, requires_grad ? std::move(bw) : nullptr, nullptr);
  }

  const Matrix<T>& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }
  bool any_requires_grad(std::initializer_list<Var> vars) const {
    for (const Var v : vars) {
      if (requires_grad(v)) return true;
    }
    return false;
  }

  // Gradient flowing into `v`; empty when nothing reached it.
  const Matrix<T>& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  Matrix<T>& grad_accumulator(Var v) {
    auto& node = nodes_[static_cast<std::size_t>(v.id)];
    if (node.grad.size() == 0) node.grad = Matrix<T>::Zero(node.value.rows(), node.value.cols());
    return node.grad;
  }

  void backward(Var out) {
    auto& root = nodes_[static_cast<std::size_t>(out.id)];
    if (root.value.size() != 1) throw Error(ErrorKind::kShapeMismatch, "backward needs a scalar output");
    if (!root.requires_grad) return;
    grad_accumulator(out)(0, 0) += T(1);
    for (int id = out.id; id >= 0; --id) {
      auto& node = nodes_[static_cast<std::size_t>(id)];
      if (!node.requires_grad || node.grad.size() == 0) continue;
      if (node.backward) node.backward(*this, id);
      if (node.param != nullptr) node.param->grad += node.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    bool requires_grad = false;
    Backward backward;
    Parameter<T>* param = nullptr;
  };

  Var push(Matrix<T> value, bool requires_grad, Backward bw, Parameter<T>* p) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad, std::move(bw), p});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  bool parameter_gradients_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, int> bound_;
};

namespace detail {
inline void check(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::kShapeMismatch, what);
}
}  // namespace detail

template <class T>
Var matmul(Tape<T>& tape, Var a, Var b) {
  const auto& A = tape.value(a);
  const auto& B = tape.value(b);
  detail::check(A.cols() == B.rows(), "matmul: inner dimensions differ");
  Matrix<T> out(A.rows(), B.cols());
  out.noalias() = A * B;
  return tape.record(std::move(out), tape.any_requires_grad({a, b}), [a, b](Tape<T>& t, int self) {
    const auto& G = t.grad(Var{self});
    if (t.requires_grad(a)) t.grad_accumulator(a).noalias() += G * t.value(b).transpose();
    if (t.requires_grad(b)) t.grad_accumulator(b).noalias() += t.value(a).transpose() * G;
  });
}

// a * b^T
template <class T>
Var matmul_nt(Tape<T>& tape, Var a, Var b) {
  const auto& A = tape.value(a);
  const auto& B = tape.value(b);
  detail::check(A.cols() == B.cols(), "matmul_nt: inner dimensions differ");
  Matrix<T> out(A.rows(), B.rows());
  out.noalias() = A * B.transpose();
  return tape.record(std::move(out), tape.any_requires_grad({a, b}), [a, b](Tape<T>& t, int self) {
    const auto& G = t.grad(Var{self});
    if (t.requires_grad(a)) t.grad_accumulator(a).noalias() += G * t.value(b);
    if (t.requires_grad(b)) t.grad_accumulator(b).noalias() += G.transpose() * t.value(a);
  });
}

// x * W + bias (bias is a 1 x n row broadcast over rows; pass an invalid Var to skip).
template <class T>
Var linear(Tape<T>& tape, Var x, Var w, Var bias = {}) {
  const auto& X = tape.value(x);
  const auto& W = tape.value(w);
  detail::check(X.cols() == W.rows(), "linear: input width differs from weight rows");
  Matrix<T> out(X.rows(), W.cols());
  out.noalias() = X * W;
  bool rg = tape.any_requires_grad({x, w});
  if (bias.valid()) {
    const auto& b = tape.value(bias);
    detail::check(b.rows() == 1 && b.cols() == W.cols(), "linear: bias shape");
    out.rowwise() += b.row(0);
    rg = rg || tape.requires_grad(bias);
  }
  return tape.record(std::move(out), rg, [x, w, bias](Tape<T>& t, int self) {
    const auto& G = t.grad(Var{self});
    if (t.requires_grad(x)) t.grad_accumulator(x).noalias() += G * t.value(w).transpose();
    if (t.requires_grad(w)) t.grad_accumulator(w).noalias() += t.value(x).transpose() * G;
    if (bias.valid() && t.requires_grad(bias)) t.grad_accumulator(bias) += G.colwise().sum();
  });
}

template <class T>
Var add(Tape<T>& tape, Var a, Var b) {
  const auto& A = tape.value(a);
  const auto& B = tape.value(b);
  detail::check(A.rows() == B.rows() && A.cols() == B.cols(), "add: shapes differ");
  Matrix<T> out = A + B;
  return tape.record(std::move(out), tape.any_requires_grad({a, b}), [a, b](Tape<T>& t, int self) {
    const auto& G = t.grad(Var{self});
    if (t.requires_grad(a)) t.grad_accumulator(a) += G;
    if (t.requires_grad(b)) t.grad_accumulator(b) += G;
  });
}

template <class T>
Var scale(Tape<T>& tape, Var a, T s) {
  Matrix<T> out = tape.value(a) * s;
  return tape.record(std::move(out), tape.requires_grad(a), [a, s](Tape<T>& t, int self) {
    t.grad_accumulator(a) += t.grad(Var{self}) * s;
  });
}

// Element-wise product with a constant matrix of the same shape.
template <class T>
Var mul_const(Tape<T>& tape, Var a, Matrix<T> c) {
  const auto& A = tape.value(a);
  detail::check(A.rows() == c.rows() && A.cols() == c.cols(), "mul_const: shapes differ");
  Matrix<T> out = A.cwiseProduct(c);
  return tape.record(std::move(out), tape.requires_grad(a), [a, c = std::move(c)](Tape<T>& t, int self) {
    t.grad_accumulator(a) += t.grad(Var{self}).cwiseProduct(c);
  });
}

template <class T>
Var relu(Tape<T>& tape, Var a) {
  Matrix<T> out = tape.value(a).cwiseMax(T(0));
  return tape.record(std::move(out), tape.requires_grad(a), [a](Tape<T>& t, int self) {
    const auto& G = t.grad(Var{self});
    const auto& X = t.value(a);
    t.grad_accumulator(a) += (X.array() > T(0)).select(G.array(), T(0)).matrix();
  });
}

template <class T>
Var softmax_rows(Tape<T>& tape, Var a) {
  const auto& A = tape.value(a);
  Matrix<T> out(A.rows(), A.cols());
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const T m = A.row(r).maxCoeff();
    out.row(r) = (A.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return tape.record(std::move(out), tape.requires_grad(a), [a](Tape<T>& t, int self) {
    const auto& G = t.grad(Var{self});
    const auto& Y = t.value(Var{self});
    auto& ga = t.grad_accumulator(a);
    for (Eigen::Index r = 0; r < Y.rows(); ++r) {
      const T dot = G.row(r).dot(Y.row(r));
      ga.row(r).array() += Y.row(r).array() * (G.row(r).array() - dot);
    }
  });
}

// Row-wise layer normalisation with learned gain and bias rows (1 x D).
template <class T>
Var layer_norm(Tape<T>& tape, Var x, Var gain, Var bias, T eps = T(1e-5)) {
  const auto& X = tape.value(x);
  const auto& g = tape.value(gain);
  const auto& b = tape.value(bias);
  const Eigen::Index n = X.rows(), d = X.cols();
  detail::check(g.cols() == d && b.cols() == d, "layer_norm: parameter width");
  Matrix<T> xhat(n, d);
  Eigen::Matrix<T, Eigen::Dynamic, 1> rstd(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const T mu = X.row(r).mean();
    const T var = (X.row(r).array() - mu).square().mean();
    rstd(r) = T(1) / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mu) * rstd(r);
  }
  Matrix<T> out = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  const bool rg = tape.any_requires_grad({x, gain, bias});
  return tape.record(std::move(out), rg,
                     [x, gain, bias, xhat = std::move(xhat), rstd = std::move(rstd)](Tape<T>& t, int self) {
                       const auto& G = t.grad(Var{self});
                       if (t.requires_grad(gain)) t.grad_accumulator(gain) += G.cwiseProduct(xhat).colwise().sum();
                       if (t.requires_grad(bias)) t.grad_accumulator(bias) += G.colwise().sum();
                       if (!t.requires_grad(x)) return;
                       const auto& gv = t.value(gain);
                       auto& gx = t.grad_accumulator(x);
                       const T inv_d = T(1) / static_cast<T>(xhat.cols());
                       for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                         const auto gxhat = (G.row(r).array() * gv.row(0).array()).eval();
                         const T mean_g = gxhat.sum() * inv_d;
                         const T mean_gx = (gxhat * xhat.row(r).array()).sum() * inv_d;
                         gx.row(r).array() += rstd(r) * (gxhat - mean_g - xhat.row(r).array() * mean_gx);
                       }
                     });
}

// Multi-head scaled dot-product attention over `segments` independent
// sequences stacked row-wise: q is (segments*Tq) x D, k and v are
// (segments*Tk) x D. Heads split the D columns evenly.
template <class T>
Var attention(Tape<T>& tape, Var q, Var k, Var v, int segments, int heads) {
  const auto& Q = tape.value(q);
  const auto& K = tape.value(k);
  const auto& V = tape.value(v);
  const Eigen::Index d = Q.cols();
  detail::check(segments > 0 && heads > 0 && d % heads == 0, "attention: heads must divide width");
  detail::check(K.cols() == d && V.cols() == d && K.rows() == V.rows(), "attention: key/value shapes");
  detail::check(Q.rows() % segments == 0 && K.rows() % segments == 0, "attention: rows not divisible by segments");
  const Eigen::Index tq = Q.rows() / segments, tk = K.rows() / segments, dh = d / heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));

  std::vector<Matrix<T>> probs(static_cast<std::size_t>(segments) * heads);
  Matrix<T> out(Q.rows(), d);
  for (int s = 0; s < segments; ++s) {
    for (int h = 0; h < heads; ++h) {
      auto& P = probs[static_cast<std::size_t>(s) * heads + h];
      P.resize(tq, tk);
      P.noalias() = Q.block(s * tq, h * dh, tq, dh) * K.block(s * tk, h * dh, tk, dh).transpose();
      P *= inv_sqrt;
      for (Eigen::Index r = 0; r < tq; ++r) {
        const T m = P.row(r).maxCoeff();
        P.row(r) = (P.row(r).array() - m).exp().matrix();
        P.row(r) /= P.row(r).sum();
      }
      out.block(s * tq, h * dh, tq, dh).noalias() = P * V.block(s * tk, h * dh, tk, dh);
    }
  }
  const bool rg = tape.any_requires_grad({q, k, v});
  return tape.record(std::move(out), rg, [=, probs = std::move(probs)](Tape<T>& t, int self) {
    const auto& G = t.grad(Var{self});
    const auto& Qv = t.value(q);
    const auto& Kv = t.value(k);
    const auto& Vv = t.value(v);
    const bool gq = t.requires_grad(q), gk = t.requires_grad(k), gv = t.requires_grad(v);
    Matrix<T> dP(tq, tk), dS(tq, tk);
    for (int s = 0; s < segments; ++s) {
      for (int h = 0; h < heads; ++h) {
        const auto& P = probs[static_cast<std::size_t>(s) * heads + h];
        const auto dO = G.block(s * tq, h * dh, tq, dh);
        if (gv) t.grad_accumulator(v).block(s * tk, h * dh, tk, dh).noalias() += P.transpose() * dO;
        if (!gq && !gk) continue;
        dP.noalias() = dO * Vv.block(s * tk, h * dh, tk, dh).transpose();
        for (Eigen::Index r = 0; r < tq; ++r) {
          const T dot = dP.row(r).dot(P.row(r));
          dS.row(r) = (P.row(r).array() * (dP.row(r).array() - dot)).matrix();
        }
        dS *= inv_sqrt;
        if (gq) t.grad_accumulator(q).block(s * tq, h * dh, tq, dh).noalias() += dS * Kv.block(s * tk, h * dh, tk, dh);
        if (gk) t.grad_accumulator(k).block(s * tk, h * dh, tk, dh).noalias() += dS.transpose() * Qv.block(s * tq, h * dh, tq, dh);
      }
    }
  });
}

// Inverted dropout; identity outside training.
template <class T>
Var dropout(Tape<T>& tape, Var a, double rate, bool train_mode, SplitMix64* rng) {
  if (!train_mode || rate <= 0.0 || rng == nullptr) return a;
  const auto& A = tape.value(a);
  Matrix<T> mask(A.rows(), A.cols());
  const T keep_scale = T(1) / static_cast<T>(1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng->uniform() < rate ? T(0) : keep_scale;
  return mul_const(tape, a, std::move(mask));
}

template <class T>
Var concat_cols(Tape<T>& tape, Var a, Var b) {
  const auto& A = tape.value(a);
  const auto& B = tape.value(b);
  detail::check(A.rows() == B.rows(), "concat_cols: row counts differ");
  Matrix<T> out(A.rows(), A.cols() + B.cols());
  out.leftCols(A.cols()) = A;
  out.rightCols(B.cols()) = B;
  const Eigen::Index ca = A.cols(), cb = B.cols();
  return tape.record(std::move(out), tape.any_requires_grad({a, b}), [a, b, ca, cb](Tape<T>& t, int self) {
    const auto& G = t.grad(Var{self});
    if (t.requires_grad(a)) t.grad_accumulator(a) += G.leftCols(ca);
    if (t.requires_grad(b)) t.grad_accumulator(b) += G.rightCols(cb);
  });
}

template <class T>
Var vstack(Tape<T>& tape, std::span<const Var> parts) {
  detail::check(!parts.empty(), "vstack: no inputs");
  const Eigen::Index cols = tape.value(parts[0]).cols();
  Eigen::Index rows = 0;
  bool rg = false;
  for (const Var p : parts) {
    detail::check(tape.value(p).cols() == cols, "vstack: column counts differ");
    rows += tape.value(p).rows();
    rg = rg || tape.requires_grad(p);
  }
  Matrix<T> out(rows, cols);
  Eigen::Index r = 0;
  for (const Var p : parts) {
    const auto& P = tape.value(p);
    out.middleRows(r, P.rows()) = P;
    r += P.rows();
  }
  return tape.record(std::move(out), rg, [ps = std::vector<Var>(parts.begin(), parts.end())](Tape<T>& t, int self) {
    const auto& G = t.grad(Var{self});
    Eigen::Index row = 0;
    for (const Var p : ps) {
      const Eigen::Index n = t.value(p).rows();
      if (t.requires_grad(p)) t.grad_accumulator(p) += G.middleRows(row, n);
      row += n;
    }
  });
}

template <class T>
Var slice_rows(Tape<T>& tape, Var a, Eigen::Index start, Eigen::Index count) {
  const auto& A = tape.value(a);
  detail::check(start >= 0 && count >= 0 && start + count <= A.rows(), "slice_rows: out of range");
  Matrix<T> out = A.middleRows(start, count);
  return tape.record(std::move(out), tape.requires_grad(a), [a, start, count](Tape<T>& t, int self) {
    t.grad_accumulator(a).middleRows(start, count) += t.grad(Var{self});
  });
}

// Reinterprets the row-major storage with a new shape.
template <class T>
Var reshape(Tape<T>& tape, Var a, Eigen::Index rows, Eigen::Index cols) {
  const auto& A = tape.value(a);
  detail::check(rows * cols == A.size(), "reshape: element count differs");
  Matrix<T> out = Eigen::Map<const Matrix<T>>(A.data(), rows, cols);
  const Eigen::Index r0 = A.rows(), c0 = A.cols();
  return tape.record(std::move(out), tape.requires_grad(a), [a, r0, c0](Tape<T>& t, int self) {
    const auto& G = t.grad(Var{self});
    t.grad_accumulator(a) += Eigen::Map<const Matrix<T>>(G.data(), r0, c0);
  });
}

// Repeats each row of a (B x D) `times` times: row b*times + i = a.row(b).
template <class T>
Var repeat_rows(Tape<T>& tape, Var a, Eigen::Index times) {
  const auto& A = tape.value(a);
  Matrix<T> out(A.rows() * times, A.cols());
  for (Eigen::Index b = 0; b < A.rows(); ++b) out.middleRows(b * times, times).rowwise() = A.row(b);
  return tape.record(std::move(out), tape.requires_grad(a), [a, times](Tape<T>& t, int self) {
    const auto& G = t.grad(Var{self});
    auto& ga = t.grad_accumulator(a);
    for (Eigen::Index b = 0; b < ga.rows(); ++b) ga.row(b) += G.middleRows(b * times, times).colwise().sum();
  });
}

// Stacks `times` copies of a (T x D) block: row s*T + i = a.row(i).
template <class T>
Var tile_rows(Tape<T>& tape, Var a, Eigen::Index times) {
  const auto& A = tape.value(a);
  const Eigen::Index n = A.rows();
  Matrix<T> out(n * times, A.cols());
  for (Eigen::Index s = 0; s < times; ++s) out.middleRows(s * n, n) = A;
  return tape.record(std::move(out), tape.requires_grad(a), [a, n, times](Tape<T>& t, int self) {
    const auto& G = t.grad(Var{self});
    auto& ga = t.grad_accumulator(a);
    for (Eigen::Index s = 0; s < times; ++s) ga += G.middleRows(s * n, n);
  });
}

template <class T>
Var gather_rows(Tape<T>& tape, Var table, std::vector<int> ids) {
  const auto& W = tape.value(table);
  Matrix<T> out(static_cast<Eigen::Index>(ids.size()), W.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= W.rows()) throw Error(ErrorKind::kIdOutOfRange, "row id " + std::to_string(ids[i]));
    out.row(static_cast<Eigen::Index>(i)) = W.row(ids[i]);
  }
  return tape.record(std::move(out), tape.requires_grad(table), [table, ids = std::move(ids)](Tape<T>& t, int self) {
    const auto& G = t.grad(Var{self});
    auto& gw = t.grad_accumulator(table);
    for (std::size_t i = 0; i < ids.size(); ++i) gw.row(ids[i]) += G.row(static_cast<Eigen::Index>(i));
  });
}

// Single element as a 1x1 node.
template <class T>
Var pick(Tape<T>& tape, Var a, Eigen::Index r, Eigen::Index c) {
  Matrix<T> out(1, 1);
  out(0, 0) = tape.value(a)(r, c);
  return tape.record(std::move(out), tape.requires_grad(a), [a, r, c](Tape<T>& t, int self) {
    t.grad_accumulator(a)(r, c) += t.grad(Var{self})(0, 0);
  });
}

// sum(a .* weights) as a 1x1 node.
template <class T>
Var weighted_sum(Tape<T>& tape, Var a, Matrix<T> weights) {
  const auto& A = tape.value(a);
  detail::check(A.rows() == weights.rows() && A.cols() == weights.cols(), "weighted_sum: shapes differ");
  Matrix<T> out(1, 1);
  out(0, 0) = A.cwiseProduct(weights).sum();
  return tape.record(std::move(out), tape.requires_grad(a), [a, w = std::move(weights)](Tape<T>& t, int self) {
    t.grad_accumulator(a) += w * t.grad(Var{self})(0, 0);
  });
}

// Mean absolute error over entries where mask != 0; zero (with zero
// gradient) when the mask is empty.
template <class T>
Var masked_mae(Tape<T>& tape, Var pred, const Matrix<T>& target, const Matrix<T>& mask) {
  const auto& P = tape.value(pred);
  detail::check(P.rows() == target.rows() && P.cols() == target.cols() && P.rows() == mask.rows() &&
                    P.cols() == mask.cols(),
                "masked_mae: shapes differ");
  T count = T(0);
  T total = T(0);
  Matrix<T> sign = Matrix<T>::Zero(P.rows(), P.cols());
  for (Eigen::Index i = 0; i < P.size(); ++i) {
    if (mask.data()[i] == T(0)) continue;
    const T diff = P.data()[i] - target.data()[i];
    total += std::abs(diff);
    sign.data()[i] = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
    count += T(1);
  }
  Matrix<T> out(1, 1);
  out(0, 0) = count > T(0) ? total / count : T(0);
  if (count > T(0)) sign /= count;
  return tape.record(std::move(out), tape.requires_grad(pred) && count > T(0),
                     [pred, sign = std::move(sign)](Tape<T>& t, int self) {
                       t.grad_accumulator(pred) += sign * t.grad(Var{self})(0, 0);
                     });
}

}  // namespace spdrought::ad
