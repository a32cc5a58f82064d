#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pfbench/lstm.hpp"

namespace pfbench::nn {

// A trainable tensor paired with its gradient. When `touched_cols` is set
// (embedding tables, one column per entry) only those columns are updated.
template <typename T>
struct ParamRef {
  std::string name;
  Matrix<T>* value = nullptr;
  Matrix<T>* grad = nullptr;
  const std::vector<Index>* touched_cols = nullptr;
};

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdagradConfig {
  double lr = 0.1;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  Matrix<T> m;
  Matrix<T> v;
  std::uint64_t step = 0;
};

template <typename T>
struct AdagradState {
  Matrix<T> accum;
};

namespace detail {

template <typename T, typename F>
void for_columns(const Matrix<T>& param, const std::vector<Index>* cols,
                 F&& f) {
  if (cols) {
    for (Index c : *cols) f(c);
  } else {
    for (Index c = 0; c < param.cols(); ++c) f(c);
  }
}

}  // namespace detail

// Bias-corrected Adam. The step counter advances even when the gradient is
// zero.
template <typename T>
void adam_step(Matrix<T>& param, const Matrix<T>& grad, AdamState<T>& state,
               const AdamConfig& cfg,
               const std::vector<Index>* touched_cols = nullptr) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
    throw ShapeError("Adam: gradient shape differs from parameter shape");
  }
  if (state.m.size() == 0) {
    state.m = Matrix<T>::Zero(param.rows(), param.cols());
    state.v = Matrix<T>::Zero(param.rows(), param.cols());
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T lr = static_cast<T>(cfg.lr);
  const T eps = static_cast<T>(cfg.eps);
  detail::for_columns(param, touched_cols, [&](Index c) {
    auto g = grad.col(c).array();
    auto m = state.m.col(c).array();
    auto v = state.v.col(c).array();
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g * g;
    param.col(c).array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
  });
}

template <typename T>
void adagrad_step(Matrix<T>& param, const Matrix<T>& grad,
                  AdagradState<T>& state, const AdagradConfig& cfg,
                  const std::vector<Index>* touched_cols = nullptr) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
    throw ShapeError("Adagrad: gradient shape differs from parameter shape");
  }
  if (state.accum.size() == 0) {
    state.accum = Matrix<T>::Zero(param.rows(), param.cols());
  }
  const T lr = static_cast<T>(cfg.lr);
  const T eps = static_cast<T>(cfg.eps);
  detail::for_columns(param, touched_cols, [&](Index c) {
    auto g = grad.col(c).array();
    auto a = state.accum.col(c).array();
    a += g * g;
    param.col(c).array() -= lr * g / (a.sqrt() + eps);
  });
}

// Scales all gradients so their joint L2 norm is at most `max_norm`.
// Returns the norm before clipping.
template <typename T>
double clip_global_norm(std::vector<ParamRef<T>>& params, double max_norm) {
  double sq = 0;
  for (auto& p : params) sq += static_cast<double>(p.grad->squaredNorm());
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& p : params) *p.grad *= scale;
  }
  return norm;
}

enum class OptimizerKind { kAdam, kAdagrad };

// Optimizer over a fixed list of parameters (state slot i <-> params[i]).
template <typename T>
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, double lr) : kind_(kind) {
    adam_.lr = lr;
    adagrad_.lr = lr;
  }

  OptimizerKind kind() const { return kind_; }
  double lr() const { return kind_ == OptimizerKind::kAdam ? adam_.lr : adagrad_.lr; }
  std::uint64_t steps() const { return steps_; }

  void step(std::vector<ParamRef<T>>& params) {
    if (kind_ == OptimizerKind::kAdam) {
      adam_states_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        adam_step(*params[i].value, *params[i].grad, adam_states_[i], adam_,
                  params[i].touched_cols);
      }
    } else {
      adagrad_states_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        adagrad_step(*params[i].value, *params[i].grad, adagrad_states_[i],
                     adagrad_, params[i].touched_cols);
      }
    }
    ++steps_;
  }

  std::vector<AdamState<T>>& adam_states() { return adam_states_; }
  std::vector<AdagradState<T>>& adagrad_states() { return adagrad_states_; }
  const std::vector<AdamState<T>>& adam_states() const { return adam_states_; }
  const std::vector<AdagradState<T>>& adagrad_states() const {
    return adagrad_states_;
  }
  void set_steps(std::uint64_t steps) { steps_ = steps; }

 private:
  OptimizerKind kind_ = OptimizerKind::kAdam;
  AdamConfig adam_;
  AdagradConfig adagrad_;
  std::vector<AdamState<T>> adam_states_;
  std::vector<AdagradState<T>> adagrad_states_;
  std::uint64_t steps_ = 0;
};

}  // namespace pfbench::nn
