#pragma once

// LSTM building blocks: cell recurrence, stacked layers with truncated BPTT,
// softmax cross-entropy and top-k selection.
//
// Activations are column-major: one column per batch lane, so an input batch
// is (input_size x B) and a state is (hidden_size x B).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "pfbench/error.hpp"
#include "pfbench/random.hpp"

namespace pfbench::nn {

using Index = Eigen::Index;
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class Gate : int { kInput = 0, kForget = 1, kOutput = 2, kCell = 3 };

// W_{i,f,o,c} are stored stacked in that order as one (4H x (I+H)) matrix so
// a step costs one GEMM; gate_weights() exposes each block.
template <typename T>
struct LstmLayerParams {
  Matrix<T> weights;
  Matrix<T> bias;  // 4H x 1

  Index hidden_size() const { return bias.rows() / 4; }
  Index input_size() const { return weights.cols() - hidden_size(); }

  auto gate_weights(Gate g) {
    return weights.middleRows(static_cast<int>(g) * hidden_size(),
                              hidden_size());
  }
  auto gate_weights(Gate g) const {
    return weights.middleRows(static_cast<int>(g) * hidden_size(),
                              hidden_size());
  }
  auto gate_bias(Gate g) {
    return bias.middleRows(static_cast<int>(g) * hidden_size(), hidden_size());
  }
  auto gate_bias(Gate g) const {
    return bias.middleRows(static_cast<int>(g) * hidden_size(), hidden_size());
  }

  static LstmLayerParams zeros(Index input_size, Index hidden_size) {
    LstmLayerParams p;
    p.weights = Matrix<T>::Zero(4 * hidden_size, input_size + hidden_size);
    p.bias = Matrix<T>::Zero(4 * hidden_size, 1);
    return p;
  }

  // uniform(-s, s) with s = 1/sqrt(H); forget-gate bias 1.
  static LstmLayerParams init(Index input_size, Index hidden_size, Rng& rng) {
    LstmLayerParams p = zeros(input_size, hidden_size);
    const double s = 1.0 / std::sqrt(static_cast<double>(hidden_size));
    for (Index j = 0; j < p.weights.cols(); ++j) {
      for (Index i = 0; i < p.weights.rows(); ++i) {
        p.weights(i, j) = static_cast<T>(rng.uniform_real(-s, s));
      }
    }
    for (Index i = 0; i < p.bias.rows(); ++i) {
      p.bias(i, 0) = static_cast<T>(rng.uniform_real(-s, s));
    }
    p.gate_bias(Gate::kForget).setConstant(T(1));
    return p;
  }
};

template <typename T>
struct LstmState {
  Matrix<T> h;
  Matrix<T> c;

  static LstmState zeros(Index hidden_size, Index batch) {
    return {Matrix<T>::Zero(hidden_size, batch),
            Matrix<T>::Zero(hidden_size, batch)};
  }
};

// Everything one step needs for the backward pass.
template <typename T>
struct StepCache {
  Matrix<T> xh;      // [x; h_prev]
  Matrix<T> gates;   // [i; f; o; g] after nonlinearities
  Matrix<T> c_prev;
  Matrix<T> tanh_c;
};

namespace detail {

template <typename T>
void check_step_shapes(Index x_rows, Index x_cols, const LstmState<T>& prev,
                       const LstmLayerParams<T>& params) {
  const Index hidden = params.hidden_size();
  if (params.weights.rows() != 4 * hidden || params.bias.cols() != 1) {
    throw ShapeError("malformed LSTM layer parameters");
  }
  if (x_rows != params.input_size()) {
    throw ShapeError(fmt::format("LSTM input has {} rows, layer expects {}",
                                 x_rows, params.input_size()));
  }
  if (prev.h.rows() != hidden || prev.c.rows() != hidden ||
      prev.h.cols() != x_cols || prev.c.cols() != x_cols) {
    throw ShapeError("LSTM state does not match layer or batch shape");
  }
}

template <typename T>
T sigmoid(T u) {
  return T(1) / (T(1) + std::exp(-u));
}

}  // namespace detail

// One recurrence step; fills `cache` when given.
template <typename T, typename Derived>
LstmState<T> lstm_step(const Eigen::MatrixBase<Derived>& x,
                       const LstmState<T>& prev,
                       const LstmLayerParams<T>& params,
                       StepCache<T>* cache = nullptr) {
  detail::check_step_shapes(x.rows(), x.cols(), prev, params);
  const Index hidden = params.hidden_size();
  const Index in = params.input_size();
  StepCache<T> local;
  StepCache<T>& sc = cache ? *cache : local;
  sc.xh.resize(in + hidden, x.cols());
  sc.xh.topRows(in) = x;
  sc.xh.bottomRows(hidden) = prev.h;
  sc.gates.noalias() = params.weights * sc.xh;
  sc.gates.colwise() += params.bias.col(0);
  auto ifo = sc.gates.topRows(3 * hidden).array();
  ifo = T(1) / (T(1) + (-ifo).exp());
  auto g = sc.gates.bottomRows(hidden).array();
  g = g.tanh();
  LstmState<T> next;
  next.c = (sc.gates.middleRows(hidden, hidden).array() * prev.c.array() +
            sc.gates.topRows(hidden).array() * g)
               .matrix();
  sc.tanh_c = next.c.array().tanh().matrix();
  next.h = (sc.gates.middleRows(2 * hidden, hidden).array() *
            sc.tanh_c.array())
               .matrix();
  if (cache) sc.c_prev = prev.c;
  return next;
}

// Computes the input, forget and output gates, updates the cell state and
// emits the hidden state for one timestep. x may hold several lanes.
template <typename T>
LstmState<T> lstm_cell_forward(const Matrix<T>& x, const LstmState<T>& prev,
                               const LstmLayerParams<T>& params) {
  return lstm_step(x, prev, params);
}

// Backward through one cached step. `dh` and `dc` are gradients flowing into
// h_t and c_t; on return `dh` and `dc` hold the gradients for h_{t-1} and
// c_{t-1}, and `dx` the gradient for x_t.
template <typename T>
void lstm_step_backward(const StepCache<T>& sc,
                        const LstmLayerParams<T>& params, Matrix<T>& dh,
                        Matrix<T>& dc, LstmLayerParams<T>& grads,
                        Matrix<T>* dx, Matrix<T>& dz_scratch) {
  const Index hidden = params.hidden_size();
  const Index in = params.input_size();
  const auto i = sc.gates.topRows(hidden).array();
  const auto f = sc.gates.middleRows(hidden, hidden).array();
  const auto o = sc.gates.middleRows(2 * hidden, hidden).array();
  const auto g = sc.gates.bottomRows(hidden).array();
  const auto tc = sc.tanh_c.array();

  dc.array() += dh.array() * o * (T(1) - tc * tc);
  Matrix<T>& dz = dz_scratch;
  dz.resize(4 * hidden, dh.cols());
  dz.topRows(hidden).array() = dc.array() * g * i * (T(1) - i);
  dz.middleRows(hidden, hidden).array() =
      dc.array() * sc.c_prev.array() * f * (T(1) - f);
  dz.middleRows(2 * hidden, hidden).array() = dh.array() * tc * o * (T(1) - o);
  dz.bottomRows(hidden).array() = dc.array() * i * (T(1) - g * g);

  grads.weights.noalias() += dz * sc.xh.transpose();
  grads.bias.col(0) += dz.rowwise().sum();
  Matrix<T> dxh = params.weights.transpose() * dz;
  if (dx) *dx = dxh.topRows(in);
  dh = dxh.bottomRows(hidden);
  dc.array() *= f;
}

// A stack of LSTM layers; layer k's h feeds layer k+1 at the same timestep.
template <typename T>
class LstmStack {
 public:
  LstmStack() = default;
  LstmStack(Index input_size, Index hidden_size, std::size_t num_layers,
            Rng& rng) {
    if (num_layers < 1) throw ShapeError("LSTM stack needs at least 1 layer");
    for (std::size_t l = 0; l < num_layers; ++l) {
      layers.push_back(LstmLayerParams<T>::init(
          l == 0 ? input_size : hidden_size, hidden_size, rng));
    }
  }

  std::vector<LstmLayerParams<T>> layers;

  Index input_size() const { return layers.front().input_size(); }
  Index hidden_size() const { return layers.front().hidden_size(); }
  std::size_t num_layers() const { return layers.size(); }

  std::vector<LstmState<T>> zero_states(Index batch) const {
    std::vector<LstmState<T>> s;
    for (const auto& l : layers) {
      s.push_back(LstmState<T>::zeros(l.hidden_size(), batch));
    }
    return s;
  }

  // caches[t][layer]
  using SequenceCache = std::vector<std::vector<StepCache<T>>>;

  // Runs xs.size() timesteps from `states` (updated in place). When
  // `resets` is given, lanes flagged at step t start that step from zero
  // state. Returns the top-layer h per step.
  std::vector<Matrix<T>> forward(
      std::span<const Matrix<T>> xs, std::vector<LstmState<T>>& states,
      const std::vector<std::vector<std::uint8_t>>* resets = nullptr,
      SequenceCache* cache = nullptr) const {
    if (states.size() != layers.size()) {
      throw ShapeError("state count does not match layer count");
    }
    std::vector<Matrix<T>> tops;
    tops.reserve(xs.size());
    if (cache) cache->assign(xs.size(), std::vector<StepCache<T>>(layers.size()));
    for (std::size_t t = 0; t < xs.size(); ++t) {
      if (resets) apply_reset((*resets)[t], states);
      const Matrix<T>* input = &xs[t];
      for (std::size_t l = 0; l < layers.size(); ++l) {
        states[l] = lstm_step(*input, states[l], layers[l],
                              cache ? &(*cache)[t][l] : nullptr);
        input = &states[l].h;
      }
      tops.push_back(states.back().h);
    }
    return tops;
  }

  // Accumulates parameter gradients into `grads` (same shapes as layers)
  // given the gradient of the loss w.r.t. each top-layer output. Gradients
  // do not flow into the initial state of the window.
  void backward(const SequenceCache& cache,
                std::span<const Matrix<T>> d_tops,
                const std::vector<std::vector<std::uint8_t>>* resets,
                std::vector<LstmLayerParams<T>>& grads,
                std::vector<Matrix<T>>* d_xs) const {
    const std::size_t steps = cache.size();
    if (d_tops.size() != steps) throw ShapeError("d_tops length mismatch");
    std::vector<Matrix<T>> d_in(d_tops.begin(), d_tops.end());
    Matrix<T> dz;
    for (std::size_t l = layers.size(); l-- > 0;) {
      const Index batch = d_in.empty() ? 0 : d_in[0].cols();
      Matrix<T> dh_next = Matrix<T>::Zero(layers[l].hidden_size(), batch);
      Matrix<T> dc_next = Matrix<T>::Zero(layers[l].hidden_size(), batch);
      std::vector<Matrix<T>> d_below(steps);
      const bool need_dx = l > 0 || d_xs != nullptr;
      for (std::size_t t = steps; t-- > 0;) {
        Matrix<T> dh = d_in[t] + dh_next;
        lstm_step_backward(cache[t][l], layers[l], dh, dc_next, grads[l],
                           need_dx ? &d_below[t] : nullptr, dz);
        dh_next = std::move(dh);
        if (resets) {
          const auto& r = (*resets)[t];
          for (Index b = 0; b < batch; ++b) {
            if (r[b]) {
              dh_next.col(b).setZero();
              dc_next.col(b).setZero();
            }
          }
        }
      }
      d_in = std::move(d_below);
    }
    if (d_xs) *d_xs = std::move(d_in);
  }

 private:
  static void apply_reset(const std::vector<std::uint8_t>& reset,
                          std::vector<LstmState<T>>& states) {
    for (std::size_t b = 0; b < reset.size(); ++b) {
      if (!reset[b]) continue;
      for (auto& s : states) {
        s.h.col(b).setZero();
        s.c.col(b).setZero();
      }
    }
  }
};

// Convenience wrapper: sequence through a stack from the given states.
template <typename T>
std::vector<Matrix<T>> stacked_forward(std::span<const Matrix<T>> inputs,
                                       const LstmStack<T>& stack,
                                       std::vector<LstmState<T>>& states) {
  return stack.forward(inputs, states);
}

template <typename T>
struct SoftmaxResult {
  T loss;
  Vector<T> probs;
};

// Stable softmax; loss = -log p[label].
template <typename T>
SoftmaxResult<T> softmax_xent(const Vector<T>& logits, Index label) {
  if (label < 0 || label >= logits.size()) {
    throw DataError(fmt::format("label {} outside {} classes", label,
                                logits.size()));
  }
  const T max = logits.maxCoeff();
  Vector<T> shifted = logits.array() - max;
  const T log_sum = std::log(shifted.array().exp().sum());
  SoftmaxResult<T> r;
  r.probs = (shifted.array() - log_sum).exp().matrix();
  r.loss = log_sum - shifted(label);
  return r;
}

template <typename T>
Vector<T> softmax(const Vector<T>& logits) {
  const T max = logits.maxCoeff();
  Vector<T> e = (logits.array() - max).exp().matrix();
  return e / e.sum();
}

// Highest K probabilities, descending; ties broken by ascending class ID.
template <typename T>
std::vector<std::pair<Index, T>> topk(std::span<const T> probs,
                                      std::size_t k = 10) {
  if (k > probs.size()) {
    throw DataError(
        fmt::format("top-{} requested over {} classes", k, probs.size()));
  }
  std::vector<Index> ids(probs.size());
  std::iota(ids.begin(), ids.end(), Index{0});
  const auto better = [&](Index a, Index b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), better);
  std::vector<std::pair<Index, T>> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(ids[i], probs[ids[i]]);
  return out;
}

}  // namespace pfbench::nn
