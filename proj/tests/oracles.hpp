#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library beyond plain data types.

#include <cmath>
#include <cstdint>
#include <list>
#include <vector>

namespace pfbench::testing {

// Per-set recency stack: an access hits iff the line sits within the top
// `ways` entries of its set's stack (stack distance < ways).
inline std::vector<bool> lru_stack_hits(const std::vector<std::uint64_t>& lines,
                                        std::uint64_t sets, std::uint64_t ways) {
  std::vector<std::list<std::uint64_t>> stacks(sets);
  std::vector<bool> hits;
  for (auto line : lines) {
    auto& st = stacks[line % sets];
    std::uint64_t depth = 0;
    bool found = false;
    for (auto it = st.begin(); it != st.end(); ++it, ++depth) {
      if (*it == line) {
        found = true;
        st.erase(it);
        break;
      }
    }
    hits.push_back(found && depth < ways);
    st.push_front(line);
  }
  return hits;
}

// Straight-line transcription of the LSTM cell with scalar loops. W_g is
// hidden x (in + hidden), row-major, over [x, h_prev].
struct ScalarCell {
  std::size_t in = 0, hidden = 0;
  std::vector<double> wi, wf, wo, wc;  // row-major
  std::vector<double> bi, bf, bo, bc;
};

inline void scalar_cell_forward(const ScalarCell& p, const std::vector<double>& x,
                                const std::vector<double>& h_prev,
                                const std::vector<double>& c_prev,
                                std::vector<double>& h, std::vector<double>& c) {
  const std::size_t cols = p.in + p.hidden;
  std::vector<double> z(cols);
  for (std::size_t k = 0; k < p.in; ++k) z[k] = x[k];
  for (std::size_t k = 0; k < p.hidden; ++k) z[p.in + k] = h_prev[k];
  h.assign(p.hidden, 0.0);
  c.assign(p.hidden, 0.0);
  for (std::size_t j = 0; j < p.hidden; ++j) {
    double ai = p.bi[j], af = p.bf[j], ao = p.bo[j], ac = p.bc[j];
    for (std::size_t k = 0; k < cols; ++k) {
      ai += p.wi[j * cols + k] * z[k];
      af += p.wf[j * cols + k] * z[k];
      ao += p.wo[j * cols + k] * z[k];
      ac += p.wc[j * cols + k] * z[k];
    }
    const double i = 1.0 / (1.0 + std::exp(-ai));
    const double f = 1.0 / (1.0 + std::exp(-af));
    const double o = 1.0 / (1.0 + std::exp(-ao));
    c[j] = f * c_prev[j] + i * std::tanh(ac);
    h[j] = o * std::tanh(c[j]);
  }
}

}  // namespace pfbench::testing
