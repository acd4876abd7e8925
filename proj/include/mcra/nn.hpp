#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mcra/errors.hpp"
#include "mcra/policy.hpp"
#include "mcra/rng.hpp"

namespace mcra {

struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> v;  // row-major

  Mat() = default;
  Mat(int r, int c)
      : rows(r), cols(c),
        v(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}
  double& at(int r, int c) {
    return v[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
             static_cast<std::size_t>(c)];
  }
  double at(int r, int c) const {
    return v[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
             static_cast<std::size_t>(c)];
  }
};

inline void matvec(const Mat& m, std::span<const double> x, std::span<double> y) {
  if (x.size() != static_cast<std::size_t>(m.cols) ||
      y.size() != static_cast<std::size_t>(m.rows))
    throw ShapeError("matvec shape mismatch");
  for (int r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    const double* row = &m.v[static_cast<std::size_t>(r) * static_cast<std::size_t>(m.cols)];
    for (int c = 0; c < m.cols; ++c) acc += row[c] * x[static_cast<std::size_t>(c)];
    y[static_cast<std::size_t>(r)] = acc;
  }
}

// dx += m^T dy
inline void matvec_transpose_add(const Mat& m, std::span<const double> dy,
                                 std::span<double> dx) {
  for (int r = 0; r < m.rows; ++r) {
    const double g = dy[static_cast<std::size_t>(r)];
    if (g == 0.0) continue;
    const double* row = &m.v[static_cast<std::size_t>(r) * static_cast<std::size_t>(m.cols)];
    for (int c = 0; c < m.cols; ++c) dx[static_cast<std::size_t>(c)] += row[c] * g;
  }
}

// dm += dy x^T
inline void outer_add(Mat& dm, std::span<const double> dy, std::span<const double> x) {
  for (int r = 0; r < dm.rows; ++r) {
    const double g = dy[static_cast<std::size_t>(r)];
    if (g == 0.0) continue;
    double* row = &dm.v[static_cast<std::size_t>(r) * static_cast<std::size_t>(dm.cols)];
    for (int c = 0; c < dm.cols; ++c) row[c] += g * x[static_cast<std::size_t>(c)];
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Fully connected layer, y = W x + b.
struct Dense {
  Mat w;
  std::vector<double> b;

  Dense() = default;
  Dense(int out, int in) : w(out, in), b(static_cast<std::size_t>(out), 0.0) {}
  void apply(std::span<const double> x, std::span<double> y) const {
    matvec(w, x, y);
    for (std::size_t i = 0; i < b.size(); ++i) y[i] += b[i];
  }
};

// Single LSTM cell. Gate weights are packed row-wise as [input; forget;
// candidate; output], each block of `hidden` rows, acting on [x; h_prev].
struct LstmLayer {
  int input = 0, hidden = 0;
  Mat w;                  // (4 hidden) x (input + hidden)
  std::vector<double> b;  // 4 hidden

  LstmLayer() = default;
  LstmLayer(int in, int h)
      : input(in), hidden(h), w(4 * h, in + h),
        b(static_cast<std::size_t>(4 * h), 0.0) {}
};

struct LstmState {
  std::vector<double> h, c;

  LstmState() = default;
  explicit LstmState(int hidden)
      : h(static_cast<std::size_t>(hidden), 0.0),
        c(static_cast<std::size_t>(hidden), 0.0) {}
};

struct LstmCache {
  std::vector<double> z;  // [x; h_prev]
  std::vector<double> c_prev;
  std::vector<double> i, f, g, o, c, tanh_c, h;
};

inline void lstm_step_cached(const LstmLayer& layer, std::span<const double> x,
                             const LstmState& state, LstmCache& cache) {
  const auto h = static_cast<std::size_t>(layer.hidden);
  if (x.size() != static_cast<std::size_t>(layer.input) || state.h.size() != h)
    throw ShapeError("lstm_step shape mismatch");
  cache.z.resize(x.size() + h);
  std::copy(x.begin(), x.end(), cache.z.begin());
  std::copy(state.h.begin(), state.h.end(), cache.z.begin() + static_cast<std::ptrdiff_t>(x.size()));
  cache.c_prev = state.c;

  std::vector<double> pre(4 * h);
  matvec(layer.w, cache.z, pre);
  for (std::size_t k = 0; k < 4 * h; ++k) pre[k] += layer.b[k];

  cache.i.resize(h); cache.f.resize(h); cache.g.resize(h); cache.o.resize(h);
  cache.c.resize(h); cache.tanh_c.resize(h); cache.h.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    cache.i[k] = sigmoid(pre[k]);
    cache.f[k] = sigmoid(pre[h + k]);
    cache.g[k] = std::tanh(pre[2 * h + k]);
    cache.o[k] = sigmoid(pre[3 * h + k]);
    cache.c[k] = cache.f[k] * cache.c_prev[k] + cache.i[k] * cache.g[k];
    cache.tanh_c[k] = std::tanh(cache.c[k]);
    cache.h[k] = cache.o[k] * cache.tanh_c[k];
  }
}

// Standard LSTM gate equations; returns the new (h, c).
inline LstmState lstm_step(const LstmLayer& layer, std::span<const double> x,
                           const LstmState& state) {
  LstmCache cache;
  lstm_step_cached(layer, x, state, cache);
  LstmState next;
  next.h = cache.h;
  next.c = cache.c;
  return next;
}

// One-step (truncated) LSTM backward: dh is the loss gradient w.r.t. the
// emitted h; gradients into the previous state and the input are dropped.
inline void lstm_backward(const LstmLayer& layer, const LstmCache& cache,
                          std::span<const double> dh, LstmLayer& grad) {
  const auto h = static_cast<std::size_t>(layer.hidden);
  std::vector<double> da(4 * h);
  for (std::size_t k = 0; k < h; ++k) {
    const double d_o = dh[k] * cache.tanh_c[k];
    const double dc = dh[k] * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
    const double di = dc * cache.g[k];
    const double df = dc * cache.c_prev[k];
    const double dg = dc * cache.i[k];
    da[k] = di * cache.i[k] * (1.0 - cache.i[k]);
    da[h + k] = df * cache.f[k] * (1.0 - cache.f[k]);
    da[2 * h + k] = dg * (1.0 - cache.g[k] * cache.g[k]);
    da[3 * h + k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
  }
  outer_add(grad.w, da, cache.z);
  for (std::size_t k = 0; k < 4 * h; ++k) grad.b[k] += da[k];
}

// B_j(a) = A_j(a) - mean_a' A_j(a'); Q_j(a) = V + B_j(a).
inline QMatrix dueling_combine(double value,
                               const std::vector<std::vector<double>>& branch_adv,
                               int n_rbs, int k_max) {
  if (branch_adv.size() != static_cast<std::size_t>(k_max))
    throw ShapeError("dueling_combine: branch count != k_max");
  QMatrix q(n_rbs, k_max);
  for (int j = 0; j < k_max; ++j) {
    const auto& adv = branch_adv[static_cast<std::size_t>(j)];
    if (adv.size() != static_cast<std::size_t>(n_rbs) + 1)
      throw ShapeError("dueling_combine: branch width != N+1");
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    for (int a = 0; a <= n_rbs; ++a) {
      q.at(a, j) = value + adv[static_cast<std::size_t>(a)] - mean;
    }
  }
  return q;
}

struct NetConfig {
  int input = 0;
  int hidden = 64;        // LSTM width
  int value_hidden = 32;  // value-stream hidden width
  int n_rbs = 0;
  int k_max = 0;
};

// Recurrent branching dueling Q-network: input -> LSTM -> {value stream
// H -> value_hidden -> 1 with ReLU, and k_max parallel advantage branches
// of width N+1} -> mean-normalized combine into the (N+1) x k_max Q-matrix.
struct DqnNet {
  NetConfig cfg;
  LstmLayer lstm;
  Dense value1, value2;
  std::vector<Dense> branches;

  DqnNet() = default;
  explicit DqnNet(const NetConfig& c)
      : cfg(c), lstm(c.input, c.hidden),
        value1(c.value_hidden, c.hidden), value2(1, c.value_hidden) {
    branches.reserve(static_cast<std::size_t>(c.k_max));
    for (int j = 0; j < c.k_max; ++j) branches.emplace_back(c.n_rbs + 1, c.hidden);
  }

  LstmState zero_state() const { return LstmState(cfg.hidden); }
};

template <class Net, class F>
void for_each_param(Net& net, F&& f) {
  f(std::string("lstm.w"), net.lstm.w.v);
  f(std::string("lstm.b"), net.lstm.b);
  f(std::string("value1.w"), net.value1.w.v);
  f(std::string("value1.b"), net.value1.b);
  f(std::string("value2.w"), net.value2.w.v);
  f(std::string("value2.b"), net.value2.b);
  for (std::size_t j = 0; j < net.branches.size(); ++j) {
    f("branch" + std::to_string(j) + ".w", net.branches[j].w.v);
    f("branch" + std::to_string(j) + ".b", net.branches[j].b);
  }
}

inline DqnNet zeros_like(const DqnNet& net) { return DqnNet(net.cfg); }

// Glorot-uniform weights, zero biases, forget-gate bias +1.
inline DqnNet init_net(const NetConfig& cfg, Rng& rng) {
  DqnNet net(cfg);
  auto fill = [&rng](Mat& m, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& x : m.v) x = (2.0 * rng.uniform() - 1.0) * limit;
  };
  fill(net.lstm.w, cfg.input + cfg.hidden, cfg.hidden);
  for (int k = 0; k < cfg.hidden; ++k) net.lstm.b[static_cast<std::size_t>(cfg.hidden + k)] = 1.0;
  fill(net.value1.w, cfg.hidden, cfg.value_hidden);
  fill(net.value2.w, cfg.value_hidden, 1);
  for (Dense& branch : net.branches) fill(branch.w, cfg.hidden, cfg.n_rbs + 1);
  return net;
}

struct ForwardCache {
  LstmCache lstm;
  std::vector<double> v1_pre, v1;
  double value = 0.0;
  std::vector<std::vector<double>> adv;  // k_max branches of width N+1
};

inline QMatrix forward_cached(const DqnNet& net, std::span<const double> x,
                              const LstmState& state, ForwardCache& cache) {
  if (x.size() != static_cast<std::size_t>(net.cfg.input))
    throw ShapeError("forward: input size " + std::to_string(x.size()) +
                     " != " + std::to_string(net.cfg.input));
  lstm_step_cached(net.lstm, x, state, cache.lstm);
  const std::span<const double> h(cache.lstm.h);

  cache.v1_pre.resize(static_cast<std::size_t>(net.cfg.value_hidden));
  cache.v1.resize(cache.v1_pre.size());
  net.value1.apply(h, cache.v1_pre);
  for (std::size_t k = 0; k < cache.v1.size(); ++k)
    cache.v1[k] = cache.v1_pre[k] > 0.0 ? cache.v1_pre[k] : 0.0;
  double v_out[1];
  net.value2.apply(cache.v1, v_out);
  cache.value = v_out[0];

  cache.adv.assign(net.branches.size(), {});
  for (std::size_t j = 0; j < net.branches.size(); ++j) {
    cache.adv[j].resize(static_cast<std::size_t>(net.cfg.n_rbs) + 1);
    net.branches[j].apply(h, cache.adv[j]);
  }
  return dueling_combine(cache.value, cache.adv, net.cfg.n_rbs, net.cfg.k_max);
}

// Acting-path forward: advances the carried recurrent state.
inline QMatrix forward(const DqnNet& net, std::span<const double> x, LstmState& state) {
  ForwardCache cache;
  QMatrix q = forward_cached(net, x, state, cache);
  state.h = cache.lstm.h;
  state.c = cache.lstm.c;
  return q;
}

// Backprop of dL/dQ through the dueling head and one LSTM step,
// accumulating into `grad` (same shape as the net).
inline void backward(const DqnNet& net, const ForwardCache& cache,
                     const QMatrix& dq, DqnNet& grad) {
  const auto h_size = static_cast<std::size_t>(net.cfg.hidden);
  const int width = net.cfg.n_rbs + 1;
  std::vector<double> dh(h_size, 0.0);

  double d_value = 0.0;
  std::vector<double> d_adv(static_cast<std::size_t>(width));
  for (int j = 0; j < net.cfg.k_max; ++j) {
    double dsum = 0.0;
    for (int a = 0; a < width; ++a) dsum += dq.at(a, j);
    d_value += dsum;
    // Q = V + A - mean(A): d/dA is the mean-removed column gradient.
    const double dmean = dsum / width;
    for (int a = 0; a < width; ++a)
      d_adv[static_cast<std::size_t>(a)] = dq.at(a, j) - dmean;
    outer_add(grad.branches[static_cast<std::size_t>(j)].w, d_adv, cache.lstm.h);
    for (int a = 0; a < width; ++a)
      grad.branches[static_cast<std::size_t>(j)].b[static_cast<std::size_t>(a)] +=
          d_adv[static_cast<std::size_t>(a)];
    matvec_transpose_add(net.branches[static_cast<std::size_t>(j)].w, d_adv, dh);
  }

  const double dv[1] = {d_value};
  outer_add(grad.value2.w, dv, cache.v1);
  grad.value2.b[0] += d_value;
  std::vector<double> dv1(cache.v1.size(), 0.0);
  matvec_transpose_add(net.value2.w, dv, dv1);
  for (std::size_t k = 0; k < dv1.size(); ++k)
    if (cache.v1_pre[k] <= 0.0) dv1[k] = 0.0;
  outer_add(grad.value1.w, dv1, cache.lstm.h);
  for (std::size_t k = 0; k < dv1.size(); ++k) grad.value1.b[k] += dv1[k];
  matvec_transpose_add(net.value1.w, dv1, dh);

  lstm_backward(net.lstm, cache.lstm, dh, grad.lstm);
}

// Mean squared error over the masked Q entries only.
inline double masked_mse(const QMatrix& q, const QMatrix& target,
                         std::span<const std::uint8_t> mask) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < q.values.size(); ++i) {
    if (!mask[i]) continue;
    const double r = q.values[i] - target.values[i];
    acc += r * r;
    ++count;
  }
  return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

// Loss and full gradient for one (state, target, mask) sample; the
// recurrent pass starts from the stored carried state.
inline std::pair<double, DqnNet> backward_masked(const DqnNet& net,
                                                 std::span<const double> x,
                                                 const LstmState& state,
                                                 const QMatrix& target,
                                                 std::span<const std::uint8_t> mask) {
  ForwardCache cache;
  const QMatrix q = forward_cached(net, x, state, cache);
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) ++count;
  QMatrix dq(net.cfg.n_rbs, net.cfg.k_max);
  double loss = 0.0;
  for (std::size_t i = 0; i < q.values.size(); ++i) {
    if (!mask[i]) continue;
    const double r = q.values[i] - target.values[i];
    loss += r * r;
    dq.values[i] = 2.0 * r / static_cast<double>(count);
  }
  DqnNet grad = zeros_like(net);
  backward(net, cache, dq, grad);
  return {count == 0 ? 0.0 : loss / static_cast<double>(count), grad};
}

struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m, v;  // in for_each_param order
};

inline void adam_update(DqnNet& net, const DqnNet& grads, AdamState& state, double lr) {
  std::vector<std::vector<double>*> params;
  std::vector<const std::vector<double>*> gs;
  for_each_param(net, [&params](const std::string&, auto& p) { params.push_back(&p); });
  for_each_param(grads, [&gs](const std::string&, auto& g) { gs.push_back(&g); });
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = *params[t];
    const auto& g = *gs[t];
    auto& m = state.m[t];
    auto& v = state.v[t];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

inline bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// Text snapshot: header with the architecture, then one `name count values`
// line per parameter tensor. %.17g keeps doubles bit-exact through the trip.
inline void save_weights(const DqnNet& net, std::ostream& out) {
  out << "mcra-weights 1\n";
  out << net.cfg.input << ' ' << net.cfg.hidden << ' ' << net.cfg.value_hidden
      << ' ' << net.cfg.n_rbs << ' ' << net.cfg.k_max << '\n';
  char buf[64];
  for_each_param(net, [&out, &buf](const std::string& name, auto& p) {
    out << name << ' ' << p.size();
    for (double x : p) {
      std::snprintf(buf, sizeof(buf), " %.17g", x);
      out << buf;
    }
    out << '\n';
  });
}

inline DqnNet load_weights(std::istream& in) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "mcra-weights" || version != 1)
    throw SimError("bad weight snapshot header");
  NetConfig cfg;
  in >> cfg.input >> cfg.hidden >> cfg.value_hidden >> cfg.n_rbs >> cfg.k_max;
  DqnNet net(cfg);
  for_each_param(net, [&in](const std::string& name, std::vector<double>& p) {
    std::string got;
    std::size_t count = 0;
    in >> got >> count;
    if (got != name || count != p.size())
      throw SimError("weight snapshot mismatch at " + name);
    for (double& x : p) in >> x;
  });
  if (!in) throw SimError("truncated weight snapshot");
  return net;
}

}  // namespace mcra
