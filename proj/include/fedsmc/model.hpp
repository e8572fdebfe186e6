#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsmc/data.hpp"
#include "fedsmc/errors.hpp"
#include "fedsmc/params.hpp"
#include "fedsmc/rng.hpp"

namespace fedsmc {

enum class ModelKind { logistic, mlp };

inline std::string to_string(ModelKind k) {
  return k == ModelKind::logistic ? "logistic" : "mlp";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "logistic") return ModelKind::logistic;
  if (s == "mlp") return ModelKind::mlp;
  throw ConfigError("model.kind: unknown value '" + s +
                    "' (expected logistic or mlp)");
}

// Binary classifier producing one logit. Parameter layout inside a
// WeightVector:
//   logistic: [w(input_dim), b]
//   mlp:      [W1 row-major (hidden_dim x input_dim), b1(hidden_dim),
//              w2(hidden_dim), b2]  with a tanh hidden layer
struct ModelSpec {
  ModelKind kind = ModelKind::logistic;
  int input_dim = 64;
  int hidden_dim = 16;  // mlp only
};

inline std::size_t param_count(const ModelSpec& spec) {
  if (spec.input_dim < 1) throw UsageError("model.input_dim: must be >= 1");
  if (spec.kind == ModelKind::logistic) {
    return static_cast<std::size_t>(spec.input_dim) + 1;
  }
  if (spec.hidden_dim < 1) throw UsageError("model.hidden_dim: must be >= 1");
  const auto d = static_cast<std::size_t>(spec.input_dim);
  const auto h = static_cast<std::size_t>(spec.hidden_dim);
  return h * d + h + h + 1;
}

enum class OptimizerKind { sgd, adam };

inline std::string to_string(OptimizerKind k) {
  return k == OptimizerKind::sgd ? "sgd" : "adam";
}

inline OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("optimizer.kind: unknown value '" + s +
                    "' (expected sgd or adam)");
}

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::adam;
  double eta = 0.009;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam accumulators; kept per client so moments persist across rounds
// within one run.
struct AdamState {
  std::vector<double> m, v;
  long step = 0;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Weights ~ N(0, 0.05^2), biases zero; deterministic in (spec, seed).
inline WeightVector init_weights(const ModelSpec& spec, std::uint64_t seed) {
  WeightVector w(param_count(spec), 0.0);
  auto eng = substream(seed, StreamPurpose::weight_init);
  std::normal_distribution<double> gauss(0.0, 0.05);
  if (spec.kind == ModelKind::logistic) {
    for (int i = 0; i < spec.input_dim; ++i) w[i] = gauss(eng);
  } else {
    const int d = spec.input_dim, h = spec.hidden_dim;
    for (int i = 0; i < h * d; ++i) w[i] = gauss(eng);       // W1
    for (int j = 0; j < h; ++j) w[h * d + h + j] = gauss(eng);  // w2
  }
  return w;
}

// Logit of one example. For the mlp, `hidden` (when non-null) receives the
// tanh activations for reuse in backprop.
inline double forward_logit(const ModelSpec& spec, const WeightVector& w,
                            const std::vector<double>& x,
                            std::vector<double>* hidden = nullptr) {
  if (static_cast<int>(x.size()) != spec.input_dim) {
    throw ShapeError("model: feature dim does not match spec");
  }
  if (spec.kind == ModelKind::logistic) {
    double z = w[spec.input_dim];
    for (int i = 0; i < spec.input_dim; ++i) z += w[i] * x[i];
    return z;
  }
  const int d = spec.input_dim, h = spec.hidden_dim;
  const double* w1 = w.data();
  const double* b1 = w.data() + h * d;
  const double* w2 = b1 + h;
  const double b2 = w2[h];
  double z = b2;
  if (hidden) hidden->resize(h);
  for (int j = 0; j < h; ++j) {
    double pre = b1[j];
    const double* row = w1 + j * d;
    for (int i = 0; i < d; ++i) pre += row[i] * x[i];
    const double a = std::tanh(pre);
    if (hidden) (*hidden)[j] = a;
    z += w2[j] * a;
  }
  return z;
}

inline double predict_proba(const ModelSpec& spec, const WeightVector& w,
                            const std::vector<double>& x) {
  return sigmoid(forward_logit(spec, w, x));
}

// Class 1 iff predicted probability >= 0.5.
inline std::vector<int> predict_labels(const ModelSpec& spec,
                                       const WeightVector& w,
                                       const std::vector<Example>& data) {
  std::vector<int> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i] = forward_logit(spec, w, data[i].features) >= 0.0 ? 1 : 0;
  }
  return out;
}

// Mean binary cross-entropy and its gradient over the indexed batch.
inline std::pair<double, WeightVector> loss_and_grad(
    const ModelSpec& spec, const WeightVector& w,
    const std::vector<Example>& data, std::span<const int> batch) {
  if (batch.empty()) throw UsageError("loss_and_grad: empty batch");
  if (w.size() != param_count(spec)) {
    throw ShapeError("loss_and_grad: weight dim does not match spec");
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  WeightVector grad(w.size(), 0.0);
  std::vector<double> hidden;
  const int d = spec.input_dim;

  for (int idx : batch) {
    const Example& ex = data[idx];
    const double y = ex.label;
    const double z = forward_logit(spec, w, ex.features,
                                   spec.kind == ModelKind::mlp ? &hidden
                                                               : nullptr);
    if (!std::isfinite(z)) {
      throw ArithmeticDomainError("loss_and_grad: non-finite activation");
    }
    loss += softplus(z) - y * z;
    const double dz = (sigmoid(z) - y) * inv_n;
    if (spec.kind == ModelKind::logistic) {
      for (int i = 0; i < d; ++i) grad[i] += dz * ex.features[i];
      grad[d] += dz;
    } else {
      const int h = spec.hidden_dim;
      const double* w2 = w.data() + h * d + h;
      double* g_w1 = grad.data();
      double* g_b1 = grad.data() + h * d;
      double* g_w2 = g_b1 + h;
      for (int j = 0; j < h; ++j) {
        const double a = hidden[j];
        g_w2[j] += dz * a;
        const double dpre = dz * w2[j] * (1.0 - a * a);
        double* g_row = g_w1 + j * d;
        for (int i = 0; i < d; ++i) g_row[i] += dpre * ex.features[i];
        g_b1[j] += dpre;
      }
      g_w2[h] += dz;  // b2
    }
  }
  return {loss * inv_n, std::move(grad)};
}

inline std::pair<double, WeightVector> loss_and_grad(
    const ModelSpec& spec, const WeightVector& w,
    const std::vector<Example>& batch) {
  std::vector<int> all(batch.size());
  std::iota(all.begin(), all.end(), 0);
  return loss_and_grad(spec, w, batch, all);
}

inline double mean_loss(const ModelSpec& spec, const WeightVector& w,
                        const std::vector<Example>& data) {
  if (data.empty()) throw UsageError("mean_loss: empty dataset");
  double loss = 0.0;
  for (const auto& ex : data) {
    const double z = forward_logit(spec, w, ex.features);
    loss += softplus(z) - ex.label * z;
  }
  return loss / static_cast<double>(data.size());
}

inline void apply_step(WeightVector& w, const WeightVector& grad,
                       const OptimizerSpec& opt, AdamState& state) {
  if (opt.kind == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= opt.eta * grad[i];
    return;
  }
  if (state.m.size() != w.size()) {
    state.m.assign(w.size(), 0.0);
    state.v.assign(w.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, state.step);
  const double bc2 = 1.0 - std::pow(opt.beta2, state.step);
  for (std::size_t i = 0; i < w.size(); ++i) {
    state.m[i] = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * grad[i];
    state.v[i] = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    w[i] -= opt.eta * m_hat / (std::sqrt(v_hat) + opt.epsilon);
  }
}

// Runs local_epochs passes over `data`: each pass shuffles the example
// order with `stream`, chunks it into batches of batch_size (last batch may
// be shorter), and applies one optimizer step per batch. w0 is not mutated.
// When `state` is null a fresh Adam state is used and discarded.
inline WeightVector local_training(const ModelSpec& spec,
                                   const std::vector<Example>& data,
                                   const WeightVector& w0,
                                   const OptimizerSpec& opt, int local_epochs,
                                   int batch_size, std::mt19937_64& stream,
                                   AdamState* state = nullptr) {
  if (data.empty()) throw UsageError("local_training: empty dataset");
  if (local_epochs < 1) throw UsageError("local_training: local_epochs < 1");
  if (batch_size < 1) throw UsageError("local_training: batch_size < 1");
  if (!(opt.eta > 0.0) && opt.eta != 0.0) {
    throw UsageError("optimizer.eta: must be >= 0");
  }

  WeightVector w = w0;
  AdamState scratch;
  AdamState& st = state ? *state : scratch;
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int e = 0; e < local_epochs; ++e) {
    std::shuffle(order.begin(), order.end(), stream);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_size)) {
      const std::size_t len =
          std::min(static_cast<std::size_t>(batch_size), order.size() - start);
      auto [loss, grad] = loss_and_grad(
          spec, w, data, std::span<const int>(order.data() + start, len));
      (void)loss;
      apply_step(w, grad, opt, st);
    }
  }
  require_finite(w, "local_training");
  return w;
}

}  // namespace fedsmc
