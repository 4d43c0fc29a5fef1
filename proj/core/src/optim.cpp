#include "fedprompt/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace fedprompt {

namespace {

void check_adam_config(const AdamConfig& cfg) {
  if (cfg.lr <= 0.0) throw std::invalid_argument("adam: learning rate must be positive");
  if (cfg.eps <= 0.0) throw std::invalid_argument("adam: eps must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) {
    throw std::invalid_argument("adam: betas must lie in [0, 1)");
  }
  if (cfg.weight_decay < 0.0) throw std::invalid_argument("adam: negative weight decay");
}

void check_sgd_config(const SgdConfig& cfg) {
  if (cfg.lr <= 0.0) throw std::invalid_argument("sgd: learning rate must be positive");
}

}  // namespace

void validate_optimizer_config(const OptimizerConfig& cfg) {
  if (cfg.kind == OptimizerKind::adam) {
    check_adam_config(cfg.adam);
  } else {
    check_sgd_config(cfg.sgd);
  }
}

AdamState fresh_adam(const AdamConfig& cfg, std::size_t rows, std::size_t cols) {
  check_adam_config(cfg);
  AdamState state;
  state.config = cfg;
  state.m = Matrix(rows, cols);
  state.v = Matrix(rows, cols);
  state.step_count = 0;
  return state;
}

Prompt adam_step(AdamState& state, const Prompt& p, const Matrix& grad) {
  if (!p.weights.same_shape(grad) || !state.m.same_shape(grad)) {
    throw std::invalid_argument("adam_step: shape mismatch between prompt, gradient, and state");
  }
  const AdamConfig& c = state.config;
  state.step_count += 1;

  Prompt out = p;
  auto m = state.m.data();
  auto v = state.v.data();
  auto g = grad.data();
  auto w = out.weights.data();

  const double bc1 = c.bias_correction ? 1.0 - std::pow(c.beta1, double(state.step_count)) : 1.0;
  const double bc2 = c.bias_correction ? 1.0 - std::pow(c.beta2, double(state.step_count)) : 1.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    w[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
  if (c.weight_decay != 0.0) {
    const double keep = 1.0 - c.lr * c.weight_decay;
    for (double& x : w) x *= keep;
  }
  return out;
}

Prompt sgd_step(const SgdConfig& cfg, const Prompt& p, const Matrix& grad) {
  check_sgd_config(cfg);
  if (!p.weights.same_shape(grad)) throw std::invalid_argument("sgd_step: shape mismatch");
  Prompt out = p;
  auto w = out.weights.data();
  auto g = grad.data();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.lr * g[i];
  return out;
}

PromptOptimizer::PromptOptimizer(const OptimizerConfig& cfg, std::size_t rows, std::size_t cols)
    : kind_(cfg.kind), sgd_(cfg.sgd) {
  if (kind_ == OptimizerKind::adam) {
    adam_ = fresh_adam(cfg.adam, rows, cols);
  } else {
    check_sgd_config(sgd_);
  }
}

void PromptOptimizer::step(Prompt& p, const Matrix& grad) {
  p = kind_ == OptimizerKind::adam ? adam_step(*adam_, p, grad) : sgd_step(sgd_, p, grad);
}

}  // namespace fedprompt
