#pragma once

#include <cstdint>
#include <optional>

#include "fedprompt/backbone.hpp"
#include "fedprompt/matrix.hpp"

namespace fedprompt {

struct AdamConfig {
  double lr = 0.1;
  double beta1 = 0.99;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;     // decoupled, applied after the update
  bool bias_correction = true;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct SgdConfig {
  double lr = 0.1;

  friend bool operator==(const SgdConfig&, const SgdConfig&) = default;
};

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  AdamConfig adam;
  SgdConfig sgd;

  // Only the active optimizer's settings carry meaning.
  friend bool operator==(const OptimizerConfig& a, const OptimizerConfig& b) {
    if (a.kind != b.kind) return false;
    return a.kind == OptimizerKind::adam ? a.adam == b.adam : a.sgd == b.sgd;
  }
};

/// Throws std::invalid_argument on nonpositive learning rate or eps.
void validate_optimizer_config(const OptimizerConfig& cfg);

/// Moment accumulators for one prompt-shaped parameter. A fresh state has
/// zero moments and step_count 0; step_count advances by exactly one per
/// adam_step.
struct AdamState {
  AdamConfig config;
  Matrix m;
  Matrix v;
  std::int64_t step_count = 0;
};

AdamState fresh_adam(const AdamConfig& cfg, std::size_t rows, std::size_t cols);

/// Standard bias-corrected Adam followed by decoupled weight decay
/// p <- p * (1 - lr * weight_decay). Advances the state in place and
/// returns the updated prompt.
Prompt adam_step(AdamState& state, const Prompt& p, const Matrix& grad);

/// p - lr * grad.
Prompt sgd_step(const SgdConfig& cfg, const Prompt& p, const Matrix& grad);

/// Per-run optimizer over one prompt, constructed fresh wherever the
/// protocol demands stateless clients.
class PromptOptimizer {
 public:
  PromptOptimizer(const OptimizerConfig& cfg, std::size_t rows, std::size_t cols);

  void step(Prompt& p, const Matrix& grad);

 private:
  OptimizerKind kind_;
  SgdConfig sgd_;
  std::optional<AdamState> adam_;
};

}  // namespace fedprompt
