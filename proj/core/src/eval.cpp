#include "fedprompt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedprompt {

namespace {

std::size_t lcs_length(std::span<const TokenId> a, std::span<const TokenId> b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n == 0 || m == 0) return 0;
  std::vector<std::size_t> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      if (a[i - 1] == b[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

std::span<const TokenId> strip_trailing_eos(const std::vector<TokenId>& target) {
  if (!target.empty() && target.back() == kEosToken) {
    return std::span<const TokenId>(target.data(), target.size() - 1);
  }
  return target;
}

}  // namespace

double rouge_l(std::span<const TokenId> hypothesis, std::span<const TokenId> reference,
               double beta) {
  if (hypothesis.empty() || reference.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(hypothesis, reference));
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(hypothesis.size());
  const double recall = lcs / static_cast<double>(reference.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * precision * recall / (recall + b2 * precision);
}

double score_instance(const FrozenBackbone& b, const Prompt& p, const Instance& inst,
                      Metric metric, double rouge_beta) {
  if (inst.targets.empty()) throw std::invalid_argument("score_instance: instance has no targets");
  const std::vector<TokenId> hyp = decode(b, p, inst.input);
  double best = 0.0;
  for (const auto& target : inst.targets) {
    const auto ref = strip_trailing_eos(target);
    double s = 0.0;
    if (metric == Metric::rouge_l) {
      s = rouge_l(hyp, ref, rouge_beta);
    } else {
      s = (hyp.size() == ref.size() && std::equal(hyp.begin(), hyp.end(), ref.begin())) ? 1.0
                                                                                        : 0.0;
    }
    best = std::max(best, s);
  }
  return best;
}

double score_set(const FrozenBackbone& b, const Prompt& p, const std::vector<Instance>& instances,
                 Metric metric, double rouge_beta) {
  if (instances.empty()) throw std::invalid_argument("score_set: empty instance set");
  double sum = 0.0;
  for (const Instance& inst : instances) sum += score_instance(b, p, inst, metric, rouge_beta);
  return sum / static_cast<double>(instances.size());
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: empty values");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("percentile: q outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

TradeoffCurve aggregate_curve(const std::vector<ClientTrajectory>& trajectories) {
  if (trajectories.empty()) throw std::invalid_argument("aggregate_curve: no trajectories");
  const std::size_t n_points = trajectories.front().points.size();
  for (const auto& traj : trajectories) {
    if (traj.points.size() != n_points) {
      throw std::invalid_argument("aggregate_curve: mismatched evaluation epochs across clients");
    }
    for (std::size_t i = 0; i < n_points; ++i) {
      if (traj.points[i].epoch != trajectories.front().points[i].epoch) {
        throw std::invalid_argument(
            "aggregate_curve: mismatched evaluation epochs across clients");
      }
    }
  }

  TradeoffCurve curve;
  curve.points.reserve(n_points);
  std::vector<double> locals(trajectories.size()), globals(trajectories.size());
  for (std::size_t i = 0; i < n_points; ++i) {
    double local_sum = 0.0, global_sum = 0.0;
    for (std::size_t c = 0; c < trajectories.size(); ++c) {
      locals[c] = trajectories[c].points[i].local_score;
      globals[c] = trajectories[c].points[i].global_score;
      local_sum += locals[c];
      global_sum += globals[c];
    }
    const auto n = static_cast<double>(trajectories.size());
    curve.points.push_back({trajectories.front().points[i].epoch, local_sum / n, global_sum / n,
                            percentile(locals, 0.1), percentile(locals, 0.9),
                            percentile(globals, 0.1), percentile(globals, 0.9)});
  }
  return curve;
}

}  // namespace fedprompt
