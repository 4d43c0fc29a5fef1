#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedprompt/backbone.hpp"

namespace fedprompt {

enum class Metric { rouge_l, exact_match };

/// LCS-based F-measure over token sequences in [0, 1]. With lcs the length
/// of the longest common subsequence, precision = lcs/|hyp| and
/// recall = lcs/|ref|; the score is F_beta = (1+beta^2)PR / (R + beta^2 P).
/// Empty hypothesis, empty reference, or lcs = 0 score 0.
double rouge_l(std::span<const TokenId> hypothesis, std::span<const TokenId> reference,
               double beta = 1.0);

/// Decode with the prompt, strip the trailing EOS from each target, and
/// return the max metric value over targets.
double score_instance(const FrozenBackbone& b, const Prompt& p, const Instance& inst,
                      Metric metric, double rouge_beta = 1.0);

/// Arithmetic mean of score_instance over the set. Throws on an empty set.
double score_set(const FrozenBackbone& b, const Prompt& p, const std::vector<Instance>& instances,
                 Metric metric, double rouge_beta = 1.0);

/// Empirical quantile with linear interpolation between order statistics;
/// q in [0, 1].
double percentile(std::vector<double> values, double q);

struct TrajectoryPoint {
  std::int64_t epoch = 0;
  double local_score = 0.0;
  double global_score = 0.0;

  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

/// Scores recorded while one client fine-tunes from the global prompt.
/// points.front() is always epoch 0 with the pre-personalization scores.
struct ClientTrajectory {
  std::int32_t client_id = 0;
  std::vector<TrajectoryPoint> points;
  Prompt final_prompt;
};

struct CurvePoint {
  std::int64_t epoch = 0;
  double mean_local = 0.0;
  double mean_global = 0.0;
  double p10_local = 0.0;
  double p90_local = 0.0;
  double p10_global = 0.0;
  double p90_global = 0.0;
};

/// Cross-client aggregate of the personalization-vs-robustness trade-off.
struct TradeoffCurve {
  std::vector<CurvePoint> points;
};

/// Per evaluation epoch, the mean and the 10th/90th percentiles across
/// clients of the local and global scores. All trajectories must share the
/// same evaluation epochs.
TradeoffCurve aggregate_curve(const std::vector<ClientTrajectory>& trajectories);

}  // namespace fedprompt
