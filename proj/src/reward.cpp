#include "agensflow/reward.hpp"

#include <cmath>
#include <stdexcept>

namespace agensflow {

const std::array<const char*, kAxisCount> kAxisNames = {
    "goal_achievement", "grounding", "coordination", "recovery"};

double& AxisScores::axis(int i) {
  switch (i) {
    case 0: return goal_achievement;
    case 1: return grounding;
    case 2: return coordination;
    case 3: return recovery;
  }
  throw std::invalid_argument("axis index outside [0, 3]");
}

double AxisScores::axis(int i) const {
  return const_cast<AxisScores*>(this)->axis(i);
}

double compose_axes(const AxisScores& axes, const AxisWeights& weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("axis weight must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("axis weights must sum to 1");
  }
  double scalar = 0.0;
  for (int i = 0; i < kAxisCount; ++i) scalar += weights[i] * axes.axis(i);
  return scalar;
}

namespace {

void check_group(const std::vector<const Trajectory*>& group) {
  if (group.size() < 2) {
    throw std::invalid_argument("relative judging needs >= 2 trajectories");
  }
  for (const Trajectory* t : group) {
    if (t == nullptr) throw std::invalid_argument("null trajectory in group");
    if (t->class_tag != group.front()->class_tag) {
      throw std::invalid_argument("judge group mixes task classes");
    }
  }
}

}  // namespace

std::optional<std::vector<TrajectoryScore>> judge_group(
    const std::vector<const Trajectory*>& group, JudgeInterface& judge,
    const AxisWeights& weights) {
  check_group(group);
  std::vector<AxisScores> axes;
  try {
    axes = judge.score_group(group);
  } catch (const std::exception&) {
    return std::nullopt;  // judge fault: group scored as absent
  }
  if (axes.size() != group.size()) {
    throw std::logic_error("judge returned wrong score count");
  }
  std::vector<TrajectoryScore> scores;
  scores.reserve(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    TrajectoryScore s;
    s.trajectory_id = group[i]->id;
    s.axes = axes[i];
    s.scalar = compose_axes(axes[i], weights);
    s.judge_id = judge.id();
    scores.push_back(std::move(s));
  }
  return scores;
}

std::optional<CrossJudgeResult> cross_judge(
    const std::vector<const Trajectory*>& group,
    const std::vector<JudgeInterface*>& judges, const AxisWeights& weights,
    double sigma_max) {
  check_group(group);
  if (judges.empty()) throw std::invalid_argument("cross_judge needs a judge");

  CrossJudgeResult result;
  for (JudgeInterface* judge : judges) {
    if (judge == nullptr) throw std::invalid_argument("null judge");
    auto scores = judge_group(group, *judge, weights);
    if (scores) result.per_judge.push_back(std::move(*scores));
  }
  if (result.per_judge.empty()) return std::nullopt;  // every judge faulted

  const std::size_t n = group.size();
  const double k = static_cast<double>(result.per_judge.size());
  result.mean.assign(n, 0.0);
  result.stddev.assign(n, 0.0);
  result.confidence.assign(n, 0.0);
  result.mean_axes.assign(n, AxisScores{});
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& judge_scores : result.per_judge) {
      sum += judge_scores[i].scalar;
      for (int a = 0; a < kAxisCount; ++a) {
        result.mean_axes[i].axis(a) += judge_scores[i].axes.axis(a) / k;
      }
    }
    double mean = sum / k;
    double sq = 0.0;
    for (const auto& judge_scores : result.per_judge) {
      double d = judge_scores[i].scalar - mean;
      sq += d * d;
    }
    result.mean[i] = mean;
    result.stddev[i] = std::sqrt(sq / k);  // population std
    result.confidence[i] = confidence_from_disagreement(result.stddev[i],
                                                        sigma_max);
  }
  return result;
}

double confidence_from_disagreement(double stddev, double sigma_max) {
  if (stddev < 0.0) throw std::invalid_argument("stddev must be >= 0");
  if (sigma_max <= 0.0) throw std::invalid_argument("sigma_max must be > 0");
  return std::max(0.0, 1.0 - stddev / sigma_max);
}

double hybrid_reward(double quality, int tokens, int retries,
                     const RewardWeights& weights) {
  if (weights.token_cap <= 0) {
    throw std::invalid_argument("token_cap must be > 0");
  }
  if (weights.w_quality < 0.0 || weights.w_cost < 0.0 || weights.w_retry < 0.0) {
    throw std::invalid_argument("reward weights must be nonnegative");
  }
  if (tokens < 0 || retries < 0) {
    throw std::invalid_argument("token and retry counts must be nonnegative");
  }
  return weights.w_quality * quality -
         weights.w_cost * (static_cast<double>(tokens) / weights.token_cap) -
         weights.w_retry * retries;
}

RewardBreakdown reward_breakdown(double quality, int tokens, int retries,
                                 const RewardWeights& weights) {
  RewardBreakdown b;
  b.quality = quality;
  b.cost_term =
      weights.w_cost * (static_cast<double>(tokens) / weights.token_cap);
  b.retry_term = weights.w_retry * retries;
  b.total = hybrid_reward(quality, tokens, retries, weights);
  b.judged = true;
  return b;
}

}  // namespace agensflow
