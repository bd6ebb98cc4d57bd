#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "agensflow/router.hpp"

namespace agensflow {

// Rubric axes, each in [0, 1], in fixed order:
// goal_achievement, grounding, coordination, recovery.
struct AxisScores {
  double goal_achievement = 0.0;
  double grounding = 0.0;
  double coordination = 0.0;
  double recovery = 0.0;

  double& axis(int i);
  double axis(int i) const;
};

inline constexpr int kAxisCount = 4;
extern const std::array<const char*, kAxisCount> kAxisNames;

using AxisWeights = std::array<double, kAxisCount>;
inline constexpr AxisWeights kEqualAxisWeights = {0.25, 0.25, 0.25, 0.25};

struct TrajectoryScore {
  std::string trajectory_id;
  double scalar = 0.0;
  AxisScores axes;
  std::string judge_id;
};

struct RewardWeights {
  double w_quality = 1.0;
  double w_cost = 0.3;
  double w_retry = 0.15;
  int token_cap = 8000;
};

// Comparative scorer over a same-class trajectory group. One call scores the
// whole group side by side. Implementations may throw to signal a judge fault.
class JudgeInterface {
 public:
  virtual ~JudgeInterface() = default;
  virtual std::string id() const = 0;
  virtual std::vector<AxisScores> score_group(
      const std::vector<const Trajectory*>& group) = 0;
};

// Dot product of axes and weights. Weights must be nonnegative and sum to 1
// within 1e-9 (std::invalid_argument otherwise).
double compose_axes(const AxisScores& axes, const AxisWeights& weights);

// One comparative judge call over a group of >= 2 same-class trajectories.
// Returns nullopt when the judge faults (the group is scored as absent);
// throws std::invalid_argument on precondition violations.
std::optional<std::vector<TrajectoryScore>> judge_group(
    const std::vector<const Trajectory*>& group, JudgeInterface& judge,
    const AxisWeights& weights);

struct CrossJudgeResult {
  std::vector<double> mean;        // per trajectory, over judges
  std::vector<double> stddev;      // population std across judges
  std::vector<double> confidence;  // confidence_from_disagreement(stddev)
  std::vector<AxisScores> mean_axes;
  std::vector<std::vector<TrajectoryScore>> per_judge;  // [judge][trajectory]
};

// Runs every judge independently over the group and averages per trajectory.
// Judges are consulted in the order given; callers sort by judge id for
// order-determinism. Faulting judges are dropped; nullopt when all fault.
std::optional<CrossJudgeResult> cross_judge(
    const std::vector<const Trajectory*>& group,
    const std::vector<JudgeInterface*>& judges, const AxisWeights& weights,
    double sigma_max);

// max(0, 1 - std / sigma_max), monotone nonincreasing in std.
double confidence_from_disagreement(double stddev, double sigma_max = 0.5);

// w_quality * quality - w_cost * tokens/token_cap - w_retry * retries.
// The token ratio is deliberately unclamped above 1.
double hybrid_reward(double quality, int tokens, int retries,
                     const RewardWeights& weights = {});

RewardBreakdown reward_breakdown(double quality, int tokens, int retries,
                                 const RewardWeights& weights = {});

struct RewardConfig {
  RewardWeights weights;
  AxisWeights axis_weights = kEqualAxisWeights;
  double sigma_max = 0.5;
  std::string live_judge = "judge_primary";
  std::vector<std::string> audit_judges = {"judge_audit_a", "judge_audit_b",
                                           "judge_audit_c"};
  std::string bias_probe_judge = "judge_favoring_warm";
};

}  // namespace agensflow
