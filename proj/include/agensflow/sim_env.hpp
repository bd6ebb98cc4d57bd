#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "agensflow/reward.hpp"
#include "agensflow/rng.hpp"
#include "agensflow/router.hpp"

namespace agensflow {

struct SyntheticTask {
  std::string id;
  TaskClass class_tag = TaskClass::C1;
  TaskFeatures features;
  double latent_difficulty = 0.5;

  TaskRef ref() const { return TaskRef{id, features}; }
};

struct SkillQuality {
  double goal = 0.0;
  double grounding = 0.0;
};

// Planted per-class structure. Useless cells cost coordination when invoked
// and are the profitable skip targets; skill/model tables plant the optimal
// solver variant. Quality deltas are pinned values plus a small deterministic
// per-(task, skill) jitter, so the planted ordering is never washed out.
struct EnvClassParams {
  // ambiguity, contradiction_risk, evidence_availability, verification_need
  std::array<double, 4> feature_mean{};
  double feature_spread = 0.05;
  double floor = 0.4;  // all four axes start here, shifted by difficulty
  std::map<std::string, SkillQuality> skill_quality;  // useful skills only
  std::map<std::string, double> solver_model_adj;     // goal adjustment
  std::set<std::string> useless_cells;                // by cell name
  std::array<double, 3> verdict_probs = {0.7, 0.15, 0.15};  // s/r/i
};

// Sampling view for one (class, cell, variant): what execute_cell draws from.
struct CellModel {
  std::string cell;
  AgentRole role = AgentRole::solver;
  double goal_delta = 0.0;       // pinned mean, jitter applied around it
  double grounding_delta = 0.0;
  double delta_spread = 0.0;     // deterministic jitter half-width
  double token_mean = 0.0;
  double token_spread = 0.0;
  double failure_prob = 0.0;
  std::vector<std::string> fields_written;
};

struct SimJudgeModel {
  std::string judge_id;
  double noise_spread = 0.015;
  // Within-group contrast around the per-axis group mean: 1 reproduces plain
  // additive scoring (latent + bias + noise); larger values amplify relative
  // differences inside the group before clamping.
  double contrast = 1.0;
  std::map<TaskClass, AxisScores> bias;  // additive, applied before clamping
  std::string favored_arm;               // empty = unbiased across arms
  double arm_bias = 0.0;
};

struct PlantedOptimum {
  TaskClass class_tag = TaskClass::C1;
  std::string best_skill;
  std::string best_model;
  std::set<std::string> skip_neutral_cells;
  double expected_quality = 0.0;  // equal-weight scalar at mean difficulty
  double expected_tokens = 0.0;
};

struct EnvConfig {
  std::map<TaskClass, EnvClassParams> classes;
  std::array<double, 8> class_mix = {0.125, 0.125, 0.125, 0.125,
                                     0.125, 0.125, 0.125, 0.125};
  std::map<std::string, int> token_means;  // keyed "skill@model"
  double token_spread_frac = 0.10;
  double quality_jitter = 0.01;  // deterministic per (task, skill)
  double failure_prob = 0.02;    // per invoke attempt, recoverable
  double difficulty_lo = 0.3;
  double difficulty_hi = 0.7;
  double difficulty_weight = 0.10;  // floor shift per unit difficulty
  double useful_coordination_bonus = 0.10;
  double useless_coordination_penalty = 0.30;
  double recovery_bonus = 0.08;
  double recovery_penalty = 0.15;
  double completion_base = 0.25;
  double completion_gain = 0.75;
  int memory_evidence_items = 3;
  int web_evidence_items = 2;
  std::map<std::string, SimJudgeModel> judge_models;

  static EnvConfig default_config();
  // make_transfer_variant(default_config()).
  static EnvConfig transfer_config();
};

// Same class taxonomy and useless-cell structure, rotated solver model
// adjustments and shifted token distributions: a structurally similar but
// differently-optimized source domain for warm-start transfer.
EnvConfig make_transfer_variant(const EnvConfig& config);

std::vector<SyntheticTask> generate_corpus(const EnvConfig& config, int count,
                                           std::uint64_t seed);

// Immutable after corpus registration; concurrent runs with distinct rng
// streams are safe.
class SimEnvironment : public Environment {
 public:
  SimEnvironment(EnvConfig config, const VariantPool& pool);

  void register_corpus(const std::vector<SyntheticTask>& tasks);
  void register_task(const SyntheticTask& task);

  bool has_cell(const std::string& cell) const override;
  CellOutcome execute_cell(const TaskRef& task, const std::string& cell,
                           const std::string& skill, const std::string& model,
                           const Trajectory& so_far, Rng& rng) override;

  // Sampling parameters for one invocation, resolved from the planted tables.
  CellModel cell_model(TaskClass class_tag, const std::string& cell,
                       const std::string& skill, const std::string& model) const;

  // Ground-truth axis qualities. Deterministic in (trajectory, task); used by
  // simulated judges, audits, and tests — never by routing.
  AxisScores latent_quality(const Trajectory& trajectory,
                            const SyntheticTask& task) const;
  AxisScores latent_quality(const Trajectory& trajectory) const;

  PlantedOptimum planted_optimum(TaskClass class_tag) const;

  const SyntheticTask& task(const std::string& id) const;
  bool knows_task(const std::string& id) const;
  const EnvConfig& config() const { return config_; }
  const VariantPool& pool() const { return pool_; }

 private:
  SyntheticTask resolve_task(const TaskRef& ref) const;
  double partial_goal(const Trajectory& so_far, const TaskRef& task) const;
  double quality_jitter(const std::string& task_id,
                        const std::string& skill) const;

  EnvConfig config_;
  VariantPool pool_;
  std::map<std::string, AgentRole> cell_roles_;
  std::map<std::string, SyntheticTask> tasks_;
};

// Comparative scoring of a trajectory group under one judge model: latent
// quality, within-group contrast, additive bias, noise from the caller's rng.
// Noise is fanned out per trajectory id, so group order never changes scores.
std::vector<AxisScores> sim_judge(const std::vector<const Trajectory*>& group,
                                  const SimJudgeModel& judge,
                                  const SimEnvironment& env, Rng& rng);

// JudgeInterface adapter. Noise is derived from (judge id, group ids) alone:
// re-scoring an identical group reproduces identical scores, which keeps
// post-hoc audits idempotent.
class SimJudge : public JudgeInterface {
 public:
  SimJudge(SimJudgeModel model, const SimEnvironment& env);

  std::string id() const override { return model_.judge_id; }
  std::vector<AxisScores> score_group(
      const std::vector<const Trajectory*>& group) override;

 private:
  SimJudgeModel model_;
  const SimEnvironment& env_;
};

// Empty-trace stand-in at the class quality floor, the peer for live relative
// judging when no prior trajectory exists for the task.
Trajectory make_reference_trajectory(const SyntheticTask& task);

// Environment configuration and corpus files (structured text).
std::string env_config_to_document(const EnvConfig& config);
EnvConfig env_config_from_document(const std::string& text);
std::string corpus_to_document(const std::vector<SyntheticTask>& tasks);
std::vector<SyntheticTask> corpus_from_document(const std::string& text);

}  // namespace agensflow
