#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace agensflow {

enum class RegimeLabel {
  straightforward,
  evidence_heavy,
  ambiguous,
  contradictory,
  high_risk,
  exploratory,
};

enum class TaskClass { C1, C2, C3, C4, C5, C6, C7, C8 };

enum class Verdict { supported, refuted, inconclusive };

enum class AgentRole {
  planner,
  memory,
  solver,
  critic,
  verifier,
  synthesiser,
  evaluator,
};

std::string to_string(RegimeLabel r);
RegimeLabel regime_from_string(const std::string& s);
std::string to_string(TaskClass c);
TaskClass task_class_from_string(const std::string& s);
std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);
std::string to_string(AgentRole r);
AgentRole role_from_string(const std::string& s);

// Scalar descriptors of a task, each in [0, 1]. class_tag rides along for
// evaluation bookkeeping only; routing never reads it.
struct TaskFeatures {
  double ambiguity = 0.0;
  double contradiction_risk = 0.0;
  double evidence_availability = 0.0;
  double verification_need = 0.0;
  TaskClass class_tag = TaskClass::C1;
};

// Thresholds for regime detection. Rules are checked in priority order.
struct RegimeRules {
  double contradictory_risk = 0.6;
  double high_risk_verification = 0.7;
  double ambiguous_ambiguity = 0.6;
  double evidence_heavy_availability = 0.6;
  double evidence_heavy_verification = 0.3;
  double exploratory_ambiguity = 0.4;
  double exploratory_availability = 0.4;
};

RegimeLabel detect_regime(const TaskFeatures& f, const RegimeRules& rules = {});

// Blackboard shared between agent cells. Presence of each field is what the
// signature folds over; content never matters to routing.
struct HandoffState {
  std::optional<std::string> goal;
  std::optional<std::string> subproblem;
  std::vector<std::string> evidence;
  std::optional<std::string> critique;
  std::optional<Verdict> verification;
  std::optional<std::string> draft_answer;
  std::optional<std::string> merged_answer;
};

inline constexpr int kHandoffFieldCount = 7;
extern const std::array<const char*, kHandoffFieldCount> kHandoffFieldNames;

// Bit (6 - i) holds field i, so the binary rendering reads in field order:
// goal, subproblem, evidence, critique, verification, draft_answer, merged_answer.
std::uint8_t handoff_mask(const HandoffState& h);
std::string mask_to_string(std::uint8_t mask);
std::uint8_t mask_from_string(const std::string& bits);

struct BeliefVector {
  double correctness = 0.5;
  double uncertainty = 0.5;
  double contradiction_risk = 0.5;
  double evidence_sufficiency = 0.5;
  double handoff_quality = 0.5;  // tracked for dynamics, excluded from folding
};

// floor(value * granularity) with the closed top end folded into the last
// bucket. Throws std::invalid_argument outside [0, 1] or granularity < 1.
int bucket_belief(double value, int granularity);

// Folded coordination state: the key of the policy graph.
struct Signature {
  RegimeLabel regime = RegimeLabel::straightforward;
  std::uint8_t handoff = 0;
  std::array<std::uint8_t, 4> buckets{};  // correctness, uncertainty,
                                          // contradiction_risk, evidence_sufficiency

  auto operator<=>(const Signature&) const = default;
};

Signature fold_signature(RegimeLabel regime, const HandoffState& handoff,
                         const BeliefVector& beliefs, int granularity = 5);

// Canonical text form: "<regime>|<mask bits>|<b0>,<b1>,<b2>,<b3>".
std::string to_string(const Signature& s);
Signature signature_from_string(const std::string& text);

// What one cell execution changed on the blackboard, as seen by the belief
// update. Magnitudes come from the delta table, not from the contribution.
struct AgentContribution {
  bool subproblem_set = false;
  int evidence_items = 0;
  bool draft_produced = false;
  bool critique_produced = false;
  std::optional<Verdict> verdict;
  bool merged_produced = false;
};

// Fixed per-role deltas. All results are clamped to [0, 1].
struct BeliefDeltaTable {
  double planner_handoff = 0.10;
  double planner_uncertainty = -0.05;
  double memory_evidence_per_item = 0.05;
  double memory_evidence_cap = 0.20;
  double memory_uncertainty = -0.05;
  double memory_handoff = 0.05;
  double solver_correctness = 0.15;
  double solver_uncertainty = -0.10;
  double solver_handoff = 0.10;
  double critic_contradiction = 0.10;
  double critic_uncertainty = 0.03;
  double verifier_supported_correctness = 0.15;
  double verifier_supported_uncertainty = -0.10;
  double verifier_supported_contradiction = -0.10;
  double verifier_supported_evidence = 0.10;
  double verifier_refuted_correctness = -0.15;
  double verifier_refuted_uncertainty = 0.10;
  double verifier_refuted_contradiction = 0.10;
  double verifier_inconclusive_uncertainty = 0.05;
  double synthesiser_correctness = 0.05;
  double synthesiser_handoff = 0.10;
  double synthesiser_uncertainty = -0.05;
};

BeliefVector apply_contribution(const BeliefVector& beliefs, AgentRole role,
                                const AgentContribution& contribution,
                                const BeliefDeltaTable& table = {});

struct SignatureConfig {
  int granularity = 5;
  BeliefVector initial_beliefs;  // all components default to 0.5
  RegimeRules regime_rules;
  BeliefDeltaTable belief_deltas;
};

BeliefVector init_beliefs(const SignatureConfig& cfg = {});

}  // namespace agensflow
