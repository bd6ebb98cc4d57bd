#include "agensflow/signature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace agensflow {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

[[noreturn]] void bad(const std::string& what) {
  throw std::invalid_argument(what);
}

}  // namespace

std::string to_string(RegimeLabel r) {
  switch (r) {
    case RegimeLabel::straightforward: return "straightforward";
    case RegimeLabel::evidence_heavy: return "evidence_heavy";
    case RegimeLabel::ambiguous: return "ambiguous";
    case RegimeLabel::contradictory: return "contradictory";
    case RegimeLabel::high_risk: return "high_risk";
    case RegimeLabel::exploratory: return "exploratory";
  }
  bad("unknown regime value");
}

RegimeLabel regime_from_string(const std::string& s) {
  if (s == "straightforward") return RegimeLabel::straightforward;
  if (s == "evidence_heavy") return RegimeLabel::evidence_heavy;
  if (s == "ambiguous") return RegimeLabel::ambiguous;
  if (s == "contradictory") return RegimeLabel::contradictory;
  if (s == "high_risk") return RegimeLabel::high_risk;
  if (s == "exploratory") return RegimeLabel::exploratory;
  bad("unknown regime label: " + s);
}

std::string to_string(TaskClass c) {
  switch (c) {
    case TaskClass::C1: return "C1";
    case TaskClass::C2: return "C2";
    case TaskClass::C3: return "C3";
    case TaskClass::C4: return "C4";
    case TaskClass::C5: return "C5";
    case TaskClass::C6: return "C6";
    case TaskClass::C7: return "C7";
    case TaskClass::C8: return "C8";
  }
  bad("unknown task class value");
}

TaskClass task_class_from_string(const std::string& s) {
  if (s.size() == 2 && s[0] == 'C' && s[1] >= '1' && s[1] <= '8') {
    return static_cast<TaskClass>(s[1] - '1');
  }
  bad("unknown task class: " + s);
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::supported: return "supported";
    case Verdict::refuted: return "refuted";
    case Verdict::inconclusive: return "inconclusive";
  }
  bad("unknown verdict value");
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "supported") return Verdict::supported;
  if (s == "refuted") return Verdict::refuted;
  if (s == "inconclusive") return Verdict::inconclusive;
  bad("unknown verdict: " + s);
}

std::string to_string(AgentRole r) {
  switch (r) {
    case AgentRole::planner: return "planner";
    case AgentRole::memory: return "memory";
    case AgentRole::solver: return "solver";
    case AgentRole::critic: return "critic";
    case AgentRole::verifier: return "verifier";
    case AgentRole::synthesiser: return "synthesiser";
    case AgentRole::evaluator: return "evaluator";
  }
  bad("unknown role value");
}

AgentRole role_from_string(const std::string& s) {
  if (s == "planner") return AgentRole::planner;
  if (s == "memory") return AgentRole::memory;
  if (s == "solver") return AgentRole::solver;
  if (s == "critic") return AgentRole::critic;
  if (s == "verifier") return AgentRole::verifier;
  if (s == "synthesiser") return AgentRole::synthesiser;
  if (s == "evaluator") return AgentRole::evaluator;
  bad("unknown role: " + s);
}

RegimeLabel detect_regime(const TaskFeatures& f, const RegimeRules& rules) {
  for (double v : {f.ambiguity, f.contradiction_risk, f.evidence_availability,
                   f.verification_need}) {
    if (!(v >= 0.0 && v <= 1.0)) bad("task feature outside [0, 1]");
  }
  // Priority order; first rule that fires wins.
  if (f.contradiction_risk >= rules.contradictory_risk) {
    return RegimeLabel::contradictory;
  }
  if (f.verification_need >= rules.high_risk_verification) {
    return RegimeLabel::high_risk;
  }
  if (f.ambiguity >= rules.ambiguous_ambiguity) return RegimeLabel::ambiguous;
  if (f.evidence_availability >= rules.evidence_heavy_availability &&
      f.verification_need >= rules.evidence_heavy_verification) {
    return RegimeLabel::evidence_heavy;
  }
  if (f.ambiguity >= rules.exploratory_ambiguity &&
      f.evidence_availability < rules.exploratory_availability) {
    return RegimeLabel::exploratory;
  }
  return RegimeLabel::straightforward;
}

const std::array<const char*, kHandoffFieldCount> kHandoffFieldNames = {
    "goal",         "subproblem",   "evidence",     "critique",
    "verification", "draft_answer", "merged_answer"};

std::uint8_t handoff_mask(const HandoffState& h) {
  const std::array<bool, kHandoffFieldCount> present = {
      h.goal.has_value(),         h.subproblem.has_value(),
      !h.evidence.empty(),        h.critique.has_value(),
      h.verification.has_value(), h.draft_answer.has_value(),
      h.merged_answer.has_value()};
  std::uint8_t mask = 0;
  for (int i = 0; i < kHandoffFieldCount; ++i) {
    if (present[i]) mask |= std::uint8_t(1u << (kHandoffFieldCount - 1 - i));
  }
  return mask;
}

std::string mask_to_string(std::uint8_t mask) {
  if (mask >= (1u << kHandoffFieldCount)) bad("handoff mask out of range");
  std::string bits(kHandoffFieldCount, '0');
  for (int i = 0; i < kHandoffFieldCount; ++i) {
    if (mask & (1u << (kHandoffFieldCount - 1 - i))) bits[i] = '1';
  }
  return bits;
}

std::uint8_t mask_from_string(const std::string& bits) {
  if (bits.size() != kHandoffFieldCount) bad("handoff mask needs 7 bits");
  std::uint8_t mask = 0;
  for (int i = 0; i < kHandoffFieldCount; ++i) {
    if (bits[i] == '1') {
      mask |= std::uint8_t(1u << (kHandoffFieldCount - 1 - i));
    } else if (bits[i] != '0') {
      bad("handoff mask must be 0/1 characters");
    }
  }
  return mask;
}

BeliefVector init_beliefs(const SignatureConfig& cfg) {
  const BeliefVector& b = cfg.initial_beliefs;
  for (double v : {b.correctness, b.uncertainty, b.contradiction_risk,
                   b.evidence_sufficiency, b.handoff_quality}) {
    if (!(v >= 0.0 && v <= 1.0)) bad("initial belief outside [0, 1]");
  }
  return b;
}

int bucket_belief(double value, int granularity) {
  if (granularity < 1) bad("granularity must be >= 1");
  if (!(value >= 0.0 && value <= 1.0)) bad("belief outside [0, 1]");
  if (value >= 1.0) return granularity - 1;  // closed top end
  return static_cast<int>(std::floor(value * granularity));
}

Signature fold_signature(RegimeLabel regime, const HandoffState& handoff,
                         const BeliefVector& beliefs, int granularity) {
  Signature s;
  s.regime = regime;
  s.handoff = handoff_mask(handoff);
  s.buckets = {
      static_cast<std::uint8_t>(bucket_belief(beliefs.correctness, granularity)),
      static_cast<std::uint8_t>(bucket_belief(beliefs.uncertainty, granularity)),
      static_cast<std::uint8_t>(
          bucket_belief(beliefs.contradiction_risk, granularity)),
      static_cast<std::uint8_t>(
          bucket_belief(beliefs.evidence_sufficiency, granularity)),
  };
  return s;
}

std::string to_string(const Signature& s) {
  std::ostringstream out;
  out << to_string(s.regime) << '|' << mask_to_string(s.handoff) << '|'
      << int(s.buckets[0]) << ',' << int(s.buckets[1]) << ','
      << int(s.buckets[2]) << ',' << int(s.buckets[3]);
  return out.str();
}

Signature signature_from_string(const std::string& text) {
  auto p1 = text.find('|');
  auto p2 = text.find('|', p1 == std::string::npos ? p1 : p1 + 1);
  if (p1 == std::string::npos || p2 == std::string::npos) {
    bad("signature text needs two '|' separators: " + text);
  }
  Signature s;
  s.regime = regime_from_string(text.substr(0, p1));
  s.handoff = mask_from_string(text.substr(p1 + 1, p2 - p1 - 1));
  std::istringstream rest(text.substr(p2 + 1));
  for (int i = 0; i < 4; ++i) {
    int v = -1;
    char sep = ',';
    if (!(rest >> v) || v < 0 || v > 255 || (i < 3 && !(rest >> sep))) {
      bad("signature text has malformed buckets: " + text);
    }
    s.buckets[i] = static_cast<std::uint8_t>(v);
  }
  return s;
}

BeliefVector apply_contribution(const BeliefVector& beliefs, AgentRole role,
                                const AgentContribution& c,
                                const BeliefDeltaTable& t) {
  if (c.evidence_items < 0) bad("evidence_items must be >= 0");
  BeliefVector b = beliefs;
  switch (role) {
    case AgentRole::planner:
      if (c.subproblem_set) {
        b.handoff_quality += t.planner_handoff;
        b.uncertainty += t.planner_uncertainty;
      }
      break;
    case AgentRole::memory:
      if (c.evidence_items > 0) {
        b.evidence_sufficiency +=
            std::min(t.memory_evidence_per_item * c.evidence_items,
                     t.memory_evidence_cap);
        b.uncertainty += t.memory_uncertainty;
        b.handoff_quality += t.memory_handoff;
      }
      break;
    case AgentRole::solver:
      if (c.draft_produced) {
        b.correctness += t.solver_correctness;
        b.uncertainty += t.solver_uncertainty;
        b.handoff_quality += t.solver_handoff;
      }
      break;
    case AgentRole::critic:
      if (c.critique_produced) {
        b.contradiction_risk += t.critic_contradiction;
        b.uncertainty += t.critic_uncertainty;
      }
      break;
    case AgentRole::verifier:
      if (c.verdict) {
        switch (*c.verdict) {
          case Verdict::supported:
            b.correctness += t.verifier_supported_correctness;
            b.uncertainty += t.verifier_supported_uncertainty;
            b.contradiction_risk += t.verifier_supported_contradiction;
            b.evidence_sufficiency += t.verifier_supported_evidence;
            break;
          case Verdict::refuted:
            b.correctness += t.verifier_refuted_correctness;
            b.uncertainty += t.verifier_refuted_uncertainty;
            b.contradiction_risk += t.verifier_refuted_contradiction;
            break;
          case Verdict::inconclusive:
            b.uncertainty += t.verifier_inconclusive_uncertainty;
            break;
        }
      }
      break;
    case AgentRole::synthesiser:
      if (c.merged_produced) {
        b.correctness += t.synthesiser_correctness;
        b.handoff_quality += t.synthesiser_handoff;
        b.uncertainty += t.synthesiser_uncertainty;
      }
      break;
    case AgentRole::evaluator:
      break;  // assessment only, never moves beliefs
  }
  b.correctness = clamp01(b.correctness);
  b.uncertainty = clamp01(b.uncertainty);
  b.contradiction_risk = clamp01(b.contradiction_risk);
  b.evidence_sufficiency = clamp01(b.evidence_sufficiency);
  b.handoff_quality = clamp01(b.handoff_quality);
  return b;
}

}  // namespace agensflow
