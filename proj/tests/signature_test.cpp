#include <set>
#include <stdexcept>

#include "agensflow/rng.hpp"
#include "agensflow/signature.hpp"
#include "doctest.h"

using namespace agensflow;

namespace {

TaskFeatures feat(double amb, double cr, double ea, double vn) {
  TaskFeatures f;
  f.ambiguity = amb;
  f.contradiction_risk = cr;
  f.evidence_availability = ea;
  f.verification_need = vn;
  return f;
}

}  // namespace

TEST_CASE("regime detection pinned examples") {
  CHECK(detect_regime(feat(0.1, 0.1, 0.9, 0.1)) == RegimeLabel::straightforward);
  CHECK(detect_regime(feat(0.2, 0.8, 0.5, 0.5)) == RegimeLabel::contradictory);
  CHECK(detect_regime(feat(0.9, 0.2, 0.1, 0.2)) == RegimeLabel::ambiguous);
  CHECK(detect_regime(feat(0.2, 0.1, 0.7, 0.5)) == RegimeLabel::evidence_heavy);
  CHECK(detect_regime(feat(0.1, 0.1, 0.5, 0.8)) == RegimeLabel::high_risk);
  CHECK(detect_regime(feat(0.5, 0.1, 0.2, 0.1)) == RegimeLabel::exploratory);
}

TEST_CASE("regime rules fire in priority order") {
  // Contradiction beats every later rule even when those also match.
  CHECK(detect_regime(feat(0.9, 0.9, 0.9, 0.9)) == RegimeLabel::contradictory);
  // High verification beats ambiguity.
  CHECK(detect_regime(feat(0.9, 0.1, 0.9, 0.9)) == RegimeLabel::high_risk);
  // Ambiguity beats evidence-heavy.
  CHECK(detect_regime(feat(0.7, 0.1, 0.9, 0.5)) == RegimeLabel::ambiguous);
  // Evidence-heavy needs both availability and a verification component.
  CHECK(detect_regime(feat(0.1, 0.1, 0.9, 0.2)) == RegimeLabel::straightforward);
  // Exploratory needs low availability alongside mid ambiguity.
  CHECK(detect_regime(feat(0.5, 0.1, 0.5, 0.1)) == RegimeLabel::straightforward);
}

TEST_CASE("regime detection is total over random features") {
  Rng rng(404);
  for (int i = 0; i < 2000; ++i) {
    auto f = feat(rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform());
    RegimeLabel r = detect_regime(f);
    CHECK_NOTHROW((void)to_string(r));
    CHECK(regime_from_string(to_string(r)) == r);
  }
}

TEST_CASE("handoff mask pinned examples") {
  HandoffState empty;
  CHECK(handoff_mask(empty) == 0);
  CHECK(mask_to_string(handoff_mask(empty)) == "0000000");

  HandoffState goal_only;
  goal_only.goal = "g";
  CHECK(mask_to_string(handoff_mask(goal_only)) == "1000000");

  HandoffState three;
  three.goal = "g";
  three.evidence.push_back("e1");
  three.draft_answer = "d";
  CHECK(mask_to_string(handoff_mask(three)) == "1010010");
}

TEST_CASE("mask string round trip covers all 128 values") {
  for (int m = 0; m < 128; ++m) {
    auto bits = mask_to_string(static_cast<std::uint8_t>(m));
    CHECK(bits.size() == 7);
    CHECK(mask_from_string(bits) == static_cast<std::uint8_t>(m));
  }
  CHECK_THROWS_AS((void)mask_from_string("101"), std::invalid_argument);
  CHECK_THROWS_AS((void)mask_from_string("10a0010"), std::invalid_argument);
}

TEST_CASE("mask bit order follows the field order") {
  HandoffState h;
  h.merged_answer = "m";
  CHECK(mask_to_string(handoff_mask(h)) == "0000001");
  h.verification = Verdict::supported;
  CHECK(mask_to_string(handoff_mask(h)) == "0000101");
  h.subproblem = "s";
  CHECK(mask_to_string(handoff_mask(h)) == "0100101");
}

TEST_CASE("belief bucketing pinned examples") {
  CHECK(bucket_belief(0.0, 5) == 0);
  CHECK(bucket_belief(1.0, 5) == 4);
  CHECK(bucket_belief(0.5, 5) == 2);
  CHECK(bucket_belief(0.19, 5) == 0);
  CHECK(bucket_belief(0.2, 5) == 1);
  CHECK(bucket_belief(0.999, 5) == 4);
  CHECK(bucket_belief(0.5, 1) == 0);
  CHECK(bucket_belief(1.0, 1) == 0);
}

TEST_CASE("belief bucketing rejects bad input") {
  CHECK_THROWS_AS((void)bucket_belief(-0.01, 5), std::invalid_argument);
  CHECK_THROWS_AS((void)bucket_belief(1.01, 5), std::invalid_argument);
  CHECK_THROWS_AS((void)bucket_belief(0.5, 0), std::invalid_argument);
  CHECK_THROWS_AS((void)bucket_belief(0.5, -3), std::invalid_argument);
}

TEST_CASE("bucketing is monotone and in range") {
  Rng rng(99);
  for (int g : {1, 2, 5, 9}) {
    for (int i = 0; i < 500; ++i) {
      double a = rng.uniform();
      double b = rng.uniform();
      if (a > b) std::swap(a, b);
      int ba = bucket_belief(a, g);
      int bb = bucket_belief(b, g);
      CHECK(ba <= bb);
      CHECK(ba >= 0);
      CHECK(bb < g);
    }
  }
}

TEST_CASE("fold pinned example: neutral state") {
  HandoffState empty;
  BeliefVector beliefs;  // all 0.5
  Signature s = fold_signature(RegimeLabel::straightforward, empty, beliefs, 5);
  CHECK(s.regime == RegimeLabel::straightforward);
  CHECK(s.handoff == 0);
  CHECK(s.buckets == std::array<std::uint8_t, 4>{2, 2, 2, 2});
  CHECK(to_string(s) == "straightforward|0000000|2,2,2,2");
}

TEST_CASE("handoff_quality never reaches the signature") {
  HandoffState h;
  h.goal = "g";
  BeliefVector a;
  BeliefVector b;
  a.handoff_quality = 0.0;
  b.handoff_quality = 1.0;
  CHECK(fold_signature(RegimeLabel::ambiguous, h, a, 5) ==
        fold_signature(RegimeLabel::ambiguous, h, b, 5));
}

TEST_CASE("folding is deterministic and order-sensitive on inputs") {
  HandoffState h;
  h.evidence = {"x", "y"};
  BeliefVector bv;
  bv.correctness = 0.9;
  bv.uncertainty = 0.1;
  Signature s1 = fold_signature(RegimeLabel::evidence_heavy, h, bv, 5);
  Signature s2 = fold_signature(RegimeLabel::evidence_heavy, h, bv, 5);
  CHECK(s1 == s2);
  CHECK(s1.buckets[0] == 4);
  CHECK(s1.buckets[1] == 0);
  Signature s3 = fold_signature(RegimeLabel::high_risk, h, bv, 5);
  CHECK(s1 != s3);
}

TEST_CASE("signature text form round trips") {
  Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    Signature s;
    s.regime = static_cast<RegimeLabel>(rng.pick(6));
    s.handoff = static_cast<std::uint8_t>(rng.pick(128));
    for (auto& b : s.buckets) b = static_cast<std::uint8_t>(rng.pick(5));
    CHECK(signature_from_string(to_string(s)) == s);
  }
  CHECK_THROWS_AS((void)signature_from_string("nonsense"), std::invalid_argument);
  CHECK_THROWS_AS((void)signature_from_string("straightforward|0000000"),
                  std::invalid_argument);
}

TEST_CASE("signature space stays within the documented bound") {
  // 6 regimes x 2^7 masks x g^4 buckets; sample widely and count distinct.
  Rng rng(2024);
  std::set<Signature> seen;
  HandoffState h;
  for (int i = 0; i < 20000; ++i) {
    h.goal = rng.bernoulli(0.5) ? std::optional<std::string>("g") : std::nullopt;
    h.subproblem =
        rng.bernoulli(0.5) ? std::optional<std::string>("s") : std::nullopt;
    h.evidence.clear();
    if (rng.bernoulli(0.5)) h.evidence.push_back("e");
    h.critique = rng.bernoulli(0.5) ? std::optional<std::string>("c") : std::nullopt;
    h.verification = rng.bernoulli(0.5)
                         ? std::optional<Verdict>(Verdict::supported)
                         : std::nullopt;
    h.draft_answer =
        rng.bernoulli(0.5) ? std::optional<std::string>("d") : std::nullopt;
    h.merged_answer =
        rng.bernoulli(0.5) ? std::optional<std::string>("m") : std::nullopt;
    BeliefVector bv;
    bv.correctness = rng.uniform();
    bv.uncertainty = rng.uniform();
    bv.contradiction_risk = rng.uniform();
    bv.evidence_sufficiency = rng.uniform();
    bv.handoff_quality = rng.uniform();
    auto regime = static_cast<RegimeLabel>(rng.pick(6));
    seen.insert(fold_signature(regime, h, bv, 3));
  }
  CHECK(seen.size() <= 6u * 128u * 3u * 3u * 3u * 3u);
  CHECK(seen.size() > 1000u);
}

TEST_CASE("initial beliefs honour the configuration") {
  BeliefVector d = init_beliefs();
  CHECK(d.correctness == 0.5);
  CHECK(d.uncertainty == 0.5);
  CHECK(d.contradiction_risk == 0.5);
  CHECK(d.evidence_sufficiency == 0.5);
  CHECK(d.handoff_quality == 0.5);

  SignatureConfig cfg;
  cfg.initial_beliefs.uncertainty = 0.3;
  BeliefVector c = init_beliefs(cfg);
  CHECK(c.uncertainty == 0.3);
  CHECK(c.correctness == 0.5);
}

TEST_CASE("belief update pinned directions per role") {
  BeliefVector b;  // all 0.5
  AgentContribution none;

  SUBCASE("planner raises handoff, lowers uncertainty") {
    AgentContribution planned;
    planned.subproblem_set = true;
    BeliefVector r = apply_contribution(b, AgentRole::planner, planned);
    CHECK(r.handoff_quality == doctest::Approx(0.60).epsilon(1e-12));
    CHECK(r.uncertainty == doctest::Approx(0.45).epsilon(1e-12));
    CHECK(r.correctness == 0.5);
  }

  SUBCASE("memory scales with evidence items and caps") {
    AgentContribution two;
    two.evidence_items = 2;
    BeliefVector r = apply_contribution(b, AgentRole::memory, two);
    CHECK(r.evidence_sufficiency == doctest::Approx(0.60).epsilon(1e-12));
    AgentContribution many;
    many.evidence_items = 50;
    BeliefVector m = apply_contribution(b, AgentRole::memory, many);
    CHECK(m.evidence_sufficiency == doctest::Approx(0.70).epsilon(1e-12));
    CHECK(m.uncertainty == doctest::Approx(0.45).epsilon(1e-12));
    CHECK(m.handoff_quality == doctest::Approx(0.55).epsilon(1e-12));
  }

  SUBCASE("memory with zero items leaves evidence untouched") {
    BeliefVector r = apply_contribution(b, AgentRole::memory, none);
    CHECK(r.evidence_sufficiency == 0.5);
  }

  SUBCASE("solver moves correctness, uncertainty, handoff") {
    AgentContribution drafted;
    drafted.draft_produced = true;
    BeliefVector r = apply_contribution(b, AgentRole::solver, drafted);
    CHECK(r.correctness == doctest::Approx(0.65).epsilon(1e-12));
    CHECK(r.uncertainty == doctest::Approx(0.40).epsilon(1e-12));
    CHECK(r.handoff_quality == doctest::Approx(0.60).epsilon(1e-12));
  }

  SUBCASE("critic raises contradiction awareness and uncertainty") {
    AgentContribution critiqued;
    critiqued.critique_produced = true;
    BeliefVector r = apply_contribution(b, AgentRole::critic, critiqued);
    CHECK(r.contradiction_risk == doctest::Approx(0.60).epsilon(1e-12));
    CHECK(r.uncertainty == doctest::Approx(0.53).epsilon(1e-12));
  }

  SUBCASE("verifier verdicts branch three ways") {
    AgentContribution sup;
    sup.verdict = Verdict::supported;
    BeliefVector rs = apply_contribution(b, AgentRole::verifier, sup);
    CHECK(rs.correctness == doctest::Approx(0.65).epsilon(1e-12));
    CHECK(rs.uncertainty == doctest::Approx(0.40).epsilon(1e-12));
    CHECK(rs.contradiction_risk == doctest::Approx(0.40).epsilon(1e-12));
    CHECK(rs.evidence_sufficiency == doctest::Approx(0.60).epsilon(1e-12));

    AgentContribution ref;
    ref.verdict = Verdict::refuted;
    BeliefVector rr = apply_contribution(b, AgentRole::verifier, ref);
    CHECK(rr.correctness == doctest::Approx(0.35).epsilon(1e-12));
    CHECK(rr.uncertainty == doctest::Approx(0.60).epsilon(1e-12));
    CHECK(rr.contradiction_risk == doctest::Approx(0.60).epsilon(1e-12));

    AgentContribution inc;
    inc.verdict = Verdict::inconclusive;
    BeliefVector ri = apply_contribution(b, AgentRole::verifier, inc);
    CHECK(ri.uncertainty == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(ri.correctness == 0.5);
  }

  SUBCASE("synthesiser consolidates") {
    AgentContribution merged;
    merged.merged_produced = true;
    BeliefVector r = apply_contribution(b, AgentRole::synthesiser, merged);
    CHECK(r.correctness == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(r.handoff_quality == doctest::Approx(0.60).epsilon(1e-12));
    CHECK(r.uncertainty == doctest::Approx(0.45).epsilon(1e-12));
  }

  SUBCASE("evaluator is the identity on beliefs") {
    BeliefVector r = apply_contribution(b, AgentRole::evaluator, none);
    CHECK(r.correctness == b.correctness);
    CHECK(r.uncertainty == b.uncertainty);
    CHECK(r.contradiction_risk == b.contradiction_risk);
    CHECK(r.evidence_sufficiency == b.evidence_sufficiency);
    CHECK(r.handoff_quality == b.handoff_quality);
  }
}

TEST_CASE("belief updates clamp to the unit interval") {
  BeliefVector b;
  b.correctness = 0.95;
  b.uncertainty = 0.02;
  AgentContribution c;
  c.draft_produced = true;
  for (int i = 0; i < 10; ++i) {
    b = apply_contribution(b, AgentRole::solver, c);
    CHECK(b.correctness <= 1.0);
    CHECK(b.uncertainty >= 0.0);
  }
  CHECK(b.correctness == 1.0);
  CHECK(b.uncertainty == 0.0);

  BeliefVector lo;
  lo.correctness = 0.05;
  AgentContribution ref;
  ref.verdict = Verdict::refuted;
  lo = apply_contribution(lo, AgentRole::verifier, ref);
  CHECK(lo.correctness == 0.0);
}

TEST_CASE("enum string helpers reject unknown names") {
  CHECK_THROWS_AS((void)regime_from_string("bogus"), std::invalid_argument);
  CHECK_THROWS_AS((void)task_class_from_string("C9"), std::invalid_argument);
  CHECK_THROWS_AS((void)verdict_from_string("maybe"), std::invalid_argument);
  CHECK_THROWS_AS((void)role_from_string("wizard"), std::invalid_argument);
  for (auto c : {TaskClass::C1, TaskClass::C4, TaskClass::C8}) {
    CHECK(task_class_from_string(to_string(c)) == c);
  }
  for (auto r : {AgentRole::planner, AgentRole::verifier, AgentRole::evaluator}) {
    CHECK(role_from_string(to_string(r)) == r);
  }
}
