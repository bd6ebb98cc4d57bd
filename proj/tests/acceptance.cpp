// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria cover formula exactness, learning behaviour in the
// planted environment, persistence, determinism, and the invariant suite.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "agensflow/experiments.hpp"

using namespace agensflow;
namespace fs = std::filesystem;

namespace {

struct Gate {
  int failures = 0;
  int index = 0;

  void report(const std::string& name, bool pass, double seconds,
              const std::string& detail) {
    ++index;
    std::printf("%s  criterion %2d  %-28s  [%6.2fs]  %s\n",
                pass ? "PASS" : "FAIL", index, name.c_str(), seconds,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }

  void run(const std::string& name,
           const std::function<std::pair<bool, std::string>()>& body) {
    auto start = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
      auto r = body();
      pass = r.first;
      detail = r.second;
    } catch (const std::exception& e) {
      pass = false;
      detail = std::string("exception: ") + e.what();
    }
    double seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    report(name, pass, seconds, detail);
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// (arm, epoch, task) -> audited scalar.
using AuditIndex = std::map<std::string, std::map<int, std::map<std::string, double>>>;

AuditIndex index_audit(const AuditTable& table) {
  AuditIndex idx;
  for (const auto& row : table.rows) {
    idx[row.arm][row.epoch][row.task_id] = row.scalar;
  }
  return idx;
}

// Plateau mean of per-epoch audited hybrid rewards: audited quality combined
// with the tokens and retries the arm actually spent. The baseline's single
// pass supplies its cost at every anchored epoch.
double audited_plateau_reward(const ProtocolResult& run, const std::string& arm,
                              const AuditIndex& idx) {
  const ArmResult* a = run.find_arm(arm);
  if (a == nullptr) throw std::runtime_error("arm missing: " + arm);
  std::map<std::pair<int, std::string>, const Trajectory*> trajs;
  for (const auto& t : a->trajectories) trajs[{t.epoch, t.task_id}] = &t;
  int epochs = run.options.epochs;
  std::vector<double> per_epoch;
  for (int e = 1; e <= epochs; ++e) {
    const auto& era = idx.at(arm);
    auto it = era.find(e);
    if (it == era.end()) throw std::runtime_error("no audit rows for epoch");
    double sum = 0.0;
    int n = 0;
    for (const auto& [task_id, scalar] : it->second) {
      int traj_epoch = a->config.epochs >= e ? e : 1;
      const Trajectory* t = trajs.at({traj_epoch, task_id});
      sum += hybrid_reward(scalar, t->token_total, t->retry_count,
                           run.config.reward.weights);
      ++n;
    }
    per_epoch.push_back(sum / n);
  }
  return plateau_mean(per_epoch);
}

double plateau_tokens(const ProtocolResult& run, const std::string& arm) {
  const ArmResult* a = run.find_arm(arm);
  std::vector<double> tokens;
  for (const auto& row : a->epochs) tokens.push_back(row.mean_tokens);
  return plateau_mean(tokens);
}

long long cumulative_tokens(const ArmResult& arm, int through_epoch) {
  long long sum = 0;
  for (const auto& t : arm.trajectories) {
    if (t.epoch <= through_epoch) sum += t.token_total;
  }
  return sum;
}

// Skip statistics pooled over (class, cell) pairs at plateau epochs.
struct SkipPool {
  double rate_sum = 0.0;
  int pairs = 0;
  double pooled() const { return pairs == 0 ? 0.0 : rate_sum / pairs; }
};

std::map<std::pair<TaskClass, std::string>, std::pair<int, int>> skip_counts(
    const ArmResult& arm, int from_epoch, int to_epoch) {
  std::map<std::pair<TaskClass, std::string>, std::pair<int, int>> counts;
  for (const auto& t : arm.trajectories) {
    if (t.epoch < from_epoch || t.epoch > to_epoch) continue;
    for (const auto& e : t.events) {
      auto& c = counts[{t.class_tag, e.cell}];
      if (e.action.kind == ActionId::Kind::skip) {
        c.first += 1;
      } else {
        c.second += 1;
      }
    }
  }
  return counts;
}

const std::array<const char*, 7> kPlanOrder = {
    "planner", "memory", "web_search_a", "web_search_b",
    "solver",  "verifier", "evaluator"};

}  // namespace

int main() {
  Gate gate;
  std::printf("acceptance gate: coordination-policy substrate\n");

  // ---- 1. Annealing exactness -------------------------------------------
  gate.run("annealing exactness", [] {
    bool ok = close(anneal_exploration(0), 1.4, 1e-12) &&
              close(anneal_exploration(50), 0.7, 1e-12) &&
              close(anneal_exploration(100), 0.5, 1e-12);
    return std::make_pair(ok, "c(0)=" + fmt(anneal_exploration(0)) +
                                  " c(50)=" + fmt(anneal_exploration(50)) +
                                  " c(100)=" + fmt(anneal_exploration(100)));
  });

  // ---- 2. Selection-score exactness --------------------------------------
  gate.run("selection-score exactness", [] {
    Rng rng(9001);
    double worst = 0.0;
    for (int i = 0; i < 40; ++i) {
      EdgeStats e;
      e.visits = 0.5 + rng.uniform(0.0, 60.0);
      e.mean_reward = rng.uniform(-1.0, 1.0);
      e.attempt_count = 1 + rng.pick(16);
      e.failure_count = rng.pick(static_cast<std::size_t>(e.attempt_count) + 1);
      double ns = rng.uniform(0.0, 500.0);
      double lambda = rng.uniform(0.0, 2.0);
      double want =
          e.mean_reward +
          std::max(0.5, 1.4 * std::pow(2.0, -ns / 50.0)) *
              std::sqrt(std::log(ns + 1.0) / e.visits) -
          lambda * (static_cast<double>(e.failure_count) / e.attempt_count);
      worst = std::max(worst, std::abs(ucb_score(e, ns, lambda) - want));
    }
    EdgeStats fresh;
    bool inf_ok = std::isinf(ucb_score(fresh, 123.0, 0.5)) &&
                  ucb_score(fresh, 123.0, 0.5) > 0;

    EdgeStats clean;
    clean.visits = 4;
    clean.mean_reward = 0.6;
    clean.attempt_count = 10;
    clean.failure_count = 0;
    EdgeStats failing = clean;
    failing.failure_count = 10;
    double gap = ucb_score(clean, 30.0, 0.5) - ucb_score(failing, 30.0, 0.5);
    bool lambda_ok = close(gap, 0.5, 1e-12);

    bool ok = worst <= 1e-9 && inf_ok && lambda_ok;
    return std::make_pair(ok, "max-dev=" + fmt(worst) + " f-gap=" + fmt(gap));
  });

  // ---- 3. Reward exactness -----------------------------------------------
  gate.run("reward exactness", [] {
    double a = hybrid_reward(0.8, 4000, 1);
    double b = hybrid_reward(1.0, 8000, 0);
    bool ok = close(a, 0.5, 1e-12) && close(b, 0.7, 1e-12);
    return std::make_pair(ok, "r(0.8,4000,1)=" + fmt(a) +
                                  " r(1.0,8000,0)=" + fmt(b));
  });

  // ---- 4. Bandit convergence ---------------------------------------------
  gate.run("bandit convergence", [] {
    int passing = 0;
    std::string freqs;
    for (std::uint64_t seed : {11ull, 22ull, 33ull, 44ull, 55ull}) {
      PolicyGraph g;
      Rng policy_rng(seed);
      Rng noise_rng(Rng::combine(seed, 17));
      Signature s;
      ActionId hi = ActionId::invoke("hi", "m");
      ActionId lo = ActionId::invoke("lo", "m");
      int late_optimal = 0;
      for (int t = 1; t <= 500; ++t) {
        ActionId a = g.select_action(s, {hi, lo}, policy_rng, 0.5);
        double mean = (a == hi) ? 0.80 : 0.45;
        g.backup({{s, a}}, mean + noise_rng.normal(0.0, 0.05), 1.0);
        if (t >= 401 && a == hi) ++late_optimal;
      }
      double freq = late_optimal / 100.0;
      freqs += fmt(freq) + " ";
      if (freq >= 0.9) ++passing;
    }
    return std::make_pair(passing >= 4,
                          "seeds passing=" + std::to_string(passing) +
                              "/5 freq=[" + freqs + "]");
  });

  // ---- Shared protocol runs for criteria 5-9 -----------------------------
  std::vector<ProtocolResult> runs;
  double protocol_seconds = 0.0;
  std::string protocol_error;
  {
    auto start = std::chrono::steady_clock::now();
    try {
      ProtocolOptions full;
      full.seed = 7;
      runs.push_back(run_protocol(full));
      protocol_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();
      for (std::uint64_t seed : {11ull, 23ull, 41ull, 61ull}) {
        ProtocolOptions three;
        three.arms = {kArmBaseline, kArmMain, kArmWarmStart};
        three.seed = seed;
        runs.push_back(run_protocol(three));
      }
    } catch (const std::exception& e) {
      protocol_error = e.what();
    }
  }

  // ---- 5. Skip learning at plateau ---------------------------------------
  gate.run("skip learning", [&]() -> std::pair<bool, std::string> {
    if (!protocol_error.empty()) return {false, protocol_error};
    const ProtocolResult& run = runs[0];
    SimEnvironment env(run.env_config, run.config.router.pool);
    env.register_corpus(run.corpus);
    const ArmResult* main_arm = run.find_arm(kArmMain);
    int epochs = run.options.epochs;
    auto counts = skip_counts(*main_arm, epochs - 2, epochs);

    SkipPool neutral;
    SkipPool critical;
    const std::set<TaskClass> heavy = {TaskClass::C3, TaskClass::C4,
                                       TaskClass::C8};
    for (int ci = 0; ci < 8; ++ci) {
      TaskClass c = static_cast<TaskClass>(ci);
      PlantedOptimum opt = env.planted_optimum(c);
      for (const auto& cell : opt.skip_neutral_cells) {
        auto it = counts.find({c, cell});
        if (it == counts.end()) continue;
        int skips = it->second.first;
        int total = skips + it->second.second;
        if (total == 0) continue;
        neutral.rate_sum += static_cast<double>(skips) / total;
        neutral.pairs += 1;
      }
      if (heavy.count(c) == 0) continue;
      for (const char* cell : kPlanOrder) {
        if (opt.skip_neutral_cells.count(cell) > 0) continue;
        auto it = counts.find({c, cell});
        if (it == counts.end()) continue;
        int skips = it->second.first;
        int total = skips + it->second.second;
        if (total == 0) continue;
        critical.rate_sum += static_cast<double>(skips) / total;
        critical.pairs += 1;
      }
    }
    bool ok = neutral.pairs > 0 && critical.pairs > 0 &&
              neutral.pooled() >= 0.8 && critical.pooled() <= 0.2 &&
              protocol_seconds < 300.0;
    return {ok, "neutral=" + fmt(neutral.pooled()) +
                    " critical=" + fmt(critical.pooled()) + " protocol=" +
                    fmt(protocol_seconds) + "s"};
  });

  // ---- 6. Substrate vs baseline ------------------------------------------
  gate.run("substrate vs baseline", [&]() -> std::pair<bool, std::string> {
    if (!protocol_error.empty()) return {false, protocol_error};
    int passing = 0;
    std::string deltas;
    for (const auto& run : runs) {
      AuditIndex idx = index_audit(run.audit);
      double main_r = audited_plateau_reward(run, kArmMain, idx);
      double base_r = audited_plateau_reward(run, kArmBaseline, idx);
      bool reward_ok = main_r - base_r >= 0.03;

      auto rows = per_class_report(run.audit, kArmMain, kArmBaseline,
                                   run.options.epochs);
      bool classes_ok = true;
      for (TaskClass c : {TaskClass::C3, TaskClass::C7, TaskClass::C8}) {
        for (const auto& row : rows) {
          if (row.class_tag != c) continue;
          if (!row.present || row.delta <= 0.0) classes_ok = false;
        }
      }
      deltas += fmt(main_r - base_r) + " ";
      if (reward_ok && classes_ok) ++passing;
    }
    return {passing >= 4, "seeds passing=" + std::to_string(passing) +
                              "/5 reward-deltas=[" + deltas + "]"};
  });

  // ---- 7. No-skip ablation ------------------------------------------------
  gate.run("no-skip token ablation", [&]() -> std::pair<bool, std::string> {
    if (!protocol_error.empty()) return {false, protocol_error};
    const ProtocolResult& run = runs[0];
    double no_skip = plateau_tokens(run, kArmNoSkip);
    double main_t = plateau_tokens(run, kArmMain);
    bool ok = no_skip >= 1.2 * main_t;
    return {ok, "no_skip=" + fmt(no_skip) + " main=" + fmt(main_t) +
                    " ratio=" + fmt(no_skip / main_t)};
  });

  // ---- 8. Warm-start transfer ---------------------------------------------
  gate.run("warm-start transfer", [&]() -> std::pair<bool, std::string> {
    if (!protocol_error.empty()) return {false, protocol_error};
    int passing = 0;
    std::string details;
    for (const auto& run : runs) {
      const ArmResult* cold = run.find_arm(kArmMain);
      const ArmResult* warm = run.find_arm(kArmWarmStart);
      long long cold_tokens = cumulative_tokens(*cold, 2);
      long long warm_tokens = cumulative_tokens(*warm, 2);
      bool tokens_ok =
          warm_tokens <= static_cast<long long>(0.95 * cold_tokens);

      double cold_q = plateau_mean(
          run.audit.arm_epoch_series(kArmMain, run.options.epochs));
      double warm_q = plateau_mean(
          run.audit.arm_epoch_series(kArmWarmStart, run.options.epochs));
      bool quality_ok = std::abs(warm_q - cold_q) <= 0.02;

      details += fmt(static_cast<double>(warm_tokens) / cold_tokens) + "/" +
                 fmt(warm_q - cold_q) + " ";
      if (tokens_ok && quality_ok) ++passing;
    }
    return {passing >= 4, "seeds passing=" + std::to_string(passing) +
                              "/5 ratio/qdelta=[" + details + "]"};
  });

  // ---- 9. Judge-sensitivity audit -----------------------------------------
  gate.run("judge-sensitivity audit", [&]() -> std::pair<bool, std::string> {
    if (!protocol_error.empty()) return {false, protocol_error};
    double gap_sum = 0.0;
    int n = 0;
    for (const auto& run : runs) {
      SimEnvironment env(run.env_config, run.config.router.pool);
      env.register_corpus(run.corpus);
      std::vector<const ArmResult*> arms{run.find_arm(kArmMain),
                                         run.find_arm(kArmWarmStart)};
      auto delta_under = [&](const std::vector<std::string>& judges) {
        AuditTable t = audit(arms, env, judges, run.config);
        auto warm = t.arm_epoch_series(kArmWarmStart, run.options.epochs);
        auto cold = t.arm_epoch_series(kArmMain, run.options.epochs);
        double sum = 0.0;
        for (std::size_t i = 0; i < warm.size(); ++i) sum += warm[i] - cold[i];
        return sum / warm.size();
      };
      double single = delta_under({run.config.reward.bias_probe_judge});
      double ensemble = delta_under({run.config.reward.bias_probe_judge,
                                     "judge_audit_a", "judge_audit_b"});
      gap_sum += single - ensemble;
      ++n;
    }
    double mean_gap = gap_sum / n;
    return {mean_gap >= 0.02,
            "mean(single-ensemble)=" + fmt(mean_gap) + " over " +
                std::to_string(n) + " seeds"};
  });

  // ---- 10. Retry formula ---------------------------------------------------
  gate.run("retry formula", [] {
    double v = retry_pipeline_success(0.5, 2, 2);
    bool ok = v == 0.5625 && retry_pipeline_success(0.0, 3, 4) == 0.0 &&
              retry_pipeline_success(1.0, 3, 4) == 1.0;
    return std::make_pair(ok, "s(0.5,2,2)=" + fmt(v));
  });

  // ---- 11. Persistence ------------------------------------------------------
  gate.run("persistence round trip", [] {
    PolicyGraph g;
    Rng rng(500);
    std::vector<ActionId> legal;
    for (const char* sk : {"a", "b", "d"}) {
      legal.push_back(ActionId::invoke(sk, "m"));
    }
    legal.push_back(ActionId::skip("other"));
    int made = 0;
    for (int h = 0; h < 128 && made < 500; ++h) {
      for (int b = 0; b < 5 && made < 500; ++b) {
        Signature s;
        s.regime = static_cast<RegimeLabel>((h + b) % 6);
        s.handoff = static_cast<std::uint8_t>(h);
        s.buckets = {static_cast<std::uint8_t>(b),
                     static_cast<std::uint8_t>((b + 1) % 5),
                     static_cast<std::uint8_t>((b + 2) % 5),
                     static_cast<std::uint8_t>((h + b) % 5)};
        ActionId a = g.select_action(s, legal, rng, 0.5);
        g.backup({{s, a}}, rng.uniform(-0.25, 1.0), rng.uniform(0.05, 1.0));
        g.record_attempt(s, a);
        if (rng.bernoulli(0.25)) {
          g.record_failure(s, a, FailureKind::recoverable_execution);
        }
        g.record_tokens(s, a, 10 + rng.pick(3000));
        ++made;
      }
    }
    if (g.node_count() != 500) {
      return std::make_pair(false, "built " + std::to_string(g.node_count()) +
                                       " nodes, wanted 500");
    }
    std::string doc = graph_to_document(g);
    PolicyGraph back = graph_from_document(doc);
    bool stats_ok = back.node_count() == 500 && back.edge_count() == g.edge_count();
    bool scores_ok = true;
    for (const auto& [s, node] : g.nodes()) {
      const PolicyGraph::Node* other = back.find(s);
      if (other == nullptr || other->signature_visits != node.signature_visits) {
        stats_ok = false;
        break;
      }
      for (const auto& [a, e] : node.edges) {
        const EdgeStats* oe = back.find_edge(s, a);
        if (oe == nullptr || oe->visits != e.visits ||
            oe->mean_reward != e.mean_reward ||
            oe->variance_acc != e.variance_acc ||
            oe->token_sum != e.token_sum || oe->token_runs != e.token_runs ||
            oe->failure_count != e.failure_count ||
            oe->attempt_count != e.attempt_count) {
          stats_ok = false;
          break;
        }
        double sa = ucb_score(e, node.signature_visits, 0.5);
        double sb = ucb_score(*oe, other->signature_visits, 0.5);
        if (sa != sb && !(std::isinf(sa) && std::isinf(sb))) scores_ok = false;
      }
    }
    bool bytes_ok = graph_to_document(back) == doc;
    bool ok = stats_ok && scores_ok && bytes_ok;
    return std::make_pair(
        ok, std::string("stats=") + (stats_ok ? "exact" : "DRIFT") +
                " scores=" + (scores_ok ? "exact" : "DRIFT") + " reserialize=" +
                (bytes_ok ? "identical" : "DIFFERS"));
  });

  // ---- 12. Determinism -------------------------------------------------------
  gate.run("run determinism", [] {
    fs::path a = fs::temp_directory_path() / "agensflow_accept_a";
    fs::path b = fs::temp_directory_path() / "agensflow_accept_b";
    fs::remove_all(a);
    fs::remove_all(b);
    ProtocolOptions opts;
    opts.tasks = 24;
    opts.epochs = 4;
    opts.seed = 99;
    opts.out_dir = a.string();
    (void)run_protocol(opts);
    opts.out_dir = b.string();
    (void)run_protocol(opts);
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::ostringstream out;
      out << in.rdbuf();
      return out.str();
    };
    std::string ca = slurp(a / "learning_curves.csv");
    std::string cb = slurp(b / "learning_curves.csv");
    bool ok = !ca.empty() && ca == cb;
    fs::remove_all(a);
    fs::remove_all(b);
    return std::make_pair(ok, ok ? "learning curves byte-identical"
                                 : "learning curves differ");
  });

  // ---- 13. Invariant suite ----------------------------------------------------
  gate.run("invariant suite", [&]() -> std::pair<bool, std::string> {
    auto start = std::chrono::steady_clock::now();
    std::vector<std::string> broken;

    // Signature purity: folding is a pure function and ignores handoff_quality.
    {
      Rng rng(606);
      for (int i = 0; i < 2000; ++i) {
        BeliefVector bv;
        bv.correctness = rng.uniform();
        bv.uncertainty = rng.uniform();
        bv.contradiction_risk = rng.uniform();
        bv.evidence_sufficiency = rng.uniform();
        bv.handoff_quality = rng.uniform();
        HandoffState h;
        if (rng.bernoulli(0.5)) h.goal = "g";
        if (rng.bernoulli(0.5)) h.draft_answer = "d";
        auto regime = static_cast<RegimeLabel>(rng.pick(6));
        Signature s1 = fold_signature(regime, h, bv, 5);
        Signature s2 = fold_signature(regime, h, bv, 5);
        BeliefVector hq = bv;
        hq.handoff_quality = rng.uniform();
        Signature s3 = fold_signature(regime, h, hq, 5);
        if (!(s1 == s2 && s1 == s3)) {
          broken.push_back("signature purity");
          break;
        }
      }
    }

    // Belief clamping under random contribution sequences.
    {
      Rng rng(707);
      for (int trial = 0; trial < 400; ++trial) {
        BeliefVector b;
        for (int step = 0; step < 12; ++step) {
          auto role = static_cast<AgentRole>(rng.pick(7));
          AgentContribution c;
          c.evidence_items = static_cast<int>(rng.pick(6));
          c.subproblem_set = rng.bernoulli(0.7);
          c.draft_produced = rng.bernoulli(0.7);
          c.critique_produced = rng.bernoulli(0.7);
          c.merged_produced = rng.bernoulli(0.7);
          if (role == AgentRole::verifier) {
            c.verdict = static_cast<Verdict>(rng.pick(3));
          }
          b = apply_contribution(b, role, c);
          for (double v : {b.correctness, b.uncertainty, b.contradiction_risk,
                           b.evidence_sufficiency, b.handoff_quality}) {
            if (v < 0.0 || v > 1.0) {
              broken.push_back("belief clamping");
              goto clamping_done;
            }
          }
        }
      }
    clamping_done:;
    }

    // Skip legality and termination totality over every protocol trajectory.
    if (protocol_error.empty()) {
      for (const auto& run : runs) {
        for (const auto& arm : run.arms) {
          bool skipless_arm = arm.config.arm == kArmNoSkip;
          for (const auto& t : arm.trajectories) {
            std::set<std::string> resolved;
            for (const auto& e : t.events) {
              if (e.action.kind == ActionId::Kind::skip) {
                if (skipless_arm) {
                  broken.push_back("skip with skipping disabled");
                }
                std::size_t unresolved = kPlanOrder.size() - resolved.size();
                if (unresolved < 2) {
                  broken.push_back("skip of the final unresolved cell");
                }
              }
              if (resolved.count(e.cell) > 0) {
                broken.push_back("cell resolved twice");
              }
              resolved.insert(e.cell);
              const BeliefVector& b = e.beliefs_after;
              for (double v :
                   {b.correctness, b.uncertainty, b.contradiction_risk,
                    b.evidence_sufficiency, b.handoff_quality}) {
                if (v < 0.0 || v > 1.0) broken.push_back("trace beliefs range");
              }
            }
            if (t.events.empty()) broken.push_back("empty trajectory");
          }
          for (const auto& r : arm.reports) {
            if (r.reason != TerminationReason::evaluator_complete &&
                r.reason != TerminationReason::budget_exhausted &&
                r.reason != TerminationReason::no_legal_actions &&
                r.reason != TerminationReason::governance_halt) {
              broken.push_back("unknown termination reason");
            }
          }
          if (broken.size() > 8) break;
        }
      }
    } else {
      broken.push_back("protocol unavailable: " + protocol_error);
    }

    // Confidence monotonicity.
    {
      double prev = confidence_from_disagreement(0.0, 0.5);
      for (double s = 0.005; s <= 1.2; s += 0.005) {
        double cur = confidence_from_disagreement(s, 0.5);
        if (cur > prev + 1e-15 || cur < 0.0 || cur > 1.0) {
          broken.push_back("confidence monotonicity");
          break;
        }
        prev = cur;
      }
    }

    // Oracle separation: the decision path never mentions ground truth.
    {
      auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream out;
        out << in.rdbuf();
        return out.str();
      };
      fs::path root(AGENSFLOW_SOURCE_DIR);
      for (const char* stem : {"signature", "policy_graph", "router"}) {
        std::string text =
            slurp(root / "src" / (std::string(stem) + ".cpp")) +
            slurp(root / "include" / "agensflow" / (std::string(stem) + ".hpp"));
        if (text.empty()) broken.push_back("missing source for oracle scan");
        if (text.find("latent_quality") != std::string::npos ||
            text.find("planted_optimum") != std::string::npos) {
          broken.push_back(std::string("oracle leak in ") + stem);
        }
      }
    }

    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (seconds >= 120.0) broken.push_back("invariant suite too slow");

    if (broken.empty()) {
      return {true, "six invariant families hold"};
    }
    std::string detail = "violations:";
    std::set<std::string> uniq(broken.begin(), broken.end());
    for (const auto& b : uniq) detail += " [" + b + "]";
    return {false, detail};
  });

  std::printf("%d/13 criteria passed\n", 13 - gate.failures);
  return gate.failures == 0 ? 0 : 1;
}
