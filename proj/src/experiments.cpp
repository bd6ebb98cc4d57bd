#include "agensflow/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <set>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace agensflow {

namespace {

using nlohmann::json;

// Stream tags keep env and policy draws decoupled; streams are keyed by
// (master seed, tag, epoch, task index) and deliberately carry no arm tag, so
// every arm sees identical environment randomness for the same (epoch, task).
const std::uint64_t kEnvStreamTag = Rng::hash_str("env_stream");
const std::uint64_t kPolicyStreamTag = Rng::hash_str("policy_stream");
const std::uint64_t kTransferSeedTag = Rng::hash_str("transfer_source");

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t tag, int epoch,
                          std::size_t task_index) {
  std::uint64_t s = Rng::combine(master, tag);
  s = Rng::combine(s, static_cast<std::uint64_t>(epoch));
  return Rng::combine(s, static_cast<std::uint64_t>(task_index));
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

bool is_reference_id(const std::string& id) {
  return id.rfind("ref:", 0) == 0;
}

}  // namespace

ArmConfig ArmConfig::for_arm(const std::string& arm, int epochs,
                             std::uint64_t seed) {
  ArmConfig c;
  c.arm = arm;
  c.epochs = epochs;
  c.seed = seed;
  if (arm == kArmBaseline) {
    c.learning_enabled = false;
    c.epochs = 1;
  } else if (arm == kArmNoSkip) {
    c.skip_enabled = false;
  } else if (arm == kArmWarmStart) {
    c.warm_start_source = "transfer:auto";
  } else if (arm != kArmMain) {
    throw std::invalid_argument("unknown arm: " + arm);
  }
  return c;
}

void validate_arm(const ArmConfig& arm) {
  if (arm.arm != kArmBaseline && arm.arm != kArmNoSkip &&
      arm.arm != kArmMain && arm.arm != kArmWarmStart) {
    throw std::invalid_argument("unknown arm: " + arm.arm);
  }
  if (arm.epochs < 1) throw std::invalid_argument("arm epochs must be >= 1");
  if (arm.arm == kArmBaseline && (arm.learning_enabled || arm.epochs != 1)) {
    throw std::invalid_argument(
        "baseline arm requires learning disabled and a single epoch");
  }
  if (arm.arm == kArmNoSkip && arm.skip_enabled) {
    throw std::invalid_argument("no_skip arm requires skip disabled");
  }
  if (arm.arm == kArmWarmStart && !arm.warm_start_source) {
    throw std::invalid_argument("warm_start arm requires a source graph");
  }
  if (!(arm.warm_start_discount >= 0.0 && arm.warm_start_discount <= 1.0)) {
    throw std::invalid_argument("warm start discount must be in [0, 1]");
  }
}

double plateau_mean(const std::vector<double>& per_epoch_values) {
  if (per_epoch_values.empty()) {
    throw std::invalid_argument("plateau of an empty series");
  }
  std::size_t n = std::min<std::size_t>(3, per_epoch_values.size());
  double s = 0.0;
  for (std::size_t i = per_epoch_values.size() - n; i < per_epoch_values.size();
       ++i) {
    s += per_epoch_values[i];
  }
  return s / static_cast<double>(n);
}

ArmResult run_arm(const ArmConfig& arm, const std::vector<SyntheticTask>& corpus,
                  SimEnvironment& env, const Config& config,
                  const PolicyGraph* warm_source,
                  const std::string& graph_out_path) {
  validate_arm(arm);
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  for (const auto& t : corpus) {
    if (!env.knows_task(t.id)) {
      throw std::invalid_argument("corpus task not registered: " + t.id);
    }
  }

  RouterConfig rcfg = config.router;
  rcfg.skip_enabled = arm.skip_enabled;
  rcfg.learning_enabled = arm.learning_enabled;

  ArmResult result;
  result.config = arm;
  if (arm.arm == kArmWarmStart) {
    // Arm isolation: the source graph is copied (and discounted) before any
    // mutation; the source itself is never touched.
    if (warm_source != nullptr) {
      result.graph = warm_start(*warm_source, arm.warm_start_discount);
    } else {
      PolicyGraph source = load_graph(*arm.warm_start_source);
      result.graph = warm_start(source, arm.warm_start_discount);
    }
  }

  const auto& judge_models = env.config().judge_models;
  auto jit = judge_models.find(config.reward.live_judge);
  if (jit == judge_models.end()) {
    throw std::invalid_argument("unknown live judge: " + config.reward.live_judge);
  }
  SimJudge live(jit->second, env);

  // Stored best prior trajectory per task, the peer for relative judging from
  // the second encounter onward. Until one exists the peer is a synthetic
  // reference at the class quality floor.
  std::map<std::string, Trajectory> best_prior;

  for (int epoch = 1; epoch <= arm.epochs; ++epoch) {
    std::vector<double> live_scores;
    std::vector<double> rewards;
    double token_sum = 0.0;
    std::map<std::string, int> skip_counts;
    for (const auto& cell : rcfg.pool.cells) skip_counts[cell.name] = 0;

    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const SyntheticTask& task = corpus[i];
      Rng policy_rng(stream_seed(arm.seed, kPolicyStreamTag, epoch, i));
      Rng env_rng(stream_seed(arm.seed, kEnvStreamTag, epoch, i));

      auto [traj, report] =
          run_task(task.ref(), result.graph, env, rcfg, policy_rng, env_rng);
      traj.arm = arm.arm;
      traj.epoch = epoch;
      traj.id = arm.arm + ":e" + std::to_string(epoch) + ":" + task.id;

      Trajectory reference;
      const Trajectory* prior = nullptr;
      auto bp = best_prior.find(task.id);
      if (bp != best_prior.end()) {
        prior = &bp->second;
      } else {
        reference = make_reference_trajectory(task);
        prior = &reference;
      }

      std::vector<const Trajectory*> group{&traj, prior};
      auto scores = judge_group(group, live, config.reward.axis_weights);
      if (!scores) throw std::runtime_error("live judge faulted");
      double current_score = (*scores)[0].scalar;
      double prior_score = (*scores)[1].scalar;

      // Single live judge: no disagreement to measure, confidence 1.
      double reward = hybrid_reward(current_score, traj.token_total,
                                    traj.retry_count, config.reward.weights);
      report.reward = reward_breakdown(current_score, traj.token_total,
                                       traj.retry_count, config.reward.weights);
      if (rcfg.learning_enabled) {
        result.graph.backup(traj.visited_edges, reward, 1.0);
      }
      if (current_score > prior_score) {
        best_prior.insert_or_assign(task.id, traj);
      }

      live_scores.push_back(current_score);
      rewards.push_back(reward);
      token_sum += static_cast<double>(traj.token_total);
      for (const auto& ev : traj.events) {
        if (ev.action.kind == ActionId::Kind::skip) ++skip_counts[ev.cell];
      }

      result.trajectories.push_back(std::move(traj));
      result.reports.push_back(std::move(report));
    }

    EpochRow row;
    row.arm = arm.arm;
    row.epoch = epoch;
    row.mean_live_score = mean_of(live_scores);
    row.mean_tokens = token_sum / static_cast<double>(corpus.size());
    row.mean_reward = mean_of(rewards);
    for (const auto& [cell, n] : skip_counts) {
      row.skip_rates[cell] =
          static_cast<double>(n) / static_cast<double>(corpus.size());
    }
    result.epochs.push_back(std::move(row));

    if (!graph_out_path.empty()) save_graph(result.graph, graph_out_path);
  }

  return result;
}

double AuditTable::arm_epoch_mean(const std::string& arm, int epoch) const {
  double s = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.arm == arm && r.epoch == epoch) {
      s += r.scalar;
      ++n;
    }
  }
  if (n == 0) {
    throw std::out_of_range("no audit rows for arm " + arm + " epoch " +
                            std::to_string(epoch));
  }
  return s / static_cast<double>(n);
}

std::optional<double> AuditTable::arm_class_mean(const std::string& arm,
                                                 TaskClass cls, int from_epoch,
                                                 int to_epoch) const {
  double s = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.arm == arm && r.class_tag == cls && r.epoch >= from_epoch &&
        r.epoch <= to_epoch) {
      s += r.scalar;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

std::vector<double> AuditTable::arm_epoch_series(const std::string& arm,
                                                 int max_epoch) const {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(max_epoch));
  for (int e = 1; e <= max_epoch; ++e) v.push_back(arm_epoch_mean(arm, e));
  return v;
}

AuditTable audit(const std::vector<const ArmResult*>& arms,
                 const SimEnvironment& env,
                 const std::vector<std::string>& judge_ids,
                 const Config& config) {
  if (arms.empty()) throw std::invalid_argument("audit needs at least one arm");
  for (const ArmResult* a : arms) {
    if (a == nullptr) throw std::invalid_argument("null arm result");
  }
  if (judge_ids.empty()) {
    throw std::invalid_argument("audit needs at least one judge");
  }

  // Judges sorted by id: cross-judge consultation order becomes a function of
  // the judge set alone, not of the caller's argument order.
  std::vector<std::string> sorted_ids = judge_ids;
  std::sort(sorted_ids.begin(), sorted_ids.end());
  sorted_ids.erase(std::unique(sorted_ids.begin(), sorted_ids.end()),
                   sorted_ids.end());
  std::vector<std::unique_ptr<SimJudge>> owned;
  std::vector<JudgeInterface*> judges;
  for (const auto& id : sorted_ids) {
    auto it = env.config().judge_models.find(id);
    if (it == env.config().judge_models.end()) {
      throw std::invalid_argument("unknown judge: " + id);
    }
    owned.push_back(std::make_unique<SimJudge>(it->second, env));
    judges.push_back(owned.back().get());
  }

  const ArmResult* baseline = nullptr;
  std::vector<const ArmResult*> learning;
  for (const ArmResult* a : arms) {
    if (a->config.arm == kArmBaseline) {
      baseline = a;
    } else {
      learning.push_back(a);
    }
  }

  // Task order from the first arm's first epoch keeps row order deterministic.
  std::vector<std::string> task_order;
  {
    std::set<std::string> seen;
    for (const auto& t : arms.front()->trajectories) {
      if (t.epoch == 1 && seen.insert(t.task_id).second) {
        task_order.push_back(t.task_id);
      }
    }
  }

  using Key = std::pair<std::string, int>;
  std::map<const ArmResult*, std::map<Key, const Trajectory*>> index;
  for (const ArmResult* a : arms) {
    auto& m = index[a];
    for (const auto& t : a->trajectories) m[{t.task_id, t.epoch}] = &t;
  }

  int max_epoch = 1;
  for (const ArmResult* a : learning) max_epoch = std::max(max_epoch, a->config.epochs);

  AuditTable table;
  table.judge_ids = sorted_ids;

  for (int epoch = 1; epoch <= max_epoch; ++epoch) {
    for (const auto& task_id : task_order) {
      // The baseline's single pass anchors every epoch's group, giving it a
      // full audited series alongside the learning arms.
      std::vector<const Trajectory*> group;
      if (baseline != nullptr) {
        auto it = index[baseline].find({task_id, 1});
        if (it != index[baseline].end()) group.push_back(it->second);
      }
      for (const ArmResult* a : learning) {
        if (a->config.epochs < epoch) continue;
        auto it = index[a].find({task_id, epoch});
        if (it != index[a].end()) group.push_back(it->second);
      }
      if (group.empty()) continue;

      Trajectory reference;
      if (group.size() < 2) {
        reference = make_reference_trajectory(env.task(task_id));
        group.push_back(&reference);
      }

      auto res = cross_judge(group, judges, config.reward.axis_weights,
                             config.reward.sigma_max);
      if (!res) continue;

      for (std::size_t i = 0; i < group.size(); ++i) {
        if (is_reference_id(group[i]->id)) continue;
        AuditRow row;
        row.arm = group[i]->arm;
        row.epoch = epoch;
        row.task_id = task_id;
        row.class_tag = group[i]->class_tag;
        row.scalar = res->mean[i];
        row.axes = res->mean_axes[i];
        row.confidence = res->confidence[i];
        table.rows.push_back(std::move(row));
      }
    }
  }

  return table;
}

std::vector<PerClassRow> per_class_report(const AuditTable& table,
                                          const std::string& arm,
                                          const std::string& against,
                                          int epochs) {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  int window = std::min(3, epochs);
  int from = epochs - window + 1;

  std::vector<PerClassRow> rows;
  for (int c = 0; c < 8; ++c) {
    TaskClass cls = static_cast<TaskClass>(c);
    PerClassRow row;
    row.class_tag = cls;
    auto a = table.arm_class_mean(arm, cls, from, epochs);
    auto b = table.arm_class_mean(against, cls, from, epochs);
    if (a && b) {
      row.present = true;
      row.arm_mean = *a;
      row.baseline_mean = *b;
      row.delta = *a - *b;
    }
    rows.push_back(row);
  }
  return rows;
}

WarmStartReport warm_start_comparison(const ArmResult& cold,
                                      const ArmResult& warm,
                                      const AuditTable& table) {
  if (cold.config.epochs != warm.config.epochs) {
    throw std::invalid_argument("epoch count mismatch between compared arms");
  }
  int epochs = cold.config.epochs;

  WarmStartReport rep;
  auto cold_series = table.arm_epoch_series(cold.config.arm, epochs);
  auto warm_series = table.arm_epoch_series(warm.config.arm, epochs);
  for (int e = 0; e < epochs; ++e) {
    rep.per_epoch_delta.push_back(warm_series[static_cast<std::size_t>(e)] -
                                  cold_series[static_cast<std::size_t>(e)]);
  }
  rep.plateau_delta = plateau_mean(warm_series) - plateau_mean(cold_series);
  rep.full_run_delta = mean_of(rep.per_epoch_delta);

  auto cumulative = [epochs](const ArmResult& a) {
    std::vector<long long> v(static_cast<std::size_t>(epochs), 0);
    for (const auto& t : a.trajectories) {
      v[static_cast<std::size_t>(t.epoch - 1)] += t.token_total;
    }
    for (int e = 1; e < epochs; ++e) {
      v[static_cast<std::size_t>(e)] += v[static_cast<std::size_t>(e - 1)];
    }
    return v;
  };
  rep.cold_cumulative_tokens = cumulative(cold);
  rep.warm_cumulative_tokens = cumulative(warm);
  return rep;
}

double retry_pipeline_success(double p, int n, int k) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("per-attempt success must be in [0, 1]");
  }
  if (n < 1 || k < 1) {
    throw std::invalid_argument("attempts and stages must be >= 1");
  }
  return std::pow(1.0 - std::pow(1.0 - p, n), k);
}

namespace {

json trajectory_to_json(const Trajectory& t) {
  json events = json::array();
  for (const auto& ev : t.events) {
    json beliefs;
    beliefs["correctness"] = ev.beliefs_after.correctness;
    beliefs["uncertainty"] = ev.beliefs_after.uncertainty;
    beliefs["contradiction_risk"] = ev.beliefs_after.contradiction_risk;
    beliefs["evidence_sufficiency"] = ev.beliefs_after.evidence_sufficiency;
    beliefs["handoff_quality"] = ev.beliefs_after.handoff_quality;

    json e;
    e["step"] = ev.step;
    e["signature"] = to_string(ev.signature);
    e["action"] = to_string(ev.action);
    e["cell"] = ev.cell;
    e["fields_written"] = ev.fields_written;
    e["tokens"] = ev.tokens;
    e["failure"] = ev.failure ? json(to_string(*ev.failure)) : json(nullptr);
    e["resolved_ok"] = ev.resolved_ok;
    e["completion"] = ev.completion;
    e["beliefs_after"] = beliefs;
    events.push_back(std::move(e));
  }

  json edges = json::array();
  for (const auto& [sig, act] : t.visited_edges) {
    edges.push_back(json::array({to_string(sig), to_string(act)}));
  }

  json out;
  out["id"] = t.id;
  out["task_id"] = t.task_id;
  out["class"] = to_string(t.class_tag);
  out["arm"] = t.arm;
  out["epoch"] = t.epoch;
  out["token_total"] = t.token_total;
  out["retry_count"] = t.retry_count;
  out["events"] = std::move(events);
  out["visited_edges"] = std::move(edges);
  return out;
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.id = j.at("id").get<std::string>();
  t.task_id = j.at("task_id").get<std::string>();
  t.class_tag = task_class_from_string(j.at("class").get<std::string>());
  t.arm = j.at("arm").get<std::string>();
  t.epoch = j.at("epoch").get<int>();
  t.token_total = j.at("token_total").get<int>();
  t.retry_count = j.at("retry_count").get<int>();
  for (const auto& e : j.at("events")) {
    TraceEvent ev;
    ev.step = e.at("step").get<int>();
    ev.signature = signature_from_string(e.at("signature").get<std::string>());
    ev.action = action_from_string(e.at("action").get<std::string>());
    ev.cell = e.at("cell").get<std::string>();
    ev.fields_written = e.at("fields_written").get<std::vector<std::string>>();
    ev.tokens = e.at("tokens").get<int>();
    if (!e.at("failure").is_null()) {
      ev.failure = failure_kind_from_string(e.at("failure").get<std::string>());
    }
    ev.resolved_ok = e.at("resolved_ok").get<bool>();
    ev.completion = e.at("completion").get<bool>();
    const auto& b = e.at("beliefs_after");
    ev.beliefs_after.correctness = b.at("correctness").get<double>();
    ev.beliefs_after.uncertainty = b.at("uncertainty").get<double>();
    ev.beliefs_after.contradiction_risk =
        b.at("contradiction_risk").get<double>();
    ev.beliefs_after.evidence_sufficiency =
        b.at("evidence_sufficiency").get<double>();
    ev.beliefs_after.handoff_quality = b.at("handoff_quality").get<double>();
    t.events.push_back(std::move(ev));
  }
  for (const auto& pair : j.at("visited_edges")) {
    if (!pair.is_array() || pair.size() != 2) {
      throw std::invalid_argument("visited edge must be a [signature, action] pair");
    }
    t.visited_edges.emplace_back(
        signature_from_string(pair.at(0).get<std::string>()),
        action_from_string(pair.at(1).get<std::string>()));
  }
  return t;
}

}  // namespace

std::string trajectories_to_document(
    const std::vector<Trajectory>& trajectories) {
  json out;
  out["format_version"] = 1;
  json arr = json::array();
  for (const auto& t : trajectories) arr.push_back(trajectory_to_json(t));
  out["trajectories"] = std::move(arr);
  return out.dump(2) + "\n";
}

std::vector<Trajectory> trajectories_from_document(const std::string& text) {
  try {
    json j = json::parse(text);
    if (j.at("format_version").get<int>() != 1) {
      throw std::invalid_argument("unsupported format version");
    }
    std::vector<Trajectory> out;
    for (const auto& tj : j.at("trajectories")) {
      out.push_back(trajectory_from_json(tj));
    }
    return out;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("trajectory document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("trajectory document: ") + e.what());
  }
}

namespace {

// Per-arm audited mean for one epoch, nullopt when no rows exist (an arm that
// never ran that epoch).
std::optional<double> audited_mean_or_none(const AuditTable& table,
                                           const std::string& arm, int epoch) {
  double s = 0.0;
  int n = 0;
  for (const auto& r : table.rows) {
    if (r.arm == arm && r.epoch == epoch) {
      s += r.scalar;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

}  // namespace

std::string learning_curves_csv(const ProtocolResult& result) {
  const auto& cells = result.config.router.pool.cells;
  std::string out = "arm,epoch,mean_live_score,mean_audited_score,mean_tokens";
  for (const auto& c : cells) out += ",skip_rate_" + c.name;
  out += "\n";

  auto skip_rate = [](const EpochRow& row, const std::string& cell) {
    auto it = row.skip_rates.find(cell);
    return it == row.skip_rates.end() ? 0.0 : it->second;
  };
  auto line = [&](const std::string& arm, int epoch, double live,
                  double audited, double tokens, const EpochRow& skips) {
    out += arm + "," + std::to_string(epoch) + "," + fmt6(live) + "," +
           fmt6(audited) + "," + fmt6(tokens);
    for (const auto& c : cells) out += "," + fmt6(skip_rate(skips, c.name));
    out += "\n";
  };

  // The baseline's actual run is one pass; its epoch-0 row summarizes it with
  // the audited mean over its whole anchor series. Epochs 1..E then restate
  // the same pass as the flat anchor against which learning arms are read,
  // with per-epoch audited scores from the audit groups.
  const ArmResult* baseline = result.find_arm(kArmBaseline);
  if (baseline != nullptr) {
    const EpochRow& r = baseline->epochs.front();
    std::vector<double> series;
    for (int e = 1;; ++e) {
      auto m = audited_mean_or_none(result.audit, kArmBaseline, e);
      if (!m) break;
      series.push_back(*m);
    }
    line(kArmBaseline, 0, r.mean_live_score, mean_of(series), r.mean_tokens, r);
  }

  for (const auto& arm : result.arms) {
    if (arm.config.arm == kArmBaseline) {
      const EpochRow& r = arm.epochs.front();
      for (int e = 1;; ++e) {
        auto m = audited_mean_or_none(result.audit, kArmBaseline, e);
        if (!m) break;
        line(kArmBaseline, e, r.mean_live_score, *m, r.mean_tokens, r);
      }
    } else {
      for (const auto& r : arm.epochs) {
        auto m = audited_mean_or_none(result.audit, arm.config.arm, r.epoch);
        line(arm.config.arm, r.epoch, r.mean_live_score, m ? *m : 0.0,
             r.mean_tokens, r);
      }
    }
  }
  return out;
}

std::string audit_rows_csv(const AuditTable& table) {
  std::string out =
      "arm,epoch,task_id,class,audited_scalar,goal_achievement,grounding,"
      "coordination,recovery,confidence\n";
  for (const auto& r : table.rows) {
    out += r.arm + "," + std::to_string(r.epoch) + "," + r.task_id + "," +
           to_string(r.class_tag) + "," + fmt6(r.scalar) + "," +
           fmt6(r.axes.goal_achievement) + "," + fmt6(r.axes.grounding) + "," +
           fmt6(r.axes.coordination) + "," + fmt6(r.axes.recovery) + "," +
           fmt6(r.confidence) + "\n";
  }
  return out;
}

std::string per_class_csv(const std::vector<PerClassRow>& rows) {
  std::string out = "class,present,baseline_mean,arm_mean,delta\n";
  for (const auto& r : rows) {
    if (r.present) {
      out += to_string(r.class_tag) + ",1," + fmt6(r.baseline_mean) + "," +
             fmt6(r.arm_mean) + "," + fmt6(r.delta) + "\n";
    } else {
      out += to_string(r.class_tag) + ",0,,,\n";
    }
  }
  return out;
}

std::string warm_start_csv(const WarmStartReport& report) {
  std::string out =
      "epoch,audited_delta,cold_cumulative_tokens,warm_cumulative_tokens\n";
  for (std::size_t e = 0; e < report.per_epoch_delta.size(); ++e) {
    out += std::to_string(e + 1) + "," + fmt6(report.per_epoch_delta[e]) + "," +
           std::to_string(report.cold_cumulative_tokens[e]) + "," +
           std::to_string(report.warm_cumulative_tokens[e]) + "\n";
  }
  long long cold_total = report.cold_cumulative_tokens.empty()
                             ? 0
                             : report.cold_cumulative_tokens.back();
  long long warm_total = report.warm_cumulative_tokens.empty()
                             ? 0
                             : report.warm_cumulative_tokens.back();
  out += "plateau," + fmt6(report.plateau_delta) + "," +
         std::to_string(cold_total) + "," + std::to_string(warm_total) + "\n";
  out += "full_run," + fmt6(report.full_run_delta) + "," +
         std::to_string(cold_total) + "," + std::to_string(warm_total) + "\n";
  return out;
}

namespace {

struct SeriesSpec {
  std::string label;
  std::string color;
  std::vector<double> values;  // index 0 = epoch 1
};

// Minimal static line chart; fixed geometry, y in [lo, hi].
std::string line_chart_svg(const std::string& title,
                           const std::vector<SeriesSpec>& series, int epochs,
                           double y_lo, double y_hi) {
  const double width = 720.0, height = 440.0;
  const double left = 70.0, right = 660.0, top = 50.0, bottom = 390.0;
  auto x_of = [&](int epoch) {
    if (epochs <= 1) return (left + right) / 2.0;
    return left + (right - left) * static_cast<double>(epoch - 1) /
                      static_cast<double>(epochs - 1);
  };
  auto y_of = [&](double v) {
    double t = (v - y_lo) / (y_hi - y_lo);
    t = std::min(1.0, std::max(0.0, t));
    return bottom - (bottom - top) * t;
  };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt1(width) +
       "\" height=\"" + fmt1(height) + "\" viewBox=\"0 0 " + fmt1(width) +
       " " + fmt1(height) + "\">\n";
  s += "<rect width=\"" + fmt1(width) + "\" height=\"" + fmt1(height) +
       "\" fill=\"#ffffff\"/>\n";
  s += "<text x=\"" + fmt1(width / 2.0) +
       "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"16\">" + title + "</text>\n";

  // Axes and gridlines.
  for (int i = 0; i <= 4; ++i) {
    double v = y_lo + (y_hi - y_lo) * i / 4.0;
    double y = y_of(v);
    s += "<line x1=\"" + fmt1(left) + "\" y1=\"" + fmt1(y) + "\" x2=\"" +
         fmt1(right) + "\" y2=\"" + fmt1(y) +
         "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    s += "<text x=\"" + fmt1(left - 8.0) + "\" y=\"" + fmt1(y + 4.0) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
         fmt6(v).substr(0, 4) + "</text>\n";
  }
  for (int e = 1; e <= epochs; ++e) {
    double x = x_of(e);
    s += "<text x=\"" + fmt1(x) + "\" y=\"" + fmt1(bottom + 18.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"11\">" + std::to_string(e) + "</text>\n";
  }
  s += "<line x1=\"" + fmt1(left) + "\" y1=\"" + fmt1(top) + "\" x2=\"" +
       fmt1(left) + "\" y2=\"" + fmt1(bottom) +
       "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  s += "<line x1=\"" + fmt1(left) + "\" y1=\"" + fmt1(bottom) + "\" x2=\"" +
       fmt1(right) + "\" y2=\"" + fmt1(bottom) +
       "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  s += "<text x=\"" + fmt1((left + right) / 2.0) + "\" y=\"" +
       fmt1(bottom + 36.0) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"12\">epoch</text>\n";

  // Series and legend.
  double legend_y = top + 6.0;
  for (const auto& sp : series) {
    if (!sp.values.empty()) {
      std::string points;
      for (std::size_t i = 0; i < sp.values.size(); ++i) {
        points += fmt1(x_of(static_cast<int>(i) + 1)) + "," +
                  fmt1(y_of(sp.values[i])) + " ";
      }
      s += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" +
           sp.color + "\" stroke-width=\"2\"/>\n";
      for (std::size_t i = 0; i < sp.values.size(); ++i) {
        s += "<circle cx=\"" + fmt1(x_of(static_cast<int>(i) + 1)) +
             "\" cy=\"" + fmt1(y_of(sp.values[i])) + "\" r=\"3\" fill=\"" +
             sp.color + "\"/>\n";
      }
    }
    s += "<line x1=\"" + fmt1(right - 150.0) + "\" y1=\"" + fmt1(legend_y) +
         "\" x2=\"" + fmt1(right - 126.0) + "\" y2=\"" + fmt1(legend_y) +
         "\" stroke=\"" + sp.color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fmt1(right - 120.0) + "\" y=\"" + fmt1(legend_y + 4.0) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + sp.label +
         "</text>\n";
    legend_y += 16.0;
  }

  s += "</svg>\n";
  return s;
}

std::string arm_color(const std::string& arm) {
  if (arm == kArmBaseline) return "#666666";
  if (arm == kArmNoSkip) return "#d62728";
  if (arm == kArmMain) return "#1f77b4";
  if (arm == kArmWarmStart) return "#2ca02c";
  return "#9467bd";
}

std::string score_svg(const ProtocolResult& result) {
  std::vector<SeriesSpec> series;
  int epochs = 1;
  for (const auto& arm : result.arms) {
    SeriesSpec sp;
    sp.label = arm.config.arm;
    sp.color = arm_color(arm.config.arm);
    for (int e = 1;; ++e) {
      auto m = audited_mean_or_none(result.audit, arm.config.arm, e);
      if (!m) break;
      sp.values.push_back(*m);
    }
    epochs = std::max(epochs, static_cast<int>(sp.values.size()));
    series.push_back(std::move(sp));
  }
  return line_chart_svg("mean audited score by epoch", series, epochs, 0.0, 1.0);
}

std::string skip_svg(const ProtocolResult& result) {
  const ArmResult* arm = result.find_arm(kArmMain);
  if (arm == nullptr) {
    for (const auto& a : result.arms) {
      if (a.config.learning_enabled && a.config.skip_enabled) {
        arm = &a;
        break;
      }
    }
  }
  std::vector<SeriesSpec> series;
  int epochs = 1;
  if (arm != nullptr) {
    static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                     "#d62728", "#9467bd", "#8c564b",
                                     "#17becf"};
    const auto& cells = result.config.router.pool.cells;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      SeriesSpec sp;
      sp.label = cells[c].name;
      sp.color = kPalette[c % 7];
      for (const auto& r : arm->epochs) {
        auto it = r.skip_rates.find(cells[c].name);
        sp.values.push_back(it == r.skip_rates.end() ? 0.0 : it->second);
      }
      epochs = std::max(epochs, static_cast<int>(sp.values.size()));
      series.push_back(std::move(sp));
    }
  }
  std::string title = arm != nullptr
                          ? ("per-cell skip rate by epoch (" + arm->config.arm + ")")
                          : "per-cell skip rate by epoch (no skip-learning arm)";
  return line_chart_svg(title, series, epochs, 0.0, 1.0);
}

}  // namespace

void emit_outputs(const ProtocolResult& result, const std::string& out_dir) {
  if (out_dir.empty()) {
    throw std::invalid_argument("output directory must be nonempty");
  }
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "plots", ec);
  fs::create_directories(fs::path(out_dir) / "graphs", ec);
  fs::create_directories(fs::path(out_dir) / "trajectories", ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory: " + out_dir +
                             ": " + ec.message());
  }

  std::vector<std::string> files;
  auto emit = [&](const std::string& rel, const std::string& text) {
    write_text_file((fs::path(out_dir) / rel).string(), text);
    files.push_back(rel);
  };

  emit("learning_curves.csv", learning_curves_csv(result));
  emit("audit_rows.csv", audit_rows_csv(result.audit));
  if (!result.per_class.empty()) {
    emit("per_class_report.csv", per_class_csv(result.per_class));
  }
  if (result.warm_start) {
    emit("warm_start_report.csv", warm_start_csv(*result.warm_start));
  }
  emit("resolved_config.json", config_to_document(result.config));
  emit("env_config.json", env_config_to_document(result.env_config));
  emit("corpus.json", corpus_to_document(result.corpus));
  for (const auto& arm : result.arms) {
    emit("graphs/" + arm.config.arm + ".graph.json",
         graph_to_document(arm.graph));
    emit("trajectories/" + arm.config.arm + ".json",
         trajectories_to_document(arm.trajectories));
  }
  emit("plots/score_vs_epoch.svg", score_svg(result));
  emit("plots/skip_rate_vs_epoch.svg", skip_svg(result));

  std::sort(files.begin(), files.end());
  std::uint64_t h = Rng::hash_str(config_to_document(result.config) +
                                  env_config_to_document(result.env_config));
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(h));

  json manifest;
  manifest["config_hash"] = hex;
  manifest["seed"] = result.options.seed;
  manifest["tasks"] = result.options.tasks;
  manifest["epochs"] = result.options.epochs;
  json arm_names = json::array();
  for (const auto& arm : result.arms) arm_names.push_back(arm.config.arm);
  manifest["arms"] = std::move(arm_names);
  files.push_back("manifest.json");
  std::sort(files.begin(), files.end());
  manifest["files"] = files;
  write_text_file((fs::path(out_dir) / "manifest.json").string(),
                  manifest.dump(2) + "\n");
}

const ArmResult* ProtocolResult::find_arm(const std::string& arm) const {
  for (const auto& a : arms) {
    if (a.config.arm == arm) return &a;
  }
  return nullptr;
}

ProtocolResult run_protocol(const ProtocolOptions& options) {
  if (options.tasks < 1) throw std::invalid_argument("tasks must be >= 1");
  if (options.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (options.arms.empty()) throw std::invalid_argument("no arms requested");
  {
    std::set<std::string> uniq(options.arms.begin(), options.arms.end());
    if (uniq.size() != options.arms.size()) {
      throw std::invalid_argument("duplicate arm requested");
    }
    for (const auto& name : options.arms) {
      (void)ArmConfig::for_arm(name, options.epochs, options.seed);
    }
  }

  ProtocolResult result;
  result.options = options;
  result.config =
      options.config_path ? load_config(*options.config_path) : Config{};
  result.env_config = options.env_path
                          ? env_config_from_document(
                                read_text_file(*options.env_path))
                          : EnvConfig::default_config();
  result.corpus = generate_corpus(result.env_config, options.tasks, options.seed);

  SimEnvironment env(result.env_config, result.config.router.pool);
  env.register_corpus(result.corpus);

  PreflightReport pf = preflight(result.config.router, env);
  if (!pf.ok()) {
    throw std::runtime_error("preflight failed: " + pf.issues.front().category +
                             ": " + pf.issues.front().message);
  }

  namespace fs = std::filesystem;
  const bool emitting = !options.out_dir.empty();
  if (emitting) {
    std::error_code ec;
    fs::create_directories(fs::path(options.out_dir) / "graphs", ec);
    if (ec) {
      throw std::runtime_error("cannot create output directory: " +
                               options.out_dir + ": " + ec.message());
    }
  }

  // Warm-start source: a graph trained on a structurally similar environment
  // with different planted optima, in process unless a source path was baked
  // into a config. Trained before the arms so arm order stays irrelevant.
  PolicyGraph warm_source_graph;
  bool have_warm_source = false;
  std::string warm_source_path = "transfer:auto";
  if (std::find(options.arms.begin(), options.arms.end(), kArmWarmStart) !=
      options.arms.end()) {
    EnvConfig transfer_cfg = make_transfer_variant(result.env_config);
    std::uint64_t tseed = Rng::combine(options.seed, kTransferSeedTag);
    auto tcorpus = generate_corpus(transfer_cfg, options.tasks, tseed);
    SimEnvironment tenv(transfer_cfg, result.config.router.pool);
    tenv.register_corpus(tcorpus);
    ArmConfig tarm = ArmConfig::for_arm(kArmMain, options.epochs, tseed);
    ArmResult tres = run_arm(tarm, tcorpus, tenv, result.config);
    warm_source_graph = std::move(tres.graph);
    have_warm_source = true;
    if (emitting) {
      warm_source_path =
          (fs::path(options.out_dir) / "graphs" / "warm_source.graph.json")
              .string();
      save_graph(warm_source_graph, warm_source_path);
    }
  }

  for (const auto& name : options.arms) {
    ArmConfig acfg = ArmConfig::for_arm(name, options.epochs, options.seed);
    const PolicyGraph* src = nullptr;
    if (name == kArmWarmStart) {
      acfg.warm_start_source = warm_source_path;
      if (have_warm_source) src = &warm_source_graph;
    }
    std::string gpath =
        emitting
            ? (fs::path(options.out_dir) / "graphs" / (name + ".graph.json"))
                  .string()
            : std::string{};
    result.arms.push_back(
        run_arm(acfg, result.corpus, env, result.config, src, gpath));
  }

  const auto& audit_pool = result.config.reward.audit_judges;
  if (options.audit_judge_count < 1 ||
      options.audit_judge_count > static_cast<int>(audit_pool.size())) {
    throw std::invalid_argument("audit judge count out of range");
  }
  std::vector<std::string> judge_ids(
      audit_pool.begin(), audit_pool.begin() + options.audit_judge_count);

  std::vector<const ArmResult*> ptrs;
  ptrs.reserve(result.arms.size());
  for (const auto& a : result.arms) ptrs.push_back(&a);
  result.audit = audit(ptrs, env, judge_ids, result.config);

  for (auto& a : result.arms) {
    for (auto& row : a.epochs) {
      row.mean_audited_score =
          result.audit.arm_epoch_mean(a.config.arm, row.epoch);
    }
  }

  const ArmResult* main_arm = result.find_arm(kArmMain);
  const ArmResult* base = result.find_arm(kArmBaseline);
  if (main_arm != nullptr && base != nullptr) {
    result.per_class = per_class_report(result.audit, kArmMain, kArmBaseline,
                                        main_arm->config.epochs);
  }
  const ArmResult* warm = result.find_arm(kArmWarmStart);
  if (warm != nullptr && main_arm != nullptr) {
    result.warm_start = warm_start_comparison(*main_arm, *warm, result.audit);
  }

  if (emitting) emit_outputs(result, options.out_dir);
  return result;
}

}  // namespace agensflow
