#include "agensflow/router.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace agensflow {

namespace {

using nlohmann::json;

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

const VariantPool::Cell* VariantPool::find_cell(const std::string& name) const {
  for (const auto& c : cells) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const VariantPool::Cell* VariantPool::cell_of_skill(
    const std::string& skill) const {
  for (const auto& c : cells) {
    for (const auto& v : c.variants) {
      if (v.skill == skill) return &c;
    }
  }
  return nullptr;
}

VariantPool VariantPool::default_pool() {
  VariantPool pool;
  pool.cells.push_back({"planner", AgentRole::planner,
                        {{"plan_outline", "haiku"}},
                        0});
  pool.cells.push_back({"memory", AgentRole::memory,
                        {{"memory_lookup", "haiku"}},
                        0});
  pool.cells.push_back({"web_search_a", AgentRole::memory,
                        {{"web_query_a", "haiku"}},
                        0});
  pool.cells.push_back({"web_search_b", AgentRole::memory,
                        {{"web_query_b", "haiku"}},
                        0});
  VariantPool::Cell solver{"solver", AgentRole::solver, {}, 0};
  for (const char* skill : {"solver_concise", "solver_cot", "solver_evidence"}) {
    for (const char* model : {"haiku", "fast", "mini"}) {
      solver.variants.push_back({skill, model});
    }
  }
  // default stays the full chain-of-thought variant on the largest binding
  for (std::size_t i = 0; i < solver.variants.size(); ++i) {
    if (solver.variants[i].skill == "solver_cot" &&
        solver.variants[i].model == "haiku") {
      solver.default_variant = i;
    }
  }
  pool.cells.push_back(std::move(solver));
  pool.cells.push_back({"verifier", AgentRole::verifier,
                        {{"verify_strict", "fast"}, {"verify_light", "mini"}},
                        0});
  pool.cells.push_back({"evaluator", AgentRole::evaluator,
                        {{"eval_check", "haiku"}},
                        0});
  return pool;
}

std::optional<std::string> ActivationPlan::next_unresolved() const {
  for (const auto& cell : scheduled_cells) {
    if (!resolved(cell)) return cell;
  }
  return std::nullopt;
}

std::size_t ActivationPlan::unresolved_count() const {
  std::size_t n = 0;
  for (const auto& cell : scheduled_cells) {
    if (!resolved(cell)) ++n;
  }
  return n;
}

std::string to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::evaluator_complete: return "evaluator_complete";
    case TerminationReason::budget_exhausted: return "budget_exhausted";
    case TerminationReason::no_legal_actions: return "no_legal_actions";
    case TerminationReason::governance_halt: return "governance_halt";
  }
  throw std::invalid_argument("unknown termination reason value");
}

TerminationReason termination_from_string(const std::string& s) {
  if (s == "evaluator_complete") return TerminationReason::evaluator_complete;
  if (s == "budget_exhausted") return TerminationReason::budget_exhausted;
  if (s == "no_legal_actions") return TerminationReason::no_legal_actions;
  if (s == "governance_halt") return TerminationReason::governance_halt;
  throw std::invalid_argument("unknown termination reason: " + s);
}

PreflightReport preflight(const RouterConfig& config, const Environment& env) {
  PreflightReport report;
  auto issue = [&](const std::string& category, const std::string& message) {
    report.issues.push_back({category, message});
  };

  if (config.pool.empty()) issue("pool", "variant pool is empty");
  std::set<std::string> seen_cells;
  std::map<std::string, std::string> skill_home;  // skill -> owning cell
  for (const auto& cell : config.pool.cells) {
    if (!seen_cells.insert(cell.name).second) {
      issue("pool", "duplicate cell: " + cell.name);
    }
    if (cell.variants.empty()) {
      issue("pool", "cell has no variants: " + cell.name);
    }
    if (cell.default_variant >= cell.variants.size() &&
        !cell.variants.empty()) {
      issue("pool", "default variant out of range: " + cell.name);
    }
    for (const auto& v : cell.variants) {
      auto [it, fresh] = skill_home.emplace(v.skill, cell.name);
      if (!fresh && it->second != cell.name) {
        issue("pool", "skill bound to more than one cell: " + v.skill);
      }
    }
    if (!env.has_cell(cell.name)) {
      issue("missing cell", "environment has no cell: " + cell.name);
    }
  }
  if (config.signature.granularity < 1) {
    issue("signature", "granularity must be >= 1");
  }
  if (config.budget.max_steps < 1) issue("budget", "max_steps must be >= 1");
  if (config.budget.token_cap < 1) issue("budget", "token_cap must be >= 1");
  if (!std::isfinite(config.reliability_weight) ||
      config.reliability_weight < 0.0) {
    issue("policy", "reliability_weight must be finite and >= 0");
  }
  if (config.governance.max_consecutive_failures < 1) {
    issue("governance", "max_consecutive_failures must be >= 1");
  }
  if (config.governance.hard_token_ceiling < 1) {
    issue("governance", "hard_token_ceiling must be >= 1");
  }
  return report;
}

ActivationPlan build_plan(const TaskFeatures&, const VariantPool& pool) {
  if (pool.empty()) {
    throw std::invalid_argument("build_plan needs a non-empty pool");
  }
  ActivationPlan plan;
  for (const auto& cell : pool.cells) plan.scheduled_cells.push_back(cell.name);
  return plan;
}

std::vector<ActionId> legal_actions(const ActivationPlan& plan,
                                    const BudgetState&, const VariantPool& pool,
                                    bool skip_enabled) {
  std::vector<ActionId> legal;
  auto next = plan.next_unresolved();
  if (!next) return legal;

  const VariantPool::Cell* cell = pool.find_cell(*next);
  if (cell == nullptr) {
    throw std::invalid_argument("plan references unknown cell: " + *next);
  }
  for (const auto& v : cell->variants) {
    legal.push_back(ActionId::invoke(v.skill, v.model));
  }
  // A skip must leave something else to do: with a single unresolved cell the
  // only legal moves are its invokes.
  if (skip_enabled && plan.unresolved_count() >= 2) {
    for (const auto& name : plan.scheduled_cells) {
      if (!plan.resolved(name)) legal.push_back(ActionId::skip(name));
    }
  }
  return legal;
}

std::optional<TerminationReason> check_termination(
    const TerminationInputs& in) {
  if (in.evaluator_complete) return TerminationReason::evaluator_complete;
  if (in.budget.steps_used >= in.budget.max_steps ||
      in.budget.tokens_used >= in.budget.token_cap) {
    return TerminationReason::budget_exhausted;
  }
  if (in.legal_empty) return TerminationReason::no_legal_actions;
  if (in.governance_halted) return TerminationReason::governance_halt;
  return std::nullopt;
}

std::optional<GovernanceVerdict> governance_check(
    const std::vector<TraceEvent>& trace, const GovernancePolicy& policy) {
  int streak = 0;
  long long tokens = 0;
  for (const auto& event : trace) {
    tokens += event.tokens;
    if (event.action.kind == ActionId::Kind::invoke &&
        policy.forbidden_cells.count(event.cell) > 0) {
      return GovernanceVerdict{"forbidden_cell",
                               "forbidden cell invoked: " + event.cell};
    }
    streak = event.failure.has_value() ? streak + 1 : 0;
    if (streak >= policy.max_consecutive_failures) {
      return GovernanceVerdict{
          "consecutive_failures",
          std::to_string(streak) + " consecutive failure events"};
    }
  }
  if (tokens > policy.hard_token_ceiling) {
    return GovernanceVerdict{
        "token_ceiling", "tokens " + std::to_string(tokens) +
                             " above hard ceiling " +
                             std::to_string(policy.hard_token_ceiling)};
  }
  return std::nullopt;
}

namespace {

ActionId default_action(const ActivationPlan& plan, const VariantPool& pool) {
  auto next = plan.next_unresolved();
  if (!next) throw std::logic_error("default_action with nothing unresolved");
  const VariantPool::Cell* cell = pool.find_cell(*next);
  const VariantPool::Variant& v = cell->variants[cell->default_variant];
  return ActionId::invoke(v.skill, v.model);
}

void apply_fields(HandoffState& handoff, const CellOutcome& out,
                  const std::string& cell) {
  for (const auto& field : out.fields_written) {
    if (field == "goal") {
      handoff.goal = "goal(" + cell + ")";
    } else if (field == "subproblem") {
      handoff.subproblem = "subproblem(" + cell + ")";
    } else if (field == "evidence") {
      for (int i = 0; i < std::max(out.evidence_items, 1); ++i) {
        handoff.evidence.push_back("evidence(" + cell + ")");
      }
    } else if (field == "critique") {
      handoff.critique = "critique(" + cell + ")";
    } else if (field == "verification") {
      handoff.verification = out.verdict;
    } else if (field == "draft_answer") {
      handoff.draft_answer = "draft(" + cell + ")";
    } else if (field == "merged_answer") {
      handoff.merged_answer = "merged(" + cell + ")";
    } else {
      throw std::invalid_argument("environment wrote unknown field: " + field);
    }
  }
}

AgentContribution contribution_of(const CellOutcome& out) {
  AgentContribution c;
  c.subproblem_set = contains(out.fields_written, "subproblem");
  c.evidence_items =
      contains(out.fields_written, "evidence") ? out.evidence_items : 0;
  c.draft_produced = contains(out.fields_written, "draft_answer");
  c.critique_produced = contains(out.fields_written, "critique");
  c.merged_produced = contains(out.fields_written, "merged_answer");
  if (contains(out.fields_written, "verification")) c.verdict = out.verdict;
  return c;
}

}  // namespace

std::pair<Trajectory, RunReport> run_task(const TaskRef& task,
                                          PolicyGraph& graph, Environment& env,
                                          const RouterConfig& config,
                                          Rng& policy_rng, Rng& env_rng) {
  const auto run_start = std::chrono::steady_clock::now();
  ActivationPlan plan = build_plan(task.features, config.pool);
  RegimeLabel regime =
      detect_regime(task.features, config.signature.regime_rules);
  BeliefVector beliefs = init_beliefs(config.signature);
  HandoffState handoff;
  BudgetState budget;
  budget.max_steps = config.budget.max_steps;
  budget.token_cap = config.budget.token_cap;

  Trajectory trajectory;
  trajectory.task_id = task.id;
  trajectory.class_tag = task.features.class_tag;
  trajectory.id = task.id;

  bool evaluator_complete = false;
  std::optional<GovernanceVerdict> governance;
  TerminationReason reason = TerminationReason::no_legal_actions;

  while (true) {
    governance = governance_check(trajectory.events, config.governance);
    std::vector<ActionId> legal =
        legal_actions(plan, budget, config.pool, config.skip_enabled);
    TerminationInputs inputs;
    inputs.evaluator_complete = evaluator_complete;
    inputs.budget = budget;
    inputs.legal_empty = legal.empty();
    inputs.governance_halted = governance.has_value();
    if (auto r = check_termination(inputs)) {
      reason = *r;
      break;
    }

    Signature sig = fold_signature(regime, handoff, beliefs,
                                   config.signature.granularity);
    ActionId action =
        config.learning_enabled
            ? graph.select_action(sig, legal, policy_rng,
                                  config.reliability_weight)
            : default_action(plan, config.pool);
    trajectory.visited_edges.emplace_back(sig, action);

    TraceEvent event;
    event.step = budget.steps_used;
    event.signature = sig;
    event.action = action;

    if (action.kind == ActionId::Kind::skip) {
      plan.skipped.insert(action.cell);
      event.cell = action.cell;
    } else {
      const VariantPool::Cell* cell = config.pool.cell_of_skill(action.skill);
      if (cell == nullptr) {
        throw std::logic_error("selected skill has no cell: " + action.skill);
      }
      event.cell = cell->name;
      CellOutcome out;
      bool resolved_ok = false;
      for (int attempt = 0; attempt < 2 && !resolved_ok; ++attempt) {
        if (config.learning_enabled) graph.record_attempt(sig, action);
        out = env.execute_cell(task, cell->name, action.skill, action.model,
                               trajectory, env_rng);
        event.tokens += out.tokens;
        if (out.failure) {
          event.failure = out.failure;
          budget.retries += 1;
          trajectory.retry_count += 1;
          if (config.learning_enabled) {
            graph.record_failure(sig, action, *out.failure);
          }
        } else {
          resolved_ok = true;
        }
      }
      plan.invoked.insert(cell->name);
      event.resolved_ok = resolved_ok;
      if (resolved_ok) {
        apply_fields(handoff, out, cell->name);
        beliefs = apply_contribution(beliefs, cell->role, contribution_of(out),
                                     config.signature.belief_deltas);
        event.fields_written = out.fields_written;
        event.completion = out.completion;
        if (out.completion && cell->role == AgentRole::evaluator) {
          evaluator_complete = true;
        }
      }
      if (config.learning_enabled) {
        graph.record_tokens(sig, action,
                            static_cast<std::uint64_t>(event.tokens));
      }
      budget.tokens_used += event.tokens;
    }

    budget.steps_used += 1;
    event.beliefs_after = beliefs;
    event.timestamp_us = std::chrono::duration_cast<std::chrono::microseconds>(
                             std::chrono::steady_clock::now() - run_start)
                             .count();
    trajectory.events.push_back(std::move(event));
  }

  trajectory.token_total = budget.tokens_used;

  RunReport report;
  report.task_id = task.id;
  report.class_tag = task.features.class_tag;
  report.reason = reason;
  report.visited_edges = trajectory.visited_edges;
  report.token_total = budget.tokens_used;
  report.governance = governance;
  report.steps = budget.steps_used;
  report.invoked_cells = static_cast<int>(plan.invoked.size());
  report.skipped_cells = static_cast<int>(plan.skipped.size());
  for (const auto& event : trajectory.events) {
    if (event.failure) report.failure_events += 1;
  }
  return {std::move(trajectory), std::move(report)};
}

std::string report_to_document(const RunReport& report) {
  json doc;
  doc["task_id"] = report.task_id;
  doc["class"] = to_string(report.class_tag);
  doc["termination_reason"] = to_string(report.reason);
  doc["reward"] = {{"quality", report.reward.quality},
                   {"cost_term", report.reward.cost_term},
                   {"retry_term", report.reward.retry_term},
                   {"total", report.reward.total},
                   {"judged", report.reward.judged}};
  json edges = json::array();
  for (const auto& [sig, action] : report.visited_edges) {
    edges.push_back({{"signature", to_string(sig)},
                     {"action", to_string(action)}});
  }
  doc["visited_edges"] = std::move(edges);
  doc["token_total"] = report.token_total;
  if (report.governance) {
    doc["governance"] = {{"rule", report.governance->rule},
                         {"detail", report.governance->detail}};
  } else {
    doc["governance"] = nullptr;
  }
  doc["trace_summary"] = {{"steps", report.steps},
                          {"invoked_cells", report.invoked_cells},
                          {"skipped_cells", report.skipped_cells},
                          {"failure_events", report.failure_events}};
  return doc.dump(2) + "\n";
}

}  // namespace agensflow
