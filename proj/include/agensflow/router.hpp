#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "agensflow/policy_graph.hpp"
#include "agensflow/rng.hpp"
#include "agensflow/signature.hpp"

namespace agensflow {

// Cell roster: cell -> role -> invokable (skill, model) variants. Skills are
// unique across cells so an invoke action maps back to one cell.
struct VariantPool {
  struct Variant {
    std::string skill;
    std::string model;
  };
  struct Cell {
    std::string name;
    AgentRole role = AgentRole::planner;
    std::vector<Variant> variants;
    std::size_t default_variant = 0;
  };

  std::vector<Cell> cells;  // scheduling order

  const Cell* find_cell(const std::string& name) const;
  const Cell* cell_of_skill(const std::string& skill) const;
  bool empty() const { return cells.empty(); }

  // planner, memory, web_search_a, web_search_b, solver (9 variants),
  // verifier (2 variants), evaluator.
  static VariantPool default_pool();
};

struct ActivationPlan {
  std::vector<std::string> scheduled_cells;
  std::set<std::string> invoked;
  std::set<std::string> skipped;

  bool resolved(const std::string& cell) const {
    return invoked.count(cell) > 0 || skipped.count(cell) > 0;
  }
  // First scheduled cell that is neither invoked nor skipped.
  std::optional<std::string> next_unresolved() const;
  std::size_t unresolved_count() const;
};

struct BudgetConfig {
  int max_steps = 16;
  int token_cap = 8000;
};

struct BudgetState {
  int max_steps = 16;
  int steps_used = 0;
  int token_cap = 8000;
  int tokens_used = 0;
  int retries = 0;
};

struct GovernancePolicy {
  int max_consecutive_failures = 3;
  std::set<std::string> forbidden_cells;
  int hard_token_ceiling = 16000;
};

struct GovernanceVerdict {
  std::string rule;    // "consecutive_failures" | "forbidden_cell" | "token_ceiling"
  std::string detail;
};

enum class TerminationReason {
  evaluator_complete,
  budget_exhausted,
  no_legal_actions,
  governance_halt,
};

std::string to_string(TerminationReason r);
TerminationReason termination_from_string(const std::string& s);

// What one cell execution produced, as reported by the environment.
struct CellOutcome {
  std::vector<std::string> fields_written;
  int evidence_items = 0;
  std::optional<Verdict> verdict;
  int tokens = 0;
  std::optional<FailureKind> failure;
  bool completion = false;  // evaluator only
};

struct TraceEvent {
  int step = 0;
  Signature signature;       // folded state at selection time
  ActionId action;
  std::string cell;          // resolved cell (invoke or skip target)
  std::vector<std::string> fields_written;
  int tokens = 0;
  std::optional<FailureKind> failure;  // kind of the last failed attempt, if any
  bool resolved_ok = true;             // false when every attempt failed
  bool completion = false;
  BeliefVector beliefs_after;
  std::int64_t timestamp_us = 0;  // wall clock, in-memory only, never serialized
};

struct Trajectory {
  std::string id;
  std::string task_id;
  TaskClass class_tag = TaskClass::C1;
  std::string arm;  // evaluation bookkeeping, empty outside experiments
  int epoch = 0;
  std::vector<TraceEvent> events;
  std::vector<std::pair<Signature, ActionId>> visited_edges;
  int token_total = 0;
  int retry_count = 0;
  // Oracle ground truth (goal, grounding, coordination, recovery), filled by
  // the evaluation layer after the run; routing never reads it.
  std::optional<std::array<double, 4>> latent_axes;
};

struct RewardBreakdown {
  double quality = 0.0;
  double cost_term = 0.0;
  double retry_term = 0.0;
  double total = 0.0;
  bool judged = false;
};

struct RunReport {
  std::string task_id;
  TaskClass class_tag = TaskClass::C1;
  TerminationReason reason = TerminationReason::no_legal_actions;
  RewardBreakdown reward;
  std::vector<std::pair<Signature, ActionId>> visited_edges;
  int token_total = 0;
  std::optional<GovernanceVerdict> governance;
  int steps = 0;
  int invoked_cells = 0;
  int skipped_cells = 0;
  int failure_events = 0;
};

struct PreflightIssue {
  std::string category;
  std::string message;
};

struct PreflightReport {
  std::vector<PreflightIssue> issues;
  bool ok() const { return issues.empty(); }
};

// Router-side task view: identity plus numeric features. Anything else about
// the task stays inside the environment.
struct TaskRef {
  std::string id;
  TaskFeatures features;
};

// Cell executor boundary. Implementations sample outcomes; the router only
// sees what a real cell would return.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual bool has_cell(const std::string& cell) const = 0;
  virtual CellOutcome execute_cell(const TaskRef& task, const std::string& cell,
                                   const std::string& skill,
                                   const std::string& model,
                                   const Trajectory& so_far, Rng& rng) = 0;
};

struct RouterConfig {
  SignatureConfig signature;
  VariantPool pool = VariantPool::default_pool();
  BudgetConfig budget;
  GovernancePolicy governance;
  double reliability_weight = 0.5;
  bool skip_enabled = true;
  bool learning_enabled = true;
};

PreflightReport preflight(const RouterConfig& config, const Environment& env);

// Default planner: the fixed linear cell order from the pool, independent of
// features. Cells absent from the pool are absent from the plan.
ActivationPlan build_plan(const TaskFeatures& features, const VariantPool& pool);

// Invoke variants of the next unresolved cell, plus (when enabled) skip(X) for
// every still-unresolved cell X as long as at least one other legal action
// would remain. Never contains terminate.
std::vector<ActionId> legal_actions(const ActivationPlan& plan,
                                    const BudgetState& budget,
                                    const VariantPool& pool, bool skip_enabled);

struct TerminationInputs {
  bool evaluator_complete = false;
  BudgetState budget;
  bool legal_empty = false;
  bool governance_halted = false;
};

// Precedence: evaluator_complete, budget_exhausted, no_legal_actions,
// governance_halt. Returns nothing while the run may continue.
std::optional<TerminationReason> check_termination(const TerminationInputs& in);

std::optional<GovernanceVerdict> governance_check(
    const std::vector<TraceEvent>& trace, const GovernancePolicy& policy);

// One full task run. Selection state flows policy_rng; cell outcomes flow
// env_rng so identical action prefixes see identical environment draws.
// Reward judging and backup happen in the caller after the run.
std::pair<Trajectory, RunReport> run_task(const TaskRef& task,
                                          PolicyGraph& graph, Environment& env,
                                          const RouterConfig& config,
                                          Rng& policy_rng, Rng& env_rng);

// Structured text form of a RunReport (stable field order).
std::string report_to_document(const RunReport& report);

}  // namespace agensflow
