#include "agensflow/sim_env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace agensflow {
namespace {

using nlohmann::json;

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::array<double, 4> to_array(const AxisScores& a) {
  return {a.goal_achievement, a.grounding, a.coordination, a.recovery};
}

AxisScores from_array(const std::array<double, 4>& v) {
  return AxisScores{v[0], v[1], v[2], v[3]};
}

const std::array<TaskClass, 8> kAllClasses = {
    TaskClass::C1, TaskClass::C2, TaskClass::C3, TaskClass::C4,
    TaskClass::C5, TaskClass::C6, TaskClass::C7, TaskClass::C8};

std::string token_key(const std::string& skill, const std::string& model) {
  return skill + "@" + model;
}

// Solver goal bases keyed (concise, cot, evidence) plus model adjustments.
void add_solver_table(EnvClassParams& cp, double concise, double cot,
                      double evidence, double adj_haiku, double adj_fast,
                      double adj_mini) {
  cp.skill_quality["solver_concise"] = SkillQuality{concise, 0.04};
  cp.skill_quality["solver_cot"] = SkillQuality{cot, 0.06};
  cp.skill_quality["solver_evidence"] = SkillQuality{evidence, 0.10};
  cp.solver_model_adj = {{"haiku", adj_haiku}, {"fast", adj_fast},
                         {"mini", adj_mini}};
}

void validate_class_params(TaskClass tag, const EnvClassParams& cp) {
  for (double m : cp.feature_mean) {
    if (m < 0.0 || m > 1.0)
      throw std::invalid_argument("feature mean outside [0,1] for class " +
                                  to_string(tag));
  }
  if (cp.feature_spread < 0.0)
    throw std::invalid_argument("negative feature spread for class " +
                                to_string(tag));
  if (cp.floor < 0.0 || cp.floor > 1.0)
    throw std::invalid_argument("quality floor outside [0,1] for class " +
                                to_string(tag));
  double p = 0.0;
  for (double v : cp.verdict_probs) {
    if (v < 0.0) throw std::invalid_argument("negative verdict probability");
    p += v;
  }
  if (std::abs(p - 1.0) > 1e-9)
    throw std::invalid_argument("verdict probabilities must sum to 1 for " +
                                to_string(tag));
}

[[noreturn]] void corrupt(const std::string& what) {
  throw std::runtime_error("environment config document: " + what);
}

}  // namespace

EnvConfig EnvConfig::default_config() {
  EnvConfig cfg;

  auto make_class = [](std::array<double, 4> mean, double floor,
                       std::set<std::string> useless,
                       std::array<double, 3> verdicts) {
    EnvClassParams cp;
    cp.feature_mean = mean;
    cp.floor = floor;
    cp.useless_cells = std::move(useless);
    cp.verdict_probs = verdicts;
    cp.skill_quality["plan_outline"] = SkillQuality{0.12, 0.10};
    cp.skill_quality["memory_lookup"] = SkillQuality{0.12, 0.18};
    return cp;
  };
  const std::array<double, 3> kNoisyVerdicts = {0.3, 0.1, 0.6};
  const std::array<double, 3> kSharpVerdicts = {0.7, 0.15, 0.15};

  // Procedural family: verifier and the second web search are quality-neutral,
  // the evidence-oriented solver on the small model is planted best.
  {
    EnvClassParams cp = make_class({0.15, 0.15, 0.30, 0.15}, 0.28,
                                   {"web_search_b", "verifier"}, kNoisyVerdicts);
    cp.skill_quality["web_query_a"] = SkillQuality{0.03, 0.12};
    add_solver_table(cp, 0.20, 0.14, 0.30, 0.0, 0.02, 0.04);
    cfg.classes[TaskClass::C1] = cp;
    cp.feature_mean = {0.20, 0.15, 0.45, 0.20};
    cp.floor = 0.26;
    cfg.classes[TaskClass::C2] = cp;
    cp.feature_mean = {0.15, 0.20, 0.35, 0.15};
    cp.floor = 0.28;
    cfg.classes[TaskClass::C6] = cp;
  }

  // Coordination-heavy family: verifier and the evidence-bearing cells carry
  // strong quality, the up-front planner is pure overhead, concise solver on
  // the fast model wins. C3, C4, and C8 share one planted action profile.
  {
    EnvClassParams cp = make_class({0.30, 0.30, 0.75, 0.45}, 0.16, {"planner"},
                                   kSharpVerdicts);
    cp.skill_quality.erase("plan_outline");
    cp.skill_quality["web_query_a"] = SkillQuality{0.10, 0.18};
    cp.skill_quality["web_query_b"] = SkillQuality{0.10, 0.16};
    cp.skill_quality["verify_strict"] = SkillQuality{0.16, 0.24};
    cp.skill_quality["verify_light"] = SkillQuality{0.12, 0.18};
    add_solver_table(cp, 0.30, 0.14, 0.20, 0.02, 0.04, 0.0);
    cfg.classes[TaskClass::C3] = cp;
    cp.feature_mean = {0.35, 0.40, 0.75, 0.50};
    cfg.classes[TaskClass::C8] = cp;
    cp.feature_mean = {0.35, 0.25, 0.70, 0.40};
    cp.floor = 0.18;
    cfg.classes[TaskClass::C4] = cp;
  }

  // Ambiguous: one web search helps, verifier is neutral, concise on mini.
  {
    EnvClassParams cp = make_class({0.75, 0.25, 0.30, 0.25}, 0.24,
                                   {"web_search_b", "verifier"}, kNoisyVerdicts);
    cp.skill_quality["web_query_a"] = SkillQuality{0.02, 0.12};
    add_solver_table(cp, 0.30, 0.14, 0.20, 0.0, 0.02, 0.04);
    cfg.classes[TaskClass::C5] = cp;
  }

  // High-risk verification: the default chain-of-thought solver on the large
  // model stays planted-optimal; the planner and second web search are
  // overhead while the verifier carries the largest quality share.
  {
    EnvClassParams cp = make_class({0.30, 0.30, 0.55, 0.85}, 0.18,
                                   {"planner", "web_search_b"}, kSharpVerdicts);
    cp.skill_quality.erase("plan_outline");
    cp.skill_quality["web_query_a"] = SkillQuality{0.10, 0.20};
    cp.skill_quality["verify_strict"] = SkillQuality{0.16, 0.26};
    cp.skill_quality["verify_light"] = SkillQuality{0.12, 0.20};
    add_solver_table(cp, 0.10, 0.30, 0.20, 0.04, 0.02, 0.0);
    cfg.classes[TaskClass::C7] = cp;
  }

  cfg.token_means = {
      {"plan_outline@haiku", 300},   {"memory_lookup@haiku", 500},
      {"web_query_a@haiku", 800},    {"web_query_b@haiku", 800},
      {"solver_concise@mini", 1500}, {"solver_concise@fast", 1600},
      {"solver_concise@haiku", 1700},{"solver_evidence@mini", 1800},
      {"solver_evidence@fast", 1900},{"solver_evidence@haiku", 2000},
      {"solver_cot@mini", 2100},     {"solver_cot@fast", 2300},
      {"solver_cot@haiku", 2500},    {"verify_strict@fast", 1300},
      {"verify_light@mini", 1100},   {"eval_check@haiku", 150},
  };

  // Contrast 2 keeps the best planted trajectory below the score ceiling
  // against the epoch-one floor reference, so early rewards stay ordered.
  SimJudgeModel primary;
  primary.judge_id = "judge_primary";
  primary.contrast = 2.0;
  cfg.judge_models[primary.judge_id] = primary;

  SimJudgeModel audit_a;
  audit_a.judge_id = "judge_audit_a";
  audit_a.bias[TaskClass::C3] = AxisScores{0.0, 0.02, 0.0, 0.0};
  audit_a.bias[TaskClass::C5] = AxisScores{-0.01, 0.0, 0.0, 0.0};
  cfg.judge_models[audit_a.judge_id] = audit_a;

  SimJudgeModel audit_b;
  audit_b.judge_id = "judge_audit_b";
  audit_b.bias[TaskClass::C1] = AxisScores{0.0, 0.0, -0.02, 0.0};
  audit_b.bias[TaskClass::C7] = AxisScores{0.01, 0.0, 0.0, 0.0};
  cfg.judge_models[audit_b.judge_id] = audit_b;

  SimJudgeModel audit_c;
  audit_c.judge_id = "judge_audit_c";
  audit_c.bias[TaskClass::C4] = AxisScores{0.0, 0.01, 0.0, 0.015};
  audit_c.bias[TaskClass::C8] = AxisScores{0.0, -0.01, 0.0, 0.0};
  cfg.judge_models[audit_c.judge_id] = audit_c;

  SimJudgeModel favoring;
  favoring.judge_id = "judge_favoring_warm";
  favoring.favored_arm = "warm_start";
  favoring.arm_bias = 0.06;
  cfg.judge_models[favoring.judge_id] = favoring;

  return cfg;
}

EnvConfig make_transfer_variant(const EnvConfig& config) {
  EnvConfig cfg = config;
  // Rotate model adjustments: planted-best model moves, skills keep ordering.
  for (auto& [tag, cp] : cfg.classes) {
    auto rotated = cp.solver_model_adj;
    auto pick = [&](const char* model) {
      auto it = cp.solver_model_adj.find(model);
      return it == cp.solver_model_adj.end() ? 0.0 : it->second;
    };
    if (!cp.solver_model_adj.empty()) {
      rotated["haiku"] = pick("mini");
      rotated["fast"] = pick("haiku");
      rotated["mini"] = pick("fast");
    }
    cp.solver_model_adj = rotated;
  }
  for (auto& [key, mean] : cfg.token_means) {
    if (key.rfind("solver_", 0) == 0)
      mean = static_cast<int>(std::lround(mean * 1.1));
    else if (key.rfind("web_query", 0) == 0)
      mean = static_cast<int>(std::lround(mean * 0.9));
  }
  return cfg;
}

EnvConfig EnvConfig::transfer_config() {
  return make_transfer_variant(default_config());
}

std::vector<SyntheticTask> generate_corpus(const EnvConfig& config, int count,
                                           std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("corpus count must be >= 1");
  if (config.classes.empty())
    throw std::invalid_argument("environment config has no classes");
  double mix_total = 0.0;
  for (double w : config.class_mix) {
    if (w < 0.0) throw std::invalid_argument("negative class mix weight");
    mix_total += w;
  }
  if (mix_total <= 0.0)
    throw std::invalid_argument("class mix weights sum to zero");

  // Largest-remainder apportionment of count over the mix.
  std::array<int, 8> quota{};
  std::array<double, 8> frac{};
  int assigned = 0;
  for (std::size_t i = 0; i < kAllClasses.size(); ++i) {
    double share = config.class_mix[i] / mix_total * count;
    quota[i] = static_cast<int>(std::floor(share));
    frac[i] = share - quota[i];
    assigned += quota[i];
  }
  std::array<std::size_t, 8> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (int r = 0; r < count - assigned; ++r) quota[order[r % 8]] += 1;

  Rng rng(Rng::combine(seed, 0x636f7270757321ULL));
  std::vector<SyntheticTask> tasks;
  tasks.reserve(count);
  std::array<int, 8> remaining = quota;
  while (static_cast<int>(tasks.size()) < count) {
    for (std::size_t i = 0; i < kAllClasses.size(); ++i) {
      if (remaining[i] == 0) continue;
      remaining[i] -= 1;
      TaskClass tag = kAllClasses[i];
      auto it = config.classes.find(tag);
      if (it == config.classes.end())
        throw std::invalid_argument("class mix selects unconfigured class " +
                                    to_string(tag));
      const EnvClassParams& cp = it->second;
      SyntheticTask t;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "t%03zu_%s", tasks.size(),
                    to_string(tag).c_str());
      t.id = buf;
      t.class_tag = tag;
      t.features.ambiguity =
          clamp01(rng.normal(cp.feature_mean[0], cp.feature_spread));
      t.features.contradiction_risk =
          clamp01(rng.normal(cp.feature_mean[1], cp.feature_spread));
      t.features.evidence_availability =
          clamp01(rng.normal(cp.feature_mean[2], cp.feature_spread));
      t.features.verification_need =
          clamp01(rng.normal(cp.feature_mean[3], cp.feature_spread));
      t.features.class_tag = tag;
      t.latent_difficulty =
          rng.uniform(config.difficulty_lo, config.difficulty_hi);
      tasks.push_back(std::move(t));
    }
  }
  return tasks;
}

SimEnvironment::SimEnvironment(EnvConfig config, const VariantPool& pool)
    : config_(std::move(config)), pool_(pool) {
  if (pool_.empty()) throw std::invalid_argument("empty variant pool");
  if (config_.classes.empty())
    throw std::invalid_argument("environment config has no classes");
  for (const auto& [tag, cp] : config_.classes) validate_class_params(tag, cp);
  if (config_.failure_prob < 0.0 || config_.failure_prob > 1.0)
    throw std::invalid_argument("failure probability outside [0,1]");
  if (config_.difficulty_lo > config_.difficulty_hi)
    throw std::invalid_argument("difficulty bounds inverted");
  for (const auto& cell : pool_.cells) {
    cell_roles_[cell.name] = cell.role;
    for (const auto& v : cell.variants) {
      if (config_.token_means.find(token_key(v.skill, v.model)) ==
          config_.token_means.end())
        throw std::invalid_argument("no token mean configured for " +
                                    token_key(v.skill, v.model));
    }
  }
}

void SimEnvironment::register_corpus(const std::vector<SyntheticTask>& tasks) {
  for (const auto& t : tasks) register_task(t);
}

void SimEnvironment::register_task(const SyntheticTask& task) {
  if (task.id.empty()) throw std::invalid_argument("task id must be nonempty");
  tasks_.insert_or_assign(task.id, task);
}

bool SimEnvironment::has_cell(const std::string& cell) const {
  return cell_roles_.find(cell) != cell_roles_.end();
}

SyntheticTask SimEnvironment::resolve_task(const TaskRef& ref) const {
  auto it = tasks_.find(ref.id);
  if (it != tasks_.end()) return it->second;
  // Unregistered (hand-written) task: class from features, median difficulty.
  SyntheticTask t;
  t.id = ref.id;
  t.class_tag = ref.features.class_tag;
  t.features = ref.features;
  t.latent_difficulty = 0.5;
  return t;
}

double SimEnvironment::quality_jitter(const std::string& task_id,
                                      const std::string& skill) const {
  std::uint64_t h =
      Rng::mix64(Rng::combine(Rng::hash_str(task_id), Rng::hash_str(skill)));
  double unit = static_cast<double>(h >> 11) * 0x1.0p-53;
  return config_.quality_jitter * (2.0 * unit - 1.0);
}

CellModel SimEnvironment::cell_model(TaskClass class_tag,
                                     const std::string& cell,
                                     const std::string& skill,
                                     const std::string& model) const {
  auto role_it = cell_roles_.find(cell);
  if (role_it == cell_roles_.end())
    throw std::invalid_argument("unregistered cell: " + cell);
  auto class_it = config_.classes.find(class_tag);
  if (class_it == config_.classes.end())
    throw std::invalid_argument("unconfigured class: " + to_string(class_tag));
  auto token_it = config_.token_means.find(token_key(skill, model));
  if (token_it == config_.token_means.end())
    throw std::invalid_argument("no token mean configured for " +
                                token_key(skill, model));
  const EnvClassParams& cp = class_it->second;

  CellModel m;
  m.cell = cell;
  m.role = role_it->second;
  m.token_mean = token_it->second;
  m.token_spread = m.token_mean * config_.token_spread_frac;
  m.failure_prob = config_.failure_prob;
  if (cp.useless_cells.find(cell) == cp.useless_cells.end()) {
    auto q = cp.skill_quality.find(skill);
    if (q != cp.skill_quality.end()) {
      m.goal_delta = q->second.goal;
      m.grounding_delta = q->second.grounding;
      m.delta_spread = config_.quality_jitter;
      if (m.role == AgentRole::solver) {
        auto adj = cp.solver_model_adj.find(model);
        if (adj != cp.solver_model_adj.end()) m.goal_delta += adj->second;
      }
    }
  }
  switch (m.role) {
    case AgentRole::planner:
      m.fields_written = {"goal", "subproblem"};
      break;
    case AgentRole::memory:
      m.fields_written = {"evidence"};
      break;
    case AgentRole::solver:
      m.fields_written = {"draft_answer"};
      break;
    case AgentRole::critic:
      m.fields_written = {"critique"};
      break;
    case AgentRole::verifier:
      m.fields_written = {"verification"};
      break;
    case AgentRole::synthesiser:
      m.fields_written = {"merged_answer"};
      break;
    case AgentRole::evaluator:
      break;
  }
  return m;
}

double SimEnvironment::partial_goal(const Trajectory& so_far,
                                    const TaskRef& task) const {
  return latent_quality(so_far, resolve_task(task)).goal_achievement;
}

CellOutcome SimEnvironment::execute_cell(const TaskRef& task,
                                         const std::string& cell,
                                         const std::string& skill,
                                         const std::string& model,
                                         const Trajectory& so_far, Rng& rng) {
  SyntheticTask st = resolve_task(task);
  CellModel m = cell_model(st.class_tag, cell, skill, model);

  // Fixed draw order per attempt: failure, tokens, then role-specific draws.
  bool failed = rng.bernoulli(m.failure_prob);
  double tok = rng.normal(m.token_mean, m.token_spread);
  CellOutcome out;
  out.tokens = static_cast<int>(std::max<long>(1, std::lround(tok)));
  if (failed) {
    out.failure = FailureKind::recoverable_execution;
    return out;
  }

  out.fields_written = m.fields_written;
  switch (m.role) {
    case AgentRole::memory:
      out.evidence_items = cell == "memory" ? config_.memory_evidence_items
                                            : config_.web_evidence_items;
      break;
    case AgentRole::verifier: {
      const auto& p = config_.classes.at(st.class_tag).verdict_probs;
      double u = rng.uniform();
      if (u < p[0])
        out.verdict = Verdict::supported;
      else if (u < p[0] + p[1])
        out.verdict = Verdict::refuted;
      else
        out.verdict = Verdict::inconclusive;
      break;
    }
    case AgentRole::evaluator: {
      double goal = partial_goal(so_far, task);
      double p = std::min(
          0.98, std::max(0.05, config_.completion_base +
                                   config_.completion_gain * goal));
      out.completion = rng.bernoulli(p);
      break;
    }
    default:
      break;
  }
  return out;
}

AxisScores SimEnvironment::latent_quality(const Trajectory& trajectory,
                                          const SyntheticTask& task) const {
  auto class_it = config_.classes.find(task.class_tag);
  if (class_it == config_.classes.end())
    throw std::invalid_argument("unconfigured class: " +
                                to_string(task.class_tag));
  const EnvClassParams& cp = class_it->second;

  double base = cp.floor - config_.difficulty_weight * task.latent_difficulty;
  std::array<double, 4> ax = {base, base, base, base};
  int useful = 0;
  int useless = 0;
  for (const TraceEvent& ev : trajectory.events) {
    if (ev.action.kind != ActionId::Kind::invoke) continue;
    if (ev.failure && ev.resolved_ok) ax[3] += config_.recovery_bonus;
    if (!ev.resolved_ok) ax[3] -= config_.recovery_penalty;
    if (cp.useless_cells.find(ev.cell) != cp.useless_cells.end()) {
      ++useless;
      continue;
    }
    if (!ev.resolved_ok) continue;
    ++useful;
    auto q = cp.skill_quality.find(ev.action.skill);
    if (q != cp.skill_quality.end()) {
      double jit = quality_jitter(task.id, ev.action.skill);
      ax[0] += q->second.goal + jit;
      ax[1] += q->second.grounding + jit;
      auto role_it = cell_roles_.find(ev.cell);
      if (role_it != cell_roles_.end() && role_it->second == AgentRole::solver) {
        auto adj = cp.solver_model_adj.find(ev.action.model);
        if (adj != cp.solver_model_adj.end()) ax[0] += adj->second;
      }
    }
  }
  ax[2] += config_.useful_coordination_bonus * useful -
           config_.useless_coordination_penalty * useless;
  for (double& v : ax) v = clamp01(v);
  return from_array(ax);
}

AxisScores SimEnvironment::latent_quality(const Trajectory& trajectory) const {
  auto it = tasks_.find(trajectory.task_id);
  if (it != tasks_.end()) return latent_quality(trajectory, it->second);
  SyntheticTask t;
  t.id = trajectory.task_id;
  t.class_tag = trajectory.class_tag;
  t.features.class_tag = trajectory.class_tag;
  t.latent_difficulty = 0.5;
  return latent_quality(trajectory, t);
}

PlantedOptimum SimEnvironment::planted_optimum(TaskClass class_tag) const {
  auto class_it = config_.classes.find(class_tag);
  if (class_it == config_.classes.end())
    throw std::invalid_argument("unconfigured class: " + to_string(class_tag));
  const EnvClassParams& cp = class_it->second;

  PlantedOptimum opt;
  opt.class_tag = class_tag;
  opt.skip_neutral_cells = cp.useless_cells;

  double mean_difficulty = 0.5 * (config_.difficulty_lo + config_.difficulty_hi);
  double base = cp.floor - config_.difficulty_weight * mean_difficulty;
  std::array<double, 4> ax = {base, base, base, base};
  int useful = 0;
  for (const auto& cell : pool_.cells) {
    if (cp.useless_cells.find(cell.name) != cp.useless_cells.end()) continue;
    // Best variant by planted quality sum, tokens breaking ties downward.
    const VariantPool::Variant* best = nullptr;
    double best_value = 0.0;
    double best_tokens = 0.0;
    for (const auto& v : cell.variants) {
      double value = 0.0;
      auto q = cp.skill_quality.find(v.skill);
      if (q != cp.skill_quality.end()) {
        value = q->second.goal + q->second.grounding;
        if (cell.role == AgentRole::solver) {
          auto adj = cp.solver_model_adj.find(v.model);
          if (adj != cp.solver_model_adj.end()) value += adj->second;
        }
      }
      double tokens = config_.token_means.at(token_key(v.skill, v.model));
      if (best == nullptr || value > best_value + 1e-12 ||
          (std::abs(value - best_value) <= 1e-12 && tokens < best_tokens)) {
        best = &v;
        best_value = value;
        best_tokens = tokens;
      }
    }
    if (best == nullptr) continue;
    ++useful;
    opt.expected_tokens += best_tokens;
    auto q = cp.skill_quality.find(best->skill);
    if (q != cp.skill_quality.end()) {
      ax[0] += q->second.goal;
      ax[1] += q->second.grounding;
      if (cell.role == AgentRole::solver) {
        auto adj = cp.solver_model_adj.find(best->model);
        if (adj != cp.solver_model_adj.end()) ax[0] += adj->second;
      }
    }
    if (cell.role == AgentRole::solver) {
      opt.best_skill = best->skill;
      opt.best_model = best->model;
    }
  }
  ax[2] += config_.useful_coordination_bonus * useful;
  for (double& v : ax) v = clamp01(v);
  opt.expected_quality = (ax[0] + ax[1] + ax[2] + ax[3]) / 4.0;
  return opt;
}

const SyntheticTask& SimEnvironment::task(const std::string& id) const {
  auto it = tasks_.find(id);
  if (it == tasks_.end())
    throw std::invalid_argument("unknown task id: " + id);
  return it->second;
}

bool SimEnvironment::knows_task(const std::string& id) const {
  return tasks_.find(id) != tasks_.end();
}

std::vector<AxisScores> sim_judge(const std::vector<const Trajectory*>& group,
                                  const SimJudgeModel& judge,
                                  const SimEnvironment& env, Rng& rng) {
  if (group.size() < 2)
    throw std::invalid_argument("judge group needs at least 2 trajectories");
  for (const Trajectory* t : group)
    if (t == nullptr) throw std::invalid_argument("null trajectory in group");
  if (judge.noise_spread < 0.0)
    throw std::invalid_argument("negative judge noise spread");
  if (judge.contrast <= 0.0)
    throw std::invalid_argument("judge contrast must be positive");

  std::vector<std::array<double, 4>> latent;
  latent.reserve(group.size());
  std::array<double, 4> mu{};
  for (const Trajectory* t : group) {
    latent.push_back(to_array(env.latent_quality(*t)));
    for (int a = 0; a < 4; ++a) mu[a] += latent.back()[a];
  }
  for (int a = 0; a < 4; ++a) mu[a] /= static_cast<double>(group.size());

  // One salt per scoring call, fanned out by trajectory id so that group
  // order never changes any trajectory's noise.
  std::uint64_t salt = rng.next_u64();
  std::vector<AxisScores> scores;
  scores.reserve(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    const Trajectory& t = *group[i];
    Rng traj_rng(Rng::combine(salt, Rng::hash_str(t.id)));
    const AxisScores* bias = nullptr;
    auto b = judge.bias.find(t.class_tag);
    if (b != judge.bias.end()) bias = &b->second;
    double favored =
        (!judge.favored_arm.empty() && t.arm == judge.favored_arm)
            ? judge.arm_bias
            : 0.0;
    std::array<double, 4> s{};
    for (int a = 0; a < 4; ++a) {
      double noise = traj_rng.normal(0.0, judge.noise_spread);
      double centered = mu[a] + judge.contrast * (latent[i][a] - mu[a]);
      double biased = centered + (bias ? to_array(*bias)[a] : 0.0) + favored;
      s[a] = clamp01(biased + noise);
    }
    scores.push_back(from_array(s));
  }
  return scores;
}

SimJudge::SimJudge(SimJudgeModel model, const SimEnvironment& env)
    : model_(std::move(model)), env_(env) {
  if (model_.judge_id.empty())
    throw std::invalid_argument("judge id must be nonempty");
}

std::vector<AxisScores> SimJudge::score_group(
    const std::vector<const Trajectory*>& group) {
  // Deterministic in (judge id, set of trajectory ids): audits re-running the
  // same group reproduce identical scores.
  std::vector<std::string> ids;
  ids.reserve(group.size());
  for (const Trajectory* t : group)
    if (t != nullptr) ids.push_back(t->id);
  std::sort(ids.begin(), ids.end());
  std::string joined;
  for (const auto& id : ids) {
    joined += id;
    joined += '\n';
  }
  Rng group_rng(
      Rng::combine(Rng::hash_str(model_.judge_id), Rng::hash_str(joined)));
  return sim_judge(group, model_, env_, group_rng);
}

Trajectory make_reference_trajectory(const SyntheticTask& task) {
  // No events: latent quality sits exactly at the class floor (difficulty
  // shifted), the weakest same-class peer a trajectory can be judged against.
  Trajectory ref;
  ref.id = "ref:" + task.id;
  ref.task_id = task.id;
  ref.class_tag = task.class_tag;
  return ref;
}

namespace {

json axis_to_json(const AxisScores& a) {
  return json::array({a.goal_achievement, a.grounding, a.coordination,
                      a.recovery});
}

AxisScores axis_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) corrupt("axis bias must be 4 numbers");
  for (const auto& v : j)
    if (!v.is_number()) corrupt("axis bias must be 4 numbers");
  return AxisScores{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                    j[3].get<double>()};
}

json class_params_to_json(const EnvClassParams& cp) {
  json j;
  j["feature_mean"] = cp.feature_mean;
  j["feature_spread"] = cp.feature_spread;
  j["floor"] = cp.floor;
  json sq = json::object();
  for (const auto& [skill, q] : cp.skill_quality)
    sq[skill] = json{{"goal", q.goal}, {"grounding", q.grounding}};
  j["skill_quality"] = sq;
  j["solver_model_adj"] = cp.solver_model_adj;
  j["useless_cells"] = cp.useless_cells;
  j["verdict_probs"] = cp.verdict_probs;
  return j;
}

EnvClassParams class_params_from_json(const json& j, EnvClassParams cp) {
  if (!j.is_object()) corrupt("class params must be an object");
  if (j.contains("feature_mean")) {
    const auto& fm = j.at("feature_mean");
    if (!fm.is_array() || fm.size() != 4) corrupt("feature_mean needs 4 values");
    for (int i = 0; i < 4; ++i) cp.feature_mean[i] = fm[i].get<double>();
  }
  if (j.contains("feature_spread"))
    cp.feature_spread = j.at("feature_spread").get<double>();
  if (j.contains("floor")) cp.floor = j.at("floor").get<double>();
  if (j.contains("skill_quality")) {
    cp.skill_quality.clear();
    for (const auto& [skill, q] : j.at("skill_quality").items())
      cp.skill_quality[skill] = SkillQuality{q.at("goal").get<double>(),
                                             q.at("grounding").get<double>()};
  }
  if (j.contains("solver_model_adj")) {
    cp.solver_model_adj.clear();
    for (const auto& [model, adj] : j.at("solver_model_adj").items())
      cp.solver_model_adj[model] = adj.get<double>();
  }
  if (j.contains("useless_cells")) {
    cp.useless_cells.clear();
    for (const auto& c : j.at("useless_cells"))
      cp.useless_cells.insert(c.get<std::string>());
  }
  if (j.contains("verdict_probs")) {
    const auto& vp = j.at("verdict_probs");
    if (!vp.is_array() || vp.size() != 3) corrupt("verdict_probs needs 3 values");
    for (int i = 0; i < 3; ++i) cp.verdict_probs[i] = vp[i].get<double>();
  }
  return cp;
}

json judge_to_json(const SimJudgeModel& m) {
  json j;
  j["noise_spread"] = m.noise_spread;
  j["contrast"] = m.contrast;
  json bias = json::object();
  for (const auto& [tag, b] : m.bias) bias[to_string(tag)] = axis_to_json(b);
  j["bias"] = bias;
  j["favored_arm"] = m.favored_arm;
  j["arm_bias"] = m.arm_bias;
  return j;
}

SimJudgeModel judge_from_json(const std::string& id, const json& j,
                              SimJudgeModel m) {
  m.judge_id = id;
  if (j.contains("noise_spread"))
    m.noise_spread = j.at("noise_spread").get<double>();
  if (j.contains("contrast")) m.contrast = j.at("contrast").get<double>();
  if (j.contains("bias")) {
    m.bias.clear();
    for (const auto& [tag, b] : j.at("bias").items())
      m.bias[task_class_from_string(tag)] = axis_from_json(b);
  }
  if (j.contains("favored_arm"))
    m.favored_arm = j.at("favored_arm").get<std::string>();
  if (j.contains("arm_bias")) m.arm_bias = j.at("arm_bias").get<double>();
  return m;
}

}  // namespace

std::string env_config_to_document(const EnvConfig& config) {
  json j;
  json classes = json::object();
  for (const auto& [tag, cp] : config.classes)
    classes[to_string(tag)] = class_params_to_json(cp);
  j["classes"] = classes;
  j["class_mix"] = config.class_mix;
  j["token_means"] = config.token_means;
  j["token_spread_frac"] = config.token_spread_frac;
  j["quality_jitter"] = config.quality_jitter;
  j["failure_prob"] = config.failure_prob;
  j["difficulty_lo"] = config.difficulty_lo;
  j["difficulty_hi"] = config.difficulty_hi;
  j["difficulty_weight"] = config.difficulty_weight;
  j["useful_coordination_bonus"] = config.useful_coordination_bonus;
  j["useless_coordination_penalty"] = config.useless_coordination_penalty;
  j["recovery_bonus"] = config.recovery_bonus;
  j["recovery_penalty"] = config.recovery_penalty;
  j["completion_base"] = config.completion_base;
  j["completion_gain"] = config.completion_gain;
  j["memory_evidence_items"] = config.memory_evidence_items;
  j["web_evidence_items"] = config.web_evidence_items;
  json judges = json::object();
  for (const auto& [id, m] : config.judge_models) judges[id] = judge_to_json(m);
  j["judge_models"] = judges;
  return j.dump(2) + "\n";
}

EnvConfig env_config_from_document(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    corrupt(e.what());
  }
  if (!j.is_object()) corrupt("top level must be an object");
  // Overlay onto defaults: absent fields keep their default values.
  EnvConfig cfg = EnvConfig::default_config();
  try {
    if (j.contains("classes")) {
      for (const auto& [tag, cj] : j.at("classes").items()) {
        TaskClass t = task_class_from_string(tag);
        EnvClassParams base;
        auto it = cfg.classes.find(t);
        if (it != cfg.classes.end()) base = it->second;
        cfg.classes[t] = class_params_from_json(cj, std::move(base));
      }
    }
    if (j.contains("class_mix")) {
      const auto& mix = j.at("class_mix");
      if (!mix.is_array() || mix.size() != 8) corrupt("class_mix needs 8 weights");
      for (int i = 0; i < 8; ++i) cfg.class_mix[i] = mix[i].get<double>();
    }
    if (j.contains("token_means")) {
      cfg.token_means.clear();
      for (const auto& [key, mean] : j.at("token_means").items())
        cfg.token_means[key] = mean.get<int>();
    }
    auto overlay = [&](const char* key, double& target) {
      if (j.contains(key)) target = j.at(key).get<double>();
    };
    overlay("token_spread_frac", cfg.token_spread_frac);
    overlay("quality_jitter", cfg.quality_jitter);
    overlay("failure_prob", cfg.failure_prob);
    overlay("difficulty_lo", cfg.difficulty_lo);
    overlay("difficulty_hi", cfg.difficulty_hi);
    overlay("difficulty_weight", cfg.difficulty_weight);
    overlay("useful_coordination_bonus", cfg.useful_coordination_bonus);
    overlay("useless_coordination_penalty", cfg.useless_coordination_penalty);
    overlay("recovery_bonus", cfg.recovery_bonus);
    overlay("recovery_penalty", cfg.recovery_penalty);
    overlay("completion_base", cfg.completion_base);
    overlay("completion_gain", cfg.completion_gain);
    if (j.contains("memory_evidence_items"))
      cfg.memory_evidence_items = j.at("memory_evidence_items").get<int>();
    if (j.contains("web_evidence_items"))
      cfg.web_evidence_items = j.at("web_evidence_items").get<int>();
    if (j.contains("judge_models")) {
      for (const auto& [id, mj] : j.at("judge_models").items()) {
        SimJudgeModel base;
        auto it = cfg.judge_models.find(id);
        if (it != cfg.judge_models.end()) base = it->second;
        cfg.judge_models[id] = judge_from_json(id, mj, std::move(base));
      }
    }
  } catch (const json::exception& e) {
    corrupt(e.what());
  }
  for (const auto& [tag, cp] : cfg.classes) validate_class_params(tag, cp);
  return cfg;
}

std::string corpus_to_document(const std::vector<SyntheticTask>& tasks) {
  json arr = json::array();
  for (const auto& t : tasks) {
    json tj;
    tj["id"] = t.id;
    tj["class"] = to_string(t.class_tag);
    tj["features"] = {
        {"ambiguity", t.features.ambiguity},
        {"contradiction_risk", t.features.contradiction_risk},
        {"evidence_availability", t.features.evidence_availability},
        {"verification_need", t.features.verification_need},
    };
    tj["difficulty"] = t.latent_difficulty;
    arr.push_back(std::move(tj));
  }
  json j;
  j["tasks"] = std::move(arr);
  return j.dump(2) + "\n";
}

std::vector<SyntheticTask> corpus_from_document(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("corpus document: ") + e.what());
  }
  std::vector<SyntheticTask> tasks;
  try {
    for (const auto& tj : j.at("tasks")) {
      SyntheticTask t;
      t.id = tj.at("id").get<std::string>();
      t.class_tag = task_class_from_string(tj.at("class").get<std::string>());
      const auto& f = tj.at("features");
      t.features.ambiguity = f.at("ambiguity").get<double>();
      t.features.contradiction_risk = f.at("contradiction_risk").get<double>();
      t.features.evidence_availability =
          f.at("evidence_availability").get<double>();
      t.features.verification_need = f.at("verification_need").get<double>();
      t.features.class_tag = t.class_tag;
      t.latent_difficulty = tj.at("difficulty").get<double>();
      for (double v :
           {t.features.ambiguity, t.features.contradiction_risk,
            t.features.evidence_availability, t.features.verification_need,
            t.latent_difficulty}) {
        if (v < 0.0 || v > 1.0)
          throw std::runtime_error("corpus document: value outside [0,1]");
      }
      tasks.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("corpus document: ") + e.what());
  }
  return tasks;
}

}  // namespace agensflow
