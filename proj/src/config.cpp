#include "agensflow/config.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace agensflow {
namespace {

using nlohmann::json;

[[noreturn]] void corrupt(const std::string& what) {
  throw std::runtime_error("config document: " + what);
}

struct DeltaField {
  const char* name;
  double BeliefDeltaTable::*member;
};

constexpr std::array<DeltaField, 22> kDeltaFields = {{
    {"planner_handoff", &BeliefDeltaTable::planner_handoff},
    {"planner_uncertainty", &BeliefDeltaTable::planner_uncertainty},
    {"memory_evidence_per_item", &BeliefDeltaTable::memory_evidence_per_item},
    {"memory_evidence_cap", &BeliefDeltaTable::memory_evidence_cap},
    {"memory_uncertainty", &BeliefDeltaTable::memory_uncertainty},
    {"memory_handoff", &BeliefDeltaTable::memory_handoff},
    {"solver_correctness", &BeliefDeltaTable::solver_correctness},
    {"solver_uncertainty", &BeliefDeltaTable::solver_uncertainty},
    {"solver_handoff", &BeliefDeltaTable::solver_handoff},
    {"critic_contradiction", &BeliefDeltaTable::critic_contradiction},
    {"critic_uncertainty", &BeliefDeltaTable::critic_uncertainty},
    {"verifier_supported_correctness",
     &BeliefDeltaTable::verifier_supported_correctness},
    {"verifier_supported_uncertainty",
     &BeliefDeltaTable::verifier_supported_uncertainty},
    {"verifier_supported_contradiction",
     &BeliefDeltaTable::verifier_supported_contradiction},
    {"verifier_supported_evidence",
     &BeliefDeltaTable::verifier_supported_evidence},
    {"verifier_refuted_correctness",
     &BeliefDeltaTable::verifier_refuted_correctness},
    {"verifier_refuted_uncertainty",
     &BeliefDeltaTable::verifier_refuted_uncertainty},
    {"verifier_refuted_contradiction",
     &BeliefDeltaTable::verifier_refuted_contradiction},
    {"verifier_inconclusive_uncertainty",
     &BeliefDeltaTable::verifier_inconclusive_uncertainty},
    {"synthesiser_correctness", &BeliefDeltaTable::synthesiser_correctness},
    {"synthesiser_handoff", &BeliefDeltaTable::synthesiser_handoff},
    {"synthesiser_uncertainty", &BeliefDeltaTable::synthesiser_uncertainty},
}};

struct RuleField {
  const char* name;
  double RegimeRules::*member;
};

constexpr std::array<RuleField, 7> kRuleFields = {{
    {"contradictory_risk", &RegimeRules::contradictory_risk},
    {"high_risk_verification", &RegimeRules::high_risk_verification},
    {"ambiguous_ambiguity", &RegimeRules::ambiguous_ambiguity},
    {"evidence_heavy_availability", &RegimeRules::evidence_heavy_availability},
    {"evidence_heavy_verification", &RegimeRules::evidence_heavy_verification},
    {"exploratory_ambiguity", &RegimeRules::exploratory_ambiguity},
    {"exploratory_availability", &RegimeRules::exploratory_availability},
}};

json signature_to_json(const SignatureConfig& sc) {
  json j;
  j["granularity"] = sc.granularity;
  j["initial_beliefs"] = {
      {"correctness", sc.initial_beliefs.correctness},
      {"uncertainty", sc.initial_beliefs.uncertainty},
      {"contradiction_risk", sc.initial_beliefs.contradiction_risk},
      {"evidence_sufficiency", sc.initial_beliefs.evidence_sufficiency},
      {"handoff_quality", sc.initial_beliefs.handoff_quality},
  };
  json rules;
  for (const auto& f : kRuleFields) rules[f.name] = sc.regime_rules.*(f.member);
  j["regime_rules"] = rules;
  json deltas;
  for (const auto& f : kDeltaFields) deltas[f.name] = sc.belief_deltas.*(f.member);
  j["belief_deltas"] = deltas;
  return j;
}

SignatureConfig signature_from_json(const json& j, SignatureConfig sc) {
  if (j.contains("granularity")) sc.granularity = j.at("granularity").get<int>();
  if (j.contains("initial_beliefs")) {
    const auto& b = j.at("initial_beliefs");
    auto overlay = [&](const char* key, double& target) {
      if (b.contains(key)) target = b.at(key).get<double>();
    };
    overlay("correctness", sc.initial_beliefs.correctness);
    overlay("uncertainty", sc.initial_beliefs.uncertainty);
    overlay("contradiction_risk", sc.initial_beliefs.contradiction_risk);
    overlay("evidence_sufficiency", sc.initial_beliefs.evidence_sufficiency);
    overlay("handoff_quality", sc.initial_beliefs.handoff_quality);
  }
  if (j.contains("regime_rules")) {
    const auto& r = j.at("regime_rules");
    for (const auto& f : kRuleFields)
      if (r.contains(f.name)) sc.regime_rules.*(f.member) = r.at(f.name).get<double>();
  }
  if (j.contains("belief_deltas")) {
    const auto& d = j.at("belief_deltas");
    for (const auto& f : kDeltaFields)
      if (d.contains(f.name)) sc.belief_deltas.*(f.member) = d.at(f.name).get<double>();
  }
  return sc;
}

json pool_to_json(const VariantPool& pool) {
  json cells = json::array();
  for (const auto& cell : pool.cells) {
    json cj;
    cj["name"] = cell.name;
    cj["role"] = to_string(cell.role);
    json variants = json::array();
    for (const auto& v : cell.variants)
      variants.push_back(json{{"skill", v.skill}, {"model", v.model}});
    cj["variants"] = variants;
    cj["default_variant"] = cell.default_variant;
    cells.push_back(std::move(cj));
  }
  return json{{"cells", cells}};
}

VariantPool pool_from_json(const json& j) {
  VariantPool pool;
  if (!j.contains("cells") || !j.at("cells").is_array())
    corrupt("pool needs a cells array");
  for (const auto& cj : j.at("cells")) {
    VariantPool::Cell cell;
    cell.name = cj.at("name").get<std::string>();
    cell.role = role_from_string(cj.at("role").get<std::string>());
    for (const auto& vj : cj.at("variants"))
      cell.variants.push_back(VariantPool::Variant{
          vj.at("skill").get<std::string>(), vj.at("model").get<std::string>()});
    if (cj.contains("default_variant"))
      cell.default_variant = cj.at("default_variant").get<std::size_t>();
    pool.cells.push_back(std::move(cell));
  }
  return pool;
}

}  // namespace

std::string config_to_document(const Config& config) {
  json j;
  j["signature"] = signature_to_json(config.router.signature);
  j["pool"] = pool_to_json(config.router.pool);
  j["budget"] = {
      {"max_steps", config.router.budget.max_steps},
      {"token_cap", config.router.budget.token_cap},
  };
  j["governance"] = {
      {"max_consecutive_failures",
       config.router.governance.max_consecutive_failures},
      {"forbidden_cells", config.router.governance.forbidden_cells},
      {"hard_token_ceiling", config.router.governance.hard_token_ceiling},
  };
  j["policy"] = {
      {"reliability_weight", config.router.reliability_weight},
      {"skip_enabled", config.router.skip_enabled},
      {"learning_enabled", config.router.learning_enabled},
  };
  j["reward"] = {
      {"quality_weight", config.reward.weights.w_quality},
      {"cost_weight", config.reward.weights.w_cost},
      {"retry_weight", config.reward.weights.w_retry},
      {"token_cap", config.reward.weights.token_cap},
      {"axis_weights", config.reward.axis_weights},
      {"sigma_max", config.reward.sigma_max},
      {"live_judge", config.reward.live_judge},
      {"audit_judges", config.reward.audit_judges},
      {"bias_probe_judge", config.reward.bias_probe_judge},
  };
  return j.dump(2) + "\n";
}

Config config_from_document(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    corrupt(e.what());
  }
  if (!j.is_object()) corrupt("top level must be an object");
  Config cfg;
  try {
    if (j.contains("signature"))
      cfg.router.signature =
          signature_from_json(j.at("signature"), cfg.router.signature);
    if (j.contains("pool")) cfg.router.pool = pool_from_json(j.at("pool"));
    if (j.contains("budget")) {
      const auto& b = j.at("budget");
      if (b.contains("max_steps"))
        cfg.router.budget.max_steps = b.at("max_steps").get<int>();
      if (b.contains("token_cap"))
        cfg.router.budget.token_cap = b.at("token_cap").get<int>();
    }
    if (j.contains("governance")) {
      const auto& g = j.at("governance");
      if (g.contains("max_consecutive_failures"))
        cfg.router.governance.max_consecutive_failures =
            g.at("max_consecutive_failures").get<int>();
      if (g.contains("forbidden_cells")) {
        cfg.router.governance.forbidden_cells.clear();
        for (const auto& c : g.at("forbidden_cells"))
          cfg.router.governance.forbidden_cells.insert(c.get<std::string>());
      }
      if (g.contains("hard_token_ceiling"))
        cfg.router.governance.hard_token_ceiling =
            g.at("hard_token_ceiling").get<int>();
    }
    if (j.contains("policy")) {
      const auto& p = j.at("policy");
      if (p.contains("reliability_weight"))
        cfg.router.reliability_weight = p.at("reliability_weight").get<double>();
      if (p.contains("skip_enabled"))
        cfg.router.skip_enabled = p.at("skip_enabled").get<bool>();
      if (p.contains("learning_enabled"))
        cfg.router.learning_enabled = p.at("learning_enabled").get<bool>();
    }
    if (j.contains("reward")) {
      const auto& r = j.at("reward");
      if (r.contains("quality_weight"))
        cfg.reward.weights.w_quality = r.at("quality_weight").get<double>();
      if (r.contains("cost_weight"))
        cfg.reward.weights.w_cost = r.at("cost_weight").get<double>();
      if (r.contains("retry_weight"))
        cfg.reward.weights.w_retry = r.at("retry_weight").get<double>();
      if (r.contains("token_cap"))
        cfg.reward.weights.token_cap = r.at("token_cap").get<int>();
      if (r.contains("axis_weights")) {
        const auto& w = r.at("axis_weights");
        if (!w.is_array() || w.size() != kAxisCount)
          corrupt("axis_weights needs 4 values");
        for (std::size_t i = 0; i < kAxisCount; ++i)
          cfg.reward.axis_weights[i] = w[i].get<double>();
      }
      if (r.contains("sigma_max"))
        cfg.reward.sigma_max = r.at("sigma_max").get<double>();
      if (r.contains("live_judge"))
        cfg.reward.live_judge = r.at("live_judge").get<std::string>();
      if (r.contains("audit_judges")) {
        cfg.reward.audit_judges.clear();
        for (const auto& id : r.at("audit_judges"))
          cfg.reward.audit_judges.push_back(id.get<std::string>());
      }
      if (r.contains("bias_probe_judge"))
        cfg.reward.bias_probe_judge = r.at("bias_probe_judge").get<std::string>();
    }
  } catch (const json::exception& e) {
    corrupt(e.what());
  }
  return cfg;
}

Config load_config(const std::string& path) {
  return config_from_document(read_text_file(path));
}

void save_config(const Config& config, const std::string& path) {
  write_text_file(path, config_to_document(config));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace agensflow
