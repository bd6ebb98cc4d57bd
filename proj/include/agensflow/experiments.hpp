#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agensflow/config.hpp"
#include "agensflow/policy_graph.hpp"
#include "agensflow/reward.hpp"
#include "agensflow/router.hpp"
#include "agensflow/sim_env.hpp"

namespace agensflow {

inline constexpr const char* kArmBaseline = "baseline";
inline constexpr const char* kArmNoSkip = "no_skip";
inline constexpr const char* kArmMain = "main";
inline constexpr const char* kArmWarmStart = "warm_start";

struct ArmConfig {
  std::string arm;  // baseline | no_skip | main | warm_start
  int epochs = 8;
  bool skip_enabled = true;
  bool learning_enabled = true;
  // Graph document path, or "transfer:auto" when the protocol trains the
  // source in process and hands it over in memory.
  std::optional<std::string> warm_start_source;
  double warm_start_discount = 0.5;
  std::uint64_t seed = 0;

  static ArmConfig for_arm(const std::string& arm, int epochs,
                           std::uint64_t seed);
};

// Throws std::invalid_argument when the arm invariants are violated:
// baseline => learning disabled and a single epoch; no_skip => skip disabled;
// warm_start => source required.
void validate_arm(const ArmConfig& arm);

struct EpochRow {
  std::string arm;
  int epoch = 0;
  double mean_live_score = 0.0;
  double mean_audited_score = 0.0;  // filled by the audit step
  double mean_tokens = 0.0;
  double mean_reward = 0.0;  // live hybrid reward backed up during learning
  std::map<std::string, double> skip_rates;  // by cell name
};

struct ArmResult {
  ArmConfig config;
  std::vector<EpochRow> epochs;
  std::vector<Trajectory> trajectories;  // all epochs, corpus order
  std::vector<RunReport> reports;        // parallel to trajectories
  PolicyGraph graph;                     // final state
};

// Mean of the final three epochs (fewer when the arm ran fewer), the paper's
// plateau reporting convention.
double plateau_mean(const std::vector<double>& per_epoch_values);

// Corpus tasks must already be registered with the environment. warm_source,
// when given, overrides loading the graph from arm.warm_start_source. A
// nonempty graph_out_path is overwritten with the graph after every epoch.
ArmResult run_arm(const ArmConfig& arm, const std::vector<SyntheticTask>& corpus,
                  SimEnvironment& env, const Config& config,
                  const PolicyGraph* warm_source = nullptr,
                  const std::string& graph_out_path = {});

struct AuditRow {
  std::string arm;
  int epoch = 0;
  std::string task_id;
  TaskClass class_tag = TaskClass::C1;
  double scalar = 0.0;
  AxisScores axes;
  double confidence = 0.0;
  double axis_population = 1.0;  // all four axes populated by construction
};

struct AuditTable {
  std::vector<std::string> judge_ids;
  std::vector<AuditRow> rows;

  double arm_epoch_mean(const std::string& arm, int epoch) const;
  // Mean audited scalar per class over [from_epoch, to_epoch].
  std::optional<double> arm_class_mean(const std::string& arm, TaskClass cls,
                                       int from_epoch, int to_epoch) const;
  std::vector<double> arm_epoch_series(const std::string& arm,
                                       int max_epoch) const;
};

// Post-hoc re-scoring: one group per (task, epoch) containing every arm's
// trajectory for that task at that epoch, with the baseline's single-pass
// trajectory anchoring every epoch's group. Never mutates any policy graph.
AuditTable audit(const std::vector<const ArmResult*>& arms,
                 const SimEnvironment& env,
                 const std::vector<std::string>& judge_ids,
                 const Config& config);

struct PerClassRow {
  TaskClass class_tag = TaskClass::C1;
  bool present = false;  // class appeared in the corpus
  double baseline_mean = 0.0;
  double arm_mean = 0.0;
  double delta = 0.0;
};

// Plateau audited comparison of `arm` against `against`, one row per class.
std::vector<PerClassRow> per_class_report(const AuditTable& table,
                                          const std::string& arm,
                                          const std::string& against,
                                          int epochs);

struct WarmStartReport {
  std::vector<double> per_epoch_delta;  // warm - cold audited means
  double plateau_delta = 0.0;
  double full_run_delta = 0.0;
  std::vector<long long> cold_cumulative_tokens;  // per epoch, task sum
  std::vector<long long> warm_cumulative_tokens;
};

// Audited per-epoch deltas plus cumulative token comparison between the two
// arms. Epoch-count mismatch is rejected.
WarmStartReport warm_start_comparison(const ArmResult& cold,
                                      const ArmResult& warm,
                                      const AuditTable& table);

// (1 - (1-p)^n)^k: success of a k-stage pipeline with n retries per stage.
double retry_pipeline_success(double p, int n, int k);

struct ProtocolOptions {
  std::vector<std::string> arms = {kArmBaseline, kArmNoSkip, kArmMain,
                                   kArmWarmStart};
  int tasks = 60;
  int epochs = 8;
  std::uint64_t seed = 7;
  std::optional<std::string> env_path;     // environment config document
  std::optional<std::string> config_path;  // substrate config document
  std::string out_dir;                     // empty: no files emitted
  int audit_judge_count = 3;
};

struct ProtocolResult {
  ProtocolOptions options;
  Config config;
  EnvConfig env_config;
  std::vector<SyntheticTask> corpus;
  std::vector<ArmResult> arms;
  AuditTable audit;
  std::vector<PerClassRow> per_class;         // main vs baseline, when present
  std::optional<WarmStartReport> warm_start;  // warm_start vs main, when present

  const ArmResult* find_arm(const std::string& arm) const;
};

// Full four-arm protocol: corpus generation, warm-source training on the
// transfer environment, arm runs, cross-judge audit, reports. When out_dir is
// set, emits every output file there.
ProtocolResult run_protocol(const ProtocolOptions& options);

// Writes learning_curves.csv, audit_rows.csv, per_class_report.csv,
// warm_start_report.csv, corpus/config/graph documents, trajectory archives,
// SVG plots, and manifest.json under out_dir.
void emit_outputs(const ProtocolResult& result, const std::string& out_dir);

// Serialized trajectory archives (one document per arm).
std::string trajectories_to_document(const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> trajectories_from_document(const std::string& text);

std::string learning_curves_csv(const ProtocolResult& result);
std::string audit_rows_csv(const AuditTable& table);
std::string per_class_csv(const std::vector<PerClassRow>& rows);
std::string warm_start_csv(const WarmStartReport& report);

}  // namespace agensflow
