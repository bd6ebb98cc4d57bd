#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agensflow/config.hpp"
#include "agensflow/experiments.hpp"
#include "agensflow/policy_graph.hpp"
#include "agensflow/reward.hpp"
#include "agensflow/router.hpp"
#include "agensflow/sim_env.hpp"
#include "json.hpp"

namespace {

using namespace agensflow;

constexpr int kExitOk = 0;
constexpr int kExitFault = 1;
constexpr int kExitPreflight = 2;

Config load_config_or_default(const std::string& path) {
  return path.empty() ? Config{} : load_config(path);
}

EnvConfig load_env_or_default(const std::string& path) {
  return path.empty() ? EnvConfig::default_config()
                      : env_config_from_document(read_text_file(path));
}

int print_preflight_block(const PreflightReport& report) {
  std::cerr << "preflight blocked the run:\n";
  for (const auto& issue : report.issues) {
    std::cerr << "  " << issue.category << ": " << issue.message << "\n";
  }
  return kExitPreflight;
}

// ---- single task run ----

struct RunArgs {
  std::string task_file;
  std::string task_id;
  std::string graph_path;
  std::string config_path;
  std::string env_path;
  std::uint64_t seed = 7;
  bool no_skip = false;
  bool no_learn = false;
};

int cmd_run(const RunArgs& args) {
  Config config = load_config_or_default(args.config_path);
  config.router.skip_enabled = !args.no_skip;
  config.router.learning_enabled = !args.no_learn;

  auto tasks = corpus_from_document(read_text_file(args.task_file));
  if (tasks.empty()) {
    std::cerr << "error: task file holds no tasks\n";
    return kExitFault;
  }
  const SyntheticTask* task = &tasks.front();
  if (!args.task_id.empty()) {
    task = nullptr;
    for (const auto& t : tasks) {
      if (t.id == args.task_id) {
        task = &t;
        break;
      }
    }
    if (task == nullptr) {
      std::cerr << "error: task " << args.task_id << " not in task file\n";
      return kExitFault;
    }
  }

  EnvConfig env_config = load_env_or_default(args.env_path);
  SimEnvironment env(env_config, config.router.pool);
  env.register_corpus(tasks);

  PreflightReport pf = preflight(config.router, env);
  if (!pf.ok()) return print_preflight_block(pf);

  // This command is read-only with respect to the graph: it routes with the
  // loaded statistics but never persists updates.
  PolicyGraph graph;
  if (!args.graph_path.empty() && std::filesystem::exists(args.graph_path)) {
    graph = load_graph(args.graph_path);
  }

  Rng policy_rng(Rng::combine(args.seed, Rng::hash_str("policy_stream")));
  Rng env_rng(Rng::combine(args.seed, Rng::hash_str("env_stream")));
  auto [traj, report] =
      run_task(task->ref(), graph, env, config.router, policy_rng, env_rng);
  traj.id = "run:" + task->id;

  auto jit = env.config().judge_models.find(config.reward.live_judge);
  if (jit == env.config().judge_models.end()) {
    std::cerr << "error: unknown live judge " << config.reward.live_judge
              << "\n";
    return kExitFault;
  }
  SimJudge live(jit->second, env);
  Trajectory reference = make_reference_trajectory(*task);
  std::vector<const Trajectory*> group{&traj, &reference};
  auto scores = judge_group(group, live, config.reward.axis_weights);
  if (scores) {
    report.reward = reward_breakdown((*scores)[0].scalar, traj.token_total,
                                     traj.retry_count, config.reward.weights);
  }

  std::cout << report_to_document(report);
  return kExitOk;
}

// ---- graph queries ----

int cmd_graph_export(const std::string& path) {
  std::cout << graph_to_document(load_graph(path));
  return kExitOk;
}

int cmd_graph_inspect(const std::string& path, const std::string& sig_text,
                      double reliability_weight) {
  PolicyGraph graph = load_graph(path);
  Signature sig = signature_from_string(sig_text);
  const PolicyGraph::Node* node = graph.find(sig);
  if (node == nullptr) {
    std::cout << "no node for " << sig_text << "\n";
    return kExitOk;
  }
  std::printf("signature %s  visits %.3f\n", sig_text.c_str(),
              node->signature_visits);
  std::printf("%-34s %10s %10s %10s %10s\n", "action", "visits", "mean",
              "failrate", "ucb");
  for (const auto& [action, edge] : node->edges) {
    double score = ucb_score(edge, node->signature_visits, reliability_weight);
    std::printf("%-34s %10.3f %10.4f %10.4f %10.4f\n",
                to_string(action).c_str(), edge.visits, edge.mean_reward,
                failure_rate(edge), score);
  }
  return kExitOk;
}

int cmd_graph_top(const std::string& path, int k) {
  PolicyGraph graph = load_graph(path);
  struct Row {
    std::string sig;
    std::string action;
    double visits;
    double mean;
  };
  std::vector<Row> rows;
  for (const auto& [sig, node] : graph.nodes()) {
    for (const auto& [action, edge] : node.edges) {
      rows.push_back({to_string(sig), to_string(action), edge.visits,
                      edge.mean_reward});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.visits != b.visits) return a.visits > b.visits;
    if (a.sig != b.sig) return a.sig < b.sig;
    return a.action < b.action;
  });
  if (k < static_cast<int>(rows.size())) rows.resize(static_cast<std::size_t>(k));
  std::printf("%-28s %-34s %10s %10s\n", "signature", "action", "visits",
              "mean");
  for (const auto& r : rows) {
    std::printf("%-28s %-34s %10.3f %10.4f\n", r.sig.c_str(), r.action.c_str(),
                r.visits, r.mean);
  }
  return kExitOk;
}

// ---- experiment protocol ----

struct ExperimentRunArgs {
  std::string arms = "baseline,no_skip,main,warm_start";
  int tasks = 60;
  int epochs = 8;
  std::uint64_t seed = 7;
  std::string env_path;
  std::string config_path;
  std::string out_dir;
  int judges = 3;
};

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int cmd_experiment_run(const ExperimentRunArgs& args) {
  ProtocolOptions options;
  options.arms = split_csv(args.arms);
  options.tasks = args.tasks;
  options.epochs = args.epochs;
  options.seed = args.seed;
  if (!args.env_path.empty()) options.env_path = args.env_path;
  if (!args.config_path.empty()) options.config_path = args.config_path;
  options.out_dir = args.out_dir;
  options.audit_judge_count = args.judges;

  {
    // Surface preflight blocks ahead of the protocol with the dedicated code.
    Config config = load_config_or_default(args.config_path);
    EnvConfig env_config = load_env_or_default(args.env_path);
    auto corpus = generate_corpus(env_config, options.tasks, options.seed);
    SimEnvironment env(env_config, config.router.pool);
    env.register_corpus(corpus);
    PreflightReport pf = preflight(config.router, env);
    if (!pf.ok()) return print_preflight_block(pf);
  }

  ProtocolResult result = run_protocol(options);

  for (const auto& arm : result.arms) {
    std::vector<double> audited;
    for (const auto& row : arm.epochs) audited.push_back(row.mean_audited_score);
    std::vector<double> tokens;
    for (const auto& row : arm.epochs) tokens.push_back(row.mean_tokens);
    std::printf("%-10s epochs %d  plateau audited %.4f  plateau tokens %.0f\n",
                arm.config.arm.c_str(), arm.config.epochs,
                plateau_mean(audited), plateau_mean(tokens));
  }
  if (!result.options.out_dir.empty()) {
    std::printf("outputs written to %s\n", result.options.out_dir.c_str());
  }
  return kExitOk;
}

// Rebuilds enough arm state from an output directory to re-run the audit:
// the trajectories plus arm identity and epoch counts.
struct LoadedRun {
  Config config;
  EnvConfig env_config;
  std::vector<SyntheticTask> corpus;
  std::vector<ArmResult> arms;
};

LoadedRun load_run_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  LoadedRun run;
  run.config = load_config((fs::path(dir) / "resolved_config.json").string());
  run.env_config = env_config_from_document(
      read_text_file((fs::path(dir) / "env_config.json").string()));
  run.corpus =
      corpus_from_document(read_text_file((fs::path(dir) / "corpus.json").string()));

  const std::vector<std::string> known = {kArmBaseline, kArmNoSkip, kArmMain,
                                          kArmWarmStart};
  for (const auto& name : known) {
    fs::path p = fs::path(dir) / "trajectories" / (name + ".json");
    if (!fs::exists(p)) continue;
    ArmResult arm;
    arm.config.arm = name;
    arm.trajectories = trajectories_from_document(read_text_file(p.string()));
    int max_epoch = 1;
    for (const auto& t : arm.trajectories) max_epoch = std::max(max_epoch, t.epoch);
    arm.config.epochs = max_epoch;
    run.arms.push_back(std::move(arm));
  }
  if (run.arms.empty()) {
    throw std::runtime_error("no trajectory archives under " + dir);
  }
  return run;
}

AuditTable audit_run(const LoadedRun& run, const SimEnvironment& env,
                     int judge_count) {
  const auto& pool = run.config.reward.audit_judges;
  if (judge_count < 1 || judge_count > static_cast<int>(pool.size())) {
    throw std::invalid_argument("audit judge count out of range");
  }
  std::vector<std::string> judge_ids(pool.begin(), pool.begin() + judge_count);
  std::vector<const ArmResult*> ptrs;
  for (const auto& a : run.arms) ptrs.push_back(&a);
  return audit(ptrs, env, judge_ids, run.config);
}

int cmd_experiment_audit(const std::string& out_dir, int judges) {
  LoadedRun run = load_run_dir(out_dir);
  SimEnvironment env(run.env_config, run.config.router.pool);
  env.register_corpus(run.corpus);
  AuditTable table = audit_run(run, env, judges);

  write_text_file(
      (std::filesystem::path(out_dir) / "audit_rows.csv").string(),
      audit_rows_csv(table));
  for (const auto& arm : run.arms) {
    std::vector<double> series =
        table.arm_epoch_series(arm.config.arm,
                               arm.config.arm == kArmBaseline
                                   ? 1
                                   : arm.config.epochs);
    std::printf("%-10s plateau audited %.4f\n", arm.config.arm.c_str(),
                plateau_mean(series));
  }
  std::printf("audit_rows.csv rewritten under %s\n", out_dir.c_str());
  return kExitOk;
}

int cmd_experiment_report(const std::string& out_dir, const std::string& kind,
                          int judges) {
  LoadedRun run = load_run_dir(out_dir);
  SimEnvironment env(run.env_config, run.config.router.pool);
  env.register_corpus(run.corpus);
  AuditTable table = audit_run(run, env, judges);

  auto find = [&](const std::string& name) -> const ArmResult* {
    for (const auto& a : run.arms) {
      if (a.config.arm == name) return &a;
    }
    return nullptr;
  };

  if (kind == "per-class") {
    const ArmResult* main_arm = find(kArmMain);
    const ArmResult* base = find(kArmBaseline);
    if (main_arm == nullptr || base == nullptr) {
      std::cerr << "error: per-class report needs main and baseline arms\n";
      return kExitFault;
    }
    std::cout << per_class_csv(per_class_report(
        table, kArmMain, kArmBaseline, main_arm->config.epochs));
    return kExitOk;
  }
  if (kind == "warm-start") {
    const ArmResult* main_arm = find(kArmMain);
    const ArmResult* warm = find(kArmWarmStart);
    if (main_arm == nullptr || warm == nullptr) {
      std::cerr << "error: warm-start report needs main and warm_start arms\n";
      return kExitFault;
    }
    std::cout << warm_start_csv(warm_start_comparison(*main_arm, *warm, table));
    return kExitOk;
  }
  std::cerr << "error: unknown report kind " << kind << "\n";
  return kExitFault;
}

int cmd_analyze_retry(double p, int n, int k) {
  std::printf("retry_pipeline_success(p=%g, n=%d, k=%d) = %.10g\n", p, n, k,
              retry_pipeline_success(p, n, k));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coordination-policy substrate: learned routing over agent cells"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "route one task and print the report");
  run->add_option("--task-file", run_args.task_file, "task corpus document")
      ->required();
  run->add_option("--task-id", run_args.task_id, "task id (default: first)");
  run->add_option("--graph", run_args.graph_path,
                  "policy graph document (read-only)");
  run->add_option("--config", run_args.config_path, "config document");
  run->add_option("--env", run_args.env_path, "environment config document");
  run->add_option("--seed", run_args.seed, "random seed");
  run->add_flag("--no-skip", run_args.no_skip, "disable skip actions");
  run->add_flag("--no-learn", run_args.no_learn, "fixed default pipeline");

  CLI::App* graph = app.add_subcommand("graph", "policy graph queries");
  graph->require_subcommand(1);
  std::string graph_path;
  std::string inspect_sig;
  double inspect_weight = 0.5;
  int top_k = 10;
  CLI::App* gexport = graph->add_subcommand("export", "print a graph document");
  gexport->add_option("--graph", graph_path, "graph document")->required();
  CLI::App* ginspect =
      graph->add_subcommand("inspect", "show one signature's edges");
  ginspect->add_option("--graph", graph_path, "graph document")->required();
  ginspect->add_option("--signature", inspect_sig, "canonical signature text")
      ->required();
  ginspect->add_option("--reliability-weight", inspect_weight,
                       "failure-rate penalty weight");
  CLI::App* gtop = graph->add_subcommand("top", "most-visited edges");
  gtop->add_option("--graph", graph_path, "graph document")->required();
  gtop->add_option("--k", top_k, "row count");

  ExperimentRunArgs exp_args;
  CLI::App* experiment = app.add_subcommand("experiment", "arm protocol");
  experiment->require_subcommand(1);
  CLI::App* exp_run = experiment->add_subcommand("run", "run the arm protocol");
  exp_run->add_option("--arms", exp_args.arms, "comma-separated arm list");
  exp_run->add_option("--tasks", exp_args.tasks, "corpus size");
  exp_run->add_option("--epochs", exp_args.epochs, "epochs per learning arm");
  exp_run->add_option("--seed", exp_args.seed, "master seed");
  exp_run->add_option("--env", exp_args.env_path, "environment config document");
  exp_run->add_option("--config", exp_args.config_path, "config document");
  exp_run->add_option("--out", exp_args.out_dir, "output directory")->required();
  exp_run->add_option("--judges", exp_args.judges, "audit judge count");

  std::string audit_out;
  int audit_judges = 3;
  CLI::App* exp_audit =
      experiment->add_subcommand("audit", "re-run the post-hoc audit");
  exp_audit->add_option("--out", audit_out, "existing output directory")
      ->required();
  exp_audit->add_option("--judges", audit_judges, "audit judge count");

  std::string report_out;
  std::string report_kind;
  int report_judges = 3;
  CLI::App* exp_report =
      experiment->add_subcommand("report", "print a derived report");
  exp_report->add_option("--out", report_out, "existing output directory")
      ->required();
  exp_report
      ->add_option("--kind", report_kind, "per-class | warm-start")
      ->required();
  exp_report->add_option("--judges", report_judges, "audit judge count");

  double retry_p = 0.5;
  int retry_n = 1;
  int retry_k = 1;
  CLI::App* analyze = app.add_subcommand("analyze", "closed-form analyses");
  analyze->require_subcommand(1);
  CLI::App* retry =
      analyze->add_subcommand("retry", "k-stage retry pipeline success");
  retry->add_option("--p", retry_p, "per-attempt success probability")
      ->required();
  retry->add_option("--n", retry_n, "attempts per stage")->required();
  retry->add_option("--k", retry_k, "stage count")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (gexport->parsed()) return cmd_graph_export(graph_path);
    if (ginspect->parsed())
      return cmd_graph_inspect(graph_path, inspect_sig, inspect_weight);
    if (gtop->parsed()) return cmd_graph_top(graph_path, top_k);
    if (exp_run->parsed()) return cmd_experiment_run(exp_args);
    if (exp_audit->parsed()) return cmd_experiment_audit(audit_out, audit_judges);
    if (exp_report->parsed())
      return cmd_experiment_report(report_out, report_kind, report_judges);
    if (retry->parsed()) return cmd_analyze_retry(retry_p, retry_n, retry_k);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFault;
  }
  std::cerr << "error: no command\n";
  return kExitFault;
}
