#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "agensflow/rng.hpp"
#include "agensflow/signature.hpp"

namespace agensflow {

enum class FailureKind { validation, recoverable_execution };

std::string to_string(FailureKind k);
FailureKind failure_kind_from_string(const std::string& s);

// Routing decision at a signature. terminate exists as a recordable outcome
// but is never offered to selection.
struct ActionId {
  enum class Kind { invoke, skip, terminate };

  Kind kind = Kind::terminate;
  std::string skill;  // invoke only
  std::string model;  // invoke only
  std::string cell;   // skip only

  static ActionId invoke(std::string skill, std::string model) {
    ActionId a;
    a.kind = Kind::invoke;
    a.skill = std::move(skill);
    a.model = std::move(model);
    return a;
  }
  static ActionId skip(std::string cell) {
    ActionId a;
    a.kind = Kind::skip;
    a.cell = std::move(cell);
    return a;
  }
  static ActionId terminate() { return ActionId{}; }

  auto operator<=>(const ActionId&) const = default;
};

// Canonical text: "invoke:<skill>@<model>", "skip:<cell>", "terminate".
std::string to_string(const ActionId& a);
ActionId action_from_string(const std::string& text);

// Per-(signature, action) sufficient statistics. visits is fractional because
// backups are weighted by judge confidence.
struct EdgeStats {
  double visits = 0.0;
  double mean_reward = 0.0;
  double variance_acc = 0.0;  // weighted sum of squared deviations
  std::uint64_t token_sum = 0;
  std::uint64_t token_runs = 0;
  std::uint64_t failure_count = 0;
  std::uint64_t attempt_count = 0;
};

// failure_count / attempt_count; 0 when nothing has been attempted.
double failure_rate(const EdgeStats& e);

// Exploration coefficient annealed by signature visit count:
// max(0.5, 1.4 * 2^(-visits / 50)).
double anneal_exploration(double signature_visits);

// mean + c * sqrt(ln(N_s + 1) / N_sa) - lambda * failure_rate, natural log.
// Unvisited edges score +infinity.
double ucb_score(const EdgeStats& edge, double signature_visits,
                 double reliability_weight);

class PolicyGraph {
 public:
  struct Node {
    double signature_visits = 0.0;
    std::map<ActionId, EdgeStats> edges;
  };

  static constexpr int kFormatVersion = 1;

  // Highest-scoring legal action; ties broken uniformly at random. Creates the
  // node and zeroed edges for every legal action on first touch. Throws
  // std::invalid_argument on an empty legal set or a terminate candidate.
  ActionId select_action(const Signature& sig,
                         const std::vector<ActionId>& legal, Rng& rng,
                         double reliability_weight);

  // Confidence-weighted incremental update of every visited edge.
  // confidence 0 is a no-op; confidence outside [0, 1] or an edge that was
  // never created by selection throws std::invalid_argument.
  void backup(const std::vector<std::pair<Signature, ActionId>>& visited,
              double reward, double confidence);

  void record_attempt(const Signature& sig, const ActionId& a);
  void record_failure(const Signature& sig, const ActionId& a, FailureKind k);
  void record_tokens(const Signature& sig, const ActionId& a,
                     std::uint64_t tokens);

  const Node* find(const Signature& sig) const;
  const EdgeStats* find_edge(const Signature& sig, const ActionId& a) const;

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const;
  const std::map<Signature, Node>& nodes() const { return nodes_; }
  std::map<Signature, Node>& nodes() { return nodes_; }

 private:
  Node& touch(const Signature& sig) { return nodes_[sig]; }
  EdgeStats& edge_for_update(const Signature& sig, const ActionId& a);

  std::map<Signature, Node> nodes_;
};

// Visit counts (edge and signature) scaled by discount in [0, 1]; means and
// failure history preserved. discount 0 returns every edge to the unvisited
// state, which also clears means to keep the zero-visit invariant.
PolicyGraph warm_start(const PolicyGraph& source, double discount);

// Structured-text persistence. Round trips are bit-exact and re-serialization
// of a loaded graph is byte-identical.
std::string graph_to_document(const PolicyGraph& g);
PolicyGraph graph_from_document(const std::string& text);
void save_graph(const PolicyGraph& g, const std::string& path);
PolicyGraph load_graph(const std::string& path);

}  // namespace agensflow
