#include "agensflow/policy_graph.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace agensflow {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) {
  throw std::invalid_argument(what);
}

[[noreturn]] void corrupt(const std::string& what) {
  throw std::runtime_error("policy graph document: " + what);
}

}  // namespace

std::string to_string(FailureKind k) {
  switch (k) {
    case FailureKind::validation: return "validation";
    case FailureKind::recoverable_execution: return "recoverable_execution";
  }
  bad("unknown failure kind value");
}

FailureKind failure_kind_from_string(const std::string& s) {
  if (s == "validation") return FailureKind::validation;
  if (s == "recoverable_execution") return FailureKind::recoverable_execution;
  bad("unknown failure kind: " + s);
}

std::string to_string(const ActionId& a) {
  switch (a.kind) {
    case ActionId::Kind::invoke: return "invoke:" + a.skill + "@" + a.model;
    case ActionId::Kind::skip: return "skip:" + a.cell;
    case ActionId::Kind::terminate: return "terminate";
  }
  bad("unknown action kind value");
}

ActionId action_from_string(const std::string& text) {
  if (text == "terminate") return ActionId::terminate();
  if (text.rfind("invoke:", 0) == 0) {
    auto at = text.find('@', 7);
    if (at == std::string::npos || at == 7 || at + 1 == text.size()) {
      bad("invoke action needs skill@model: " + text);
    }
    return ActionId::invoke(text.substr(7, at - 7), text.substr(at + 1));
  }
  if (text.rfind("skip:", 0) == 0) {
    if (text.size() == 5) bad("skip action needs a cell name: " + text);
    return ActionId::skip(text.substr(5));
  }
  bad("unknown action text: " + text);
}

double failure_rate(const EdgeStats& e) {
  if (e.attempt_count == 0) return 0.0;
  return static_cast<double>(e.failure_count) /
         static_cast<double>(e.attempt_count);
}

double anneal_exploration(double signature_visits) {
  if (signature_visits < 0.0) bad("signature visits must be >= 0");
  return std::max(0.5, 1.4 * std::exp2(-signature_visits / 50.0));
}

double ucb_score(const EdgeStats& edge, double signature_visits,
                 double reliability_weight) {
  if (edge.visits < 0.0 || signature_visits < 0.0) {
    bad("visit counts must be >= 0");
  }
  if (edge.visits == 0.0) return std::numeric_limits<double>::infinity();
  double c = anneal_exploration(signature_visits);
  double bonus = c * std::sqrt(std::log(signature_visits + 1.0) / edge.visits);
  return edge.mean_reward + bonus - reliability_weight * failure_rate(edge);
}

EdgeStats& PolicyGraph::edge_for_update(const Signature& sig,
                                        const ActionId& a) {
  auto node = nodes_.find(sig);
  if (node == nodes_.end()) {
    bad("unknown signature: " + to_string(sig));
  }
  auto edge = node->second.edges.find(a);
  if (edge == node->second.edges.end()) {
    bad("unknown edge: " + to_string(sig) + " / " + to_string(a));
  }
  return edge->second;
}

ActionId PolicyGraph::select_action(const Signature& sig,
                                    const std::vector<ActionId>& legal,
                                    Rng& rng, double reliability_weight) {
  if (legal.empty()) bad("select_action needs a non-empty legal set");
  for (const auto& a : legal) {
    if (a.kind == ActionId::Kind::terminate) {
      bad("terminate is never a selectable action");
    }
  }
  Node& node = touch(sig);
  for (const auto& a : legal) node.edges.try_emplace(a);

  double best = -std::numeric_limits<double>::infinity();
  std::vector<const ActionId*> argmax;
  for (const auto& a : legal) {
    double s = ucb_score(node.edges.at(a), node.signature_visits,
                         reliability_weight);
    if (s > best) {
      best = s;
      argmax.clear();
    }
    if (s == best) argmax.push_back(&a);
  }
  return *argmax[rng.pick(argmax.size())];
}

void PolicyGraph::backup(
    const std::vector<std::pair<Signature, ActionId>>& visited, double reward,
    double confidence) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    bad("confidence outside [0, 1]");
  }
  if (confidence == 0.0) return;
  for (const auto& [sig, action] : visited) {
    EdgeStats& e = edge_for_update(sig, action);
    double total = e.visits + confidence;
    double delta = reward - e.mean_reward;
    e.mean_reward += (confidence / total) * delta;
    e.variance_acc += confidence * delta * (reward - e.mean_reward);
    e.visits = total;
    nodes_[sig].signature_visits += confidence;
  }
}

void PolicyGraph::record_attempt(const Signature& sig, const ActionId& a) {
  edge_for_update(sig, a).attempt_count += 1;
}

void PolicyGraph::record_failure(const Signature& sig, const ActionId& a,
                                 FailureKind) {
  EdgeStats& e = edge_for_update(sig, a);
  if (e.failure_count >= e.attempt_count) {
    bad("failure without a matching attempt");
  }
  e.failure_count += 1;
}

void PolicyGraph::record_tokens(const Signature& sig, const ActionId& a,
                                std::uint64_t tokens) {
  EdgeStats& e = edge_for_update(sig, a);
  e.token_sum += tokens;
  e.token_runs += 1;
}

const PolicyGraph::Node* PolicyGraph::find(const Signature& sig) const {
  auto it = nodes_.find(sig);
  return it == nodes_.end() ? nullptr : &it->second;
}

const EdgeStats* PolicyGraph::find_edge(const Signature& sig,
                                        const ActionId& a) const {
  auto it = nodes_.find(sig);
  if (it == nodes_.end()) return nullptr;
  auto e = it->second.edges.find(a);
  return e == it->second.edges.end() ? nullptr : &e->second;
}

std::size_t PolicyGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& [sig, node] : nodes_) n += node.edges.size();
  return n;
}

PolicyGraph warm_start(const PolicyGraph& source, double discount) {
  if (!(discount >= 0.0 && discount <= 1.0)) bad("discount outside [0, 1]");
  PolicyGraph out = source;
  for (auto& [sig, node] : out.nodes()) {
    node.signature_visits *= discount;
    for (auto& [action, e] : node.edges) {
      e.visits *= discount;
      e.variance_acc *= discount;
      if (e.visits == 0.0) {  // zero-visit edges carry no statistics
        e.mean_reward = 0.0;
        e.variance_acc = 0.0;
      }
    }
  }
  return out;
}

std::string graph_to_document(const PolicyGraph& g) {
  json doc;
  doc["format_version"] = PolicyGraph::kFormatVersion;
  json nodes = json::object();
  for (const auto& [sig, node] : g.nodes()) {
    json edges = json::object();
    for (const auto& [action, e] : node.edges) {
      edges[to_string(action)] = {
          {"visits", e.visits},
          {"mean_reward", e.mean_reward},
          {"variance_acc", e.variance_acc},
          {"token_sum", e.token_sum},
          {"token_runs", e.token_runs},
          {"failure_count", e.failure_count},
          {"attempt_count", e.attempt_count},
      };
    }
    nodes[to_string(sig)] = {{"signature_visits", node.signature_visits},
                             {"edges", std::move(edges)}};
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(2) + "\n";
}

PolicyGraph graph_from_document(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    corrupt(std::string("not valid JSON (") + e.what() + ")");
  }
  if (!doc.is_object() || !doc.contains("format_version") ||
      !doc.contains("nodes")) {
    corrupt("missing format_version or nodes");
  }
  if (!doc["format_version"].is_number_integer() ||
      doc["format_version"].get<int>() != PolicyGraph::kFormatVersion) {
    corrupt("format_version mismatch (expected " +
            std::to_string(PolicyGraph::kFormatVersion) + ", got " +
            doc["format_version"].dump() + ")");
  }
  if (!doc["nodes"].is_object()) corrupt("nodes must be an object");

  PolicyGraph g;
  try {
    for (const auto& [sig_text, node_doc] : doc["nodes"].items()) {
      Signature sig = signature_from_string(sig_text);
      PolicyGraph::Node node;
      node.signature_visits = node_doc.at("signature_visits").get<double>();
      for (const auto& [action_text, e_doc] :
           node_doc.at("edges").items()) {
        ActionId action = action_from_string(action_text);
        EdgeStats e;
        e.visits = e_doc.at("visits").get<double>();
        e.mean_reward = e_doc.at("mean_reward").get<double>();
        e.variance_acc = e_doc.at("variance_acc").get<double>();
        e.token_sum = e_doc.at("token_sum").get<std::uint64_t>();
        e.token_runs = e_doc.at("token_runs").get<std::uint64_t>();
        e.failure_count = e_doc.at("failure_count").get<std::uint64_t>();
        e.attempt_count = e_doc.at("attempt_count").get<std::uint64_t>();
        if (e.visits < 0.0 || (e.visits == 0.0 &&
                               (e.mean_reward != 0.0 || e.variance_acc != 0.0))) {
          corrupt("edge statistics violate the zero-visit invariant");
        }
        node.edges.emplace(std::move(action), e);
      }
      g.nodes().emplace(sig, std::move(node));
    }
  } catch (const json::exception& e) {
    corrupt(std::string("malformed node entry (") + e.what() + ")");
  } catch (const std::invalid_argument& e) {
    corrupt(std::string("malformed key (") + e.what() + ")");
  }
  return g;
}

void save_graph(const PolicyGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << graph_to_document(g);
  if (!out) throw std::runtime_error("write failed: " + path);
}

PolicyGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return graph_from_document(buf.str());
}

}  // namespace agensflow
