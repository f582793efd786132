#include "binsr/graph.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "binsr/error.hpp"

namespace binsr {

const char* node_kind_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::Input: return "Input";
    case NodeKind::Sign: return "Sign";
    case NodeKind::BinConv: return "BinConv";
    case NodeKind::FPConv: return "FPConv";
    case NodeKind::BN: return "BN";
    case NodeKind::Add: return "Add";
    case NodeKind::Repeat: return "Repeat";
    case NodeKind::PixelShuffle: return "PixelShuffle";
    case NodeKind::Output: return "Output";
  }
  return "?";
}

NodeId LayerGraph::add_node(Node node) {
  node.id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(std::move(node));
  return nodes_.back().id;
}

void LayerGraph::add_edge(NodeId from, NodeId to) {
  if (to < 0 || to >= static_cast<NodeId>(nodes_.size())) {
    throw ConfigError("add_edge: unknown target node " + std::to_string(to));
  }
  nodes_[to].inputs.push_back(from);
}

const Node& LayerGraph::node(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) {
    throw ConfigError("unknown node id " + std::to_string(id));
  }
  return nodes_[id];
}

std::vector<NodeId> LayerGraph::successors(NodeId id) const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_)
    for (NodeId in : n.inputs)
      if (in == id) {
        out.push_back(n.id);
        break;
      }
  return out;
}

namespace {

std::size_t expected_arity(NodeKind k) {
  switch (k) {
    case NodeKind::Input: return 0;
    case NodeKind::Add: return 2;
    default: return 1;
  }
}

}  // namespace

std::vector<NodeId> LayerGraph::topological_order() const {
  const std::size_t n = nodes_.size();
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<NodeId>> succ(n);
  for (const auto& node : nodes_)
    for (NodeId in : node.inputs) {
      if (in < 0 || in >= static_cast<NodeId>(n)) {
        throw ConfigError("node " + std::to_string(node.id) + " (" + node.name +
                          ") references unknown input " + std::to_string(in));
      }
      succ[in].push_back(node.id);
      ++indegree[node.id];
    }
  // Kahn's algorithm with a min-id frontier keeps the order stable.
  std::vector<NodeId> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(static_cast<NodeId>(i));
  std::vector<NodeId> order;
  while (!ready.empty()) {
    auto it = std::min_element(ready.begin(), ready.end());
    const NodeId id = *it;
    ready.erase(it);
    order.push_back(id);
    for (NodeId s : succ[id])
      if (--indegree[s] == 0) ready.push_back(s);
  }
  if (order.size() != n) throw ConfigError("graph contains a cycle");
  return order;
}

void LayerGraph::validate() const {
  int inputs = 0, outputs = 0;
  for (const auto& n : nodes_) {
    if (n.kind == NodeKind::Input) ++inputs;
    if (n.kind == NodeKind::Output) ++outputs;
  }
  if (inputs != 1) throw ConfigError("graph needs exactly one Input, found " + std::to_string(inputs));
  if (outputs != 1) {
    throw ConfigError("graph needs exactly one Output, found " + std::to_string(outputs));
  }
  for (const auto& n : nodes_) {
    if (n.inputs.size() != expected_arity(n.kind)) {
      throw ConfigError("node " + std::to_string(n.id) + " (" + node_kind_name(n.kind) + " " +
                        n.name + ") has " + std::to_string(n.inputs.size()) + " inputs, expected " +
                        std::to_string(expected_arity(n.kind)));
    }
  }
  topological_order();
  for (const auto& n : nodes_) {
    if (n.kind == NodeKind::BinConv) sign_feeding(n.id);
  }
}

NodeId LayerGraph::input_id() const {
  for (const auto& n : nodes_)
    if (n.kind == NodeKind::Input) return n.id;
  throw ConfigError("graph has no Input node");
}

NodeId LayerGraph::output_id() const {
  for (const auto& n : nodes_)
    if (n.kind == NodeKind::Output) return n.id;
  throw ConfigError("graph has no Output node");
}

std::vector<NodeId> LayerGraph::binconvs() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_)
    if (n.kind == NodeKind::BinConv) out.push_back(n.id);
  std::stable_sort(out.begin(), out.end(), [this](NodeId a, NodeId b) {
    return nodes_[a].binconv_index < nodes_[b].binconv_index;
  });
  return out;
}

NodeId LayerGraph::sign_feeding(NodeId binconv) const {
  NodeId cur = binconv;
  for (std::size_t steps = 0; steps <= nodes_.size(); ++steps) {
    const Node& n = node(cur);
    if (n.inputs.size() != 1) break;
    cur = n.inputs.front();
    if (node(cur).kind == NodeKind::Sign) return cur;
  }
  throw ConfigError("BinConv node " + std::to_string(binconv) + " (" + node(binconv).name +
                    ") is not fed by a Sign");
}

std::string LayerGraph::dump() const {
  std::ostringstream os;
  for (const auto& n : nodes_) {
    os << n.id << ' ' << node_kind_name(n.kind) << ' ' << (n.name.empty() ? "-" : n.name) << " ->";
    for (NodeId s : successors(n.id)) os << ' ' << s;
    os << '\n';
  }
  return os.str();
}

namespace {

struct Adjacency {
  std::vector<std::vector<NodeId>> succ;
  explicit Adjacency(const LayerGraph& g) : succ(g.size()) {
    for (const auto& n : g.nodes())
      for (NodeId in : n.inputs) succ[in].push_back(n.id);
  }
};

// Nodes reachable from `starts`; nodes for which `blocked` holds are neither
// entered nor expanded.
template <class Blocked>
std::vector<char> reach(const LayerGraph& g, const Adjacency& adj, const std::vector<NodeId>& starts,
                        Blocked blocked) {
  std::vector<char> seen(g.size(), 0);
  std::deque<NodeId> queue;
  for (NodeId s : starts) {
    if (blocked(g.node(s)) || seen[s]) continue;
    seen[s] = 1;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    const NodeId cur = queue.front();
    queue.pop_front();
    for (NodeId s : adj.succ[cur]) {
      if (seen[s] || blocked(g.node(s))) continue;
      seen[s] = 1;
      queue.push_back(s);
    }
  }
  return seen;
}

// Sign-free ancestors of `start` (inclusive).
std::vector<char> ancestors(const LayerGraph& g, NodeId start) {
  std::vector<char> seen(g.size(), 0);
  std::deque<NodeId> queue{start};
  seen[start] = 1;
  while (!queue.empty()) {
    const NodeId cur = queue.front();
    queue.pop_front();
    for (NodeId in : g.node(cur).inputs) {
      if (seen[in] || g.node(in).kind == NodeKind::Sign) continue;
      seen[in] = 1;
      queue.push_back(in);
    }
  }
  return seen;
}

}  // namespace

FlowReport analyze_flow(const LayerGraph& g) {
  g.validate();
  const Adjacency adj(g);
  const auto is_sign = [](const Node& n) { return n.kind == NodeKind::Sign; };
  const auto is_quantized = [](const Node& n) {
    return n.kind == NodeKind::Sign || n.kind == NodeKind::BinConv;
  };
  const auto never = [](const Node&) { return false; };

  FlowReport report;
  const std::vector<char> fp = reach(g, adj, {g.input_id()}, is_sign);
  report.has_fp_path = fp[g.output_id()] != 0;

  for (NodeId b : g.binconvs()) {
    const Node& conv = g.node(b);
    const NodeId sign = g.sign_feeding(b);
    const NodeId feed = g.node(sign).inputs.front();

    BinConvFlow flow;
    flow.node = b;
    flow.index = conv.binconv_index;
    flow.name = conv.name;
    flow.receives_fp_input = fp[feed] != 0;

    const std::vector<char> grad = reach(g, adj, adj.succ[b], is_quantized);
    flow.receives_accurate_grad = grad[g.output_id()] != 0;

    if (flow.receives_fp_input) {
      const std::vector<char> up = ancestors(g, feed);
      std::vector<NodeId> sources;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (up[i] && fp[i]) sources.push_back(static_cast<NodeId>(i));
      const std::vector<char> carried = reach(g, adj, sources, is_sign);
      const std::vector<char> below = reach(g, adj, adj.succ[b], never);
      bool bypassed = false;
      for (const auto& n : g.nodes())
        if (n.kind == NodeKind::Add && !n.long_skip && below[n.id] && carried[n.id]) bypassed = true;
      if (!bypassed) {
        flow.severed = true;
        report.severed_at.push_back(sign);
      }
    }
    report.binconvs.push_back(std::move(flow));
  }
  return report;
}

std::string FlowReport::str(const LayerGraph& g) const {
  std::ostringstream os;
  std::size_t fp_in = 0, acc = 0;
  for (const auto& b : binconvs) {
    fp_in += b.receives_fp_input;
    acc += b.receives_accurate_grad;
  }
  const std::size_t total = binconvs.size();
  os << "FP path: " << (has_fp_path ? "yes" : "no") << "; ";
  if (fp_in == total && acc == total) {
    os << "all " << total << " binconvs: fp-input \u2713 acc-grad \u2713\n";
  } else {
    os << total << " binconvs: fp-input " << fp_in << "/" << total << ", acc-grad " << acc << "/"
       << total << '\n';
  }
  os << "severed at:";
  if (severed_at.empty()) os << " none";
  for (NodeId s : severed_at) os << ' ' << s << " (" << g.node(s).name << ")";
  os << '\n';
  for (const auto& b : binconvs) {
    os << "  [" << b.index << "] " << b.name << "  fp-input " << (b.receives_fp_input ? "yes" : "NO")
       << "  acc-grad " << (b.receives_accurate_grad ? "yes" : "NO")
       << (b.severed ? "  SEVERED" : "") << '\n';
  }
  return os.str();
}

}  // namespace binsr
