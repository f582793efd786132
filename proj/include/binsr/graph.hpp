#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "binsr/quantize.hpp"

namespace binsr {

enum class NodeKind { Input, Sign, BinConv, FPConv, BN, Add, Repeat, PixelShuffle, Output };

const char* node_kind_name(NodeKind kind);

using NodeId = int;

/// One layer of a static network. Attributes not used by a kind stay at their
/// defaults. `name` doubles as the parameter prefix ("body.0.conv1" owns
/// "body.0.conv1.weight").
struct Node {
  NodeId id = -1;
  NodeKind kind = NodeKind::Input;
  std::string name;
  std::vector<NodeId> inputs;

  int in_channels = 0;   // convs; Input: expected channel count
  int out_channels = 0;  // convs; BN: channel count
  int kernel = 3;
  int stride = 1;
  int pad = 1;
  bool bias = false;
  int factor = 1;  // Repeat: copies; PixelShuffle: upscale r
  QuantizerKind quantizer = QuantizerKind::SteClip;
  int binconv_index = -1;  // position among binarized convs, body first
  bool long_skip = false;  // Add spanning the whole body (global skip)
};

class LayerGraph {
 public:
  NodeId add_node(Node node);
  /// Appends `from` to the inputs of `to`. Used to build arbitrary (possibly
  /// malformed) graphs; validate() catches the bad ones.
  void add_edge(NodeId from, NodeId to);

  const Node& node(NodeId id) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  std::vector<NodeId> successors(NodeId id) const;

  /// Acyclic, exactly one Input and one Output, inputs in range, arity per
  /// kind, every BinConv fed by a Sign. Throws ConfigError.
  void validate() const;
  std::vector<NodeId> topological_order() const;

  NodeId input_id() const;
  NodeId output_id() const;
  /// BinConv nodes ordered by binconv_index.
  std::vector<NodeId> binconvs() const;
  /// Nearest Sign upstream of a BinConv, following single-input nodes.
  NodeId sign_feeding(NodeId binconv) const;

  /// One line per node: "<id> <Kind> <name> -> <successor ids>".
  std::string dump() const;

 private:
  std::vector<Node> nodes_;
};

struct BinConvFlow {
  NodeId node = -1;
  int index = -1;
  std::string name;
  bool receives_fp_input = false;
  bool receives_accurate_grad = false;
  bool severed = false;  // its Sign appears in FlowReport::severed_at
};

struct FlowReport {
  bool has_fp_path = false;
  std::vector<NodeId> severed_at;  // Sign nodes
  std::vector<BinConvFlow> binconvs;

  std::string str(const LayerGraph& g) const;
};

/// Structural information-flow analysis.
///
/// - has_fp_path: a directed Input->Output path avoiding every Sign.
/// - receives_fp_input[b]: the tensor entering b's Sign is reachable from Input
///   without crossing a Sign.
/// - receives_accurate_grad[b]: from b's output there is a path to Output that
///   crosses neither a Sign nor another BinConv.
/// - severed_at: Signs with a full-precision input that has no local bypass.
///   A bypass is an Add downstream of the conv that some full-precision,
///   Sign-free ancestor of the Sign's input reaches without crossing a Sign.
///   Adds marked long_skip do not count.
FlowReport analyze_flow(const LayerGraph& g);

}  // namespace binsr
