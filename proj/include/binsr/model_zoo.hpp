#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "binsr/graph.hpp"
#include "binsr/tape.hpp"

namespace binsr {

enum class Backbone { SrResNetLike, EdsrLike };
enum class BlockVariant { Original, FormerResidual, LaterResidual, BiReal };
enum class TailVariant { Original, RepeatShortcut, Lightweight };

// Config tags ("srresnet-like", "FormerResidual", "RepeatShortcut", ...).
const char* backbone_tag(Backbone b);
const char* block_tag(BlockVariant v);
const char* tail_tag(TailVariant v);
Backbone parse_backbone(std::string_view s);
BlockVariant parse_block(std::string_view s);
TailVariant parse_tail(std::string_view s);

// Table labels ("Former", "Bi-Real", "Repeat-Shortcut", ...).
const char* block_label(BlockVariant v);
const char* tail_label(TailVariant v);

/// Which bypass to remove. Body cutoffs index binarized convs in body order.
struct Cutoff {
  enum class Kind { None, Body, Tail };
  Kind kind = Kind::None;
  int index = 0;

  static Cutoff none() { return {}; }
  static Cutoff body(int i) { return {Kind::Body, i}; }
  static Cutoff tail() { return {Kind::Tail, 0}; }
  std::string str() const;
  friend bool operator==(const Cutoff&, const Cutoff&) = default;
};

struct NetworkConfig {
  Backbone backbone = Backbone::SrResNetLike;
  int num_blocks = 4;
  int channels = 16;
  int scale = 2;
  BlockVariant block = BlockVariant::BiReal;
  TailVariant tail = TailVariant::Lightweight;
  Cutoff cutoff;
  QuantizerKind quantizer = QuantizerKind::SteClip;
  std::uint64_t seed = 0;
  bool global_skip = true;
  /// Reference mode: every binarized conv becomes a float conv (and Signs vanish).
  bool full_precision = false;

  /// Throws ConfigError.
  void validate() const;
  /// Tail actually built, after applying a tail cutoff.
  TailVariant effective_tail() const;
};

nlohmann::json to_json(const NetworkConfig& c);
/// Missing fields keep defaults; unknown fields and bad values are ConfigErrors.
NetworkConfig network_config_from_json(const nlohmann::json& j);

/// Named presets: "desk" (4 blocks, C=16) and "reference" (16 blocks, C=64).
NetworkConfig network_preset(std::string_view name);

/// Incremental builder shared by the fragment functions.
class GraphBuilder {
 public:
  explicit GraphBuilder(QuantizerKind q, bool full_precision = false, Backbone backbone = Backbone::SrResNetLike)
      : q_(q), fp_(full_precision), backbone_(backbone) {}

  NodeId input(int channels);
  NodeId output(NodeId x);
  NodeId fpconv(NodeId x, const std::string& name, int cin, int cout, int kernel = 3, bool bias = true);
  /// Sign -> BinConv -> BN (or the float reference equivalent).
  NodeId unit(NodeId x, const std::string& name, int cin, int cout);
  NodeId add(NodeId a, NodeId b, const std::string& name, bool long_skip = false);
  NodeId repeat(NodeId x, const std::string& name, int k);
  NodeId pixel_shuffle(NodeId x, const std::string& name, int r);

  int next_binconv_index() const { return binconv_count_; }
  LayerGraph& graph() { return g_; }
  LayerGraph take() { return std::move(g_); }

 private:
  LayerGraph g_;
  QuantizerKind q_;
  bool fp_;
  Backbone backbone_;
  int binconv_count_ = 0;
};

/// Two-unit residual block. `cut` is -1 (none) or 0/1: the unit whose
/// innermost spanning bypass is removed.
NodeId build_block(GraphBuilder& b, NodeId x, BlockVariant v, int channels, const std::string& name,
                   int cut = -1);
NodeId build_tail(GraphBuilder& b, NodeId x, TailVariant v, int channels, int scale);

/// Standalone block fragment: Input -> block -> Output.
LayerGraph build_block(BlockVariant v, int channels, QuantizerKind q);
/// Standalone tail fragment: Input(C) -> tail -> Output(3 channels).
LayerGraph build_tail(TailVariant v, int channels, int scale, QuantizerKind q);

LayerGraph build_network(const NetworkConfig& cfg);

/// Kaiming-style uniform init (bound 1/sqrt(fan_in)); BN gamma 1, beta 0,
/// running mean 0, running var 1.
ParamStore init_params(const LayerGraph& g, std::uint64_t seed);

struct Model {
  NetworkConfig config;
  LayerGraph graph;
  ParamStore params;

  static Model create(const NetworkConfig& cfg);
};

}  // namespace binsr
