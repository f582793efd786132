#include "binsr/model_zoo.hpp"

#include <cmath>
#include <random>

#include "binsr/error.hpp"

namespace binsr {

const char* backbone_tag(Backbone b) {
  return b == Backbone::SrResNetLike ? "srresnet-like" : "edsr-like";
}

const char* block_tag(BlockVariant v) {
  switch (v) {
    case BlockVariant::Original: return "Original";
    case BlockVariant::FormerResidual: return "FormerResidual";
    case BlockVariant::LaterResidual: return "LaterResidual";
    case BlockVariant::BiReal: return "BiReal";
  }
  return "?";
}

const char* tail_tag(TailVariant v) {
  switch (v) {
    case TailVariant::Original: return "Original";
    case TailVariant::RepeatShortcut: return "RepeatShortcut";
    case TailVariant::Lightweight: return "Lightweight";
  }
  return "?";
}

const char* block_label(BlockVariant v) {
  switch (v) {
    case BlockVariant::Original: return "Original";
    case BlockVariant::FormerResidual: return "Former";
    case BlockVariant::LaterResidual: return "Later";
    case BlockVariant::BiReal: return "Bi-Real";
  }
  return "?";
}

const char* tail_label(TailVariant v) {
  switch (v) {
    case TailVariant::Original: return "Original";
    case TailVariant::RepeatShortcut: return "Repeat-Shortcut";
    case TailVariant::Lightweight: return "Lightweight";
  }
  return "?";
}

Backbone parse_backbone(std::string_view s) {
  if (s == "srresnet-like") return Backbone::SrResNetLike;
  if (s == "edsr-like") return Backbone::EdsrLike;
  throw ConfigError("unknown backbone '" + std::string(s) + "' (expected srresnet-like or edsr-like)");
}

BlockVariant parse_block(std::string_view s) {
  for (auto v : {BlockVariant::Original, BlockVariant::FormerResidual, BlockVariant::LaterResidual,
                 BlockVariant::BiReal})
    if (s == block_tag(v) || s == block_label(v)) return v;
  throw ConfigError("unknown block variant '" + std::string(s) +
                    "' (expected Original, FormerResidual, LaterResidual or BiReal)");
}

TailVariant parse_tail(std::string_view s) {
  for (auto v : {TailVariant::Original, TailVariant::RepeatShortcut, TailVariant::Lightweight})
    if (s == tail_tag(v) || s == tail_label(v)) return v;
  throw ConfigError("unknown tail variant '" + std::string(s) +
                    "' (expected Original, RepeatShortcut or Lightweight)");
}

std::string Cutoff::str() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::Body: return std::to_string(index);
    case Kind::Tail: return "tail";
  }
  return "?";
}

void NetworkConfig::validate() const {
  if (num_blocks < 1) throw ConfigError("num_blocks must be >= 1, got " + std::to_string(num_blocks));
  if (channels < 1) throw ConfigError("channels must be >= 1, got " + std::to_string(channels));
  if (scale < 2 || scale > 4) throw ConfigError("scale must be 2, 3 or 4, got " + std::to_string(scale));
  if (cutoff.kind == Cutoff::Kind::Body && (cutoff.index < 0 || cutoff.index >= 2 * num_blocks)) {
    throw ConfigError("cutoff index " + std::to_string(cutoff.index) + " out of range [0, " +
                      std::to_string(2 * num_blocks) + ")");
  }
}

TailVariant NetworkConfig::effective_tail() const {
  return cutoff.kind == Cutoff::Kind::Tail ? TailVariant::Original : tail;
}

nlohmann::json to_json(const NetworkConfig& c) {
  nlohmann::json j;
  j["backbone"] = backbone_tag(c.backbone);
  j["num_blocks"] = c.num_blocks;
  j["channels"] = c.channels;
  j["scale"] = c.scale;
  j["block"] = block_tag(c.block);
  j["tail"] = tail_tag(c.tail);
  switch (c.cutoff.kind) {
    case Cutoff::Kind::None: j["cutoff"] = nullptr; break;
    case Cutoff::Kind::Body: j["cutoff"] = c.cutoff.index; break;
    case Cutoff::Kind::Tail: j["cutoff"] = "tail"; break;
  }
  j["quantizer"] = quantizer_name(c.quantizer);
  j["seed"] = c.seed;
  j["global_skip"] = c.global_skip;
  j["full_precision"] = c.full_precision;
  return j;
}

NetworkConfig network_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("network config must be a JSON object");
  NetworkConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "backbone") c.backbone = parse_backbone(v.get<std::string>());
      else if (key == "num_blocks") c.num_blocks = v.get<int>();
      else if (key == "channels") c.channels = v.get<int>();
      else if (key == "scale") c.scale = v.get<int>();
      else if (key == "block") c.block = parse_block(v.get<std::string>());
      else if (key == "tail") c.tail = parse_tail(v.get<std::string>());
      else if (key == "cutoff") {
        if (v.is_null()) c.cutoff = Cutoff::none();
        else if (v.is_number_integer()) c.cutoff = Cutoff::body(v.get<int>());
        else if (v.is_string() && (v.get<std::string>() == "tail" || v.get<std::string>() == "Tail"))
          c.cutoff = Cutoff::tail();
        else throw ConfigError("cutoff must be null, an integer or \"tail\"");
      } else if (key == "quantizer") c.quantizer = parse_quantizer(v.get<std::string>());
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "global_skip") c.global_skip = v.get<bool>();
      else if (key == "full_precision") c.full_precision = v.get<bool>();
      else throw ConfigError("unknown network config field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("network config: ") + e.what());
  }
  c.validate();
  return c;
}

NetworkConfig network_preset(std::string_view name) {
  NetworkConfig c;
  if (name == "desk") {
    c.num_blocks = 4;
    c.channels = 16;
  } else if (name == "reference") {
    c.num_blocks = 16;
    c.channels = 64;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or reference)");
  }
  return c;
}

NodeId GraphBuilder::input(int channels) {
  Node n;
  n.kind = NodeKind::Input;
  n.name = "input";
  n.in_channels = channels;
  return g_.add_node(n);
}

NodeId GraphBuilder::output(NodeId x) {
  Node n;
  n.kind = NodeKind::Output;
  n.name = "output";
  n.inputs = {x};
  return g_.add_node(n);
}

NodeId GraphBuilder::fpconv(NodeId x, const std::string& name, int cin, int cout, int kernel,
                            bool bias) {
  Node n;
  n.kind = NodeKind::FPConv;
  n.name = name;
  n.inputs = {x};
  n.in_channels = cin;
  n.out_channels = cout;
  n.kernel = kernel;
  n.pad = kernel / 2;
  n.bias = bias;
  return g_.add_node(n);
}

NodeId GraphBuilder::unit(NodeId x, const std::string& name, int cin, int cout) {
  const int index = binconv_count_++;
  if (fp_) {
    const bool with_bn = backbone_ == Backbone::SrResNetLike;
    NodeId conv = fpconv(x, name + ".conv", cin, cout, 3, !with_bn);
    if (!with_bn) return conv;
    Node bn;
    bn.kind = NodeKind::BN;
    bn.name = name + ".bn";
    bn.inputs = {conv};
    bn.out_channels = cout;
    return g_.add_node(bn);
  }
  Node s;
  s.kind = NodeKind::Sign;
  s.name = name + ".sign";
  s.inputs = {x};
  s.quantizer = q_;
  const NodeId sign = g_.add_node(s);

  Node c;
  c.kind = NodeKind::BinConv;
  c.name = name + ".conv";
  c.inputs = {sign};
  c.in_channels = cin;
  c.out_channels = cout;
  c.quantizer = q_;
  c.binconv_index = index;
  const NodeId conv = g_.add_node(c);

  Node bn;
  bn.kind = NodeKind::BN;
  bn.name = name + ".bn";
  bn.inputs = {conv};
  bn.out_channels = cout;
  return g_.add_node(bn);
}

NodeId GraphBuilder::add(NodeId a, NodeId b, const std::string& name, bool long_skip) {
  Node n;
  n.kind = NodeKind::Add;
  n.name = name;
  n.inputs = {a, b};
  n.long_skip = long_skip;
  return g_.add_node(n);
}

NodeId GraphBuilder::repeat(NodeId x, const std::string& name, int k) {
  Node n;
  n.kind = NodeKind::Repeat;
  n.name = name;
  n.inputs = {x};
  n.factor = k;
  return g_.add_node(n);
}

NodeId GraphBuilder::pixel_shuffle(NodeId x, const std::string& name, int r) {
  Node n;
  n.kind = NodeKind::PixelShuffle;
  n.name = name;
  n.inputs = {x};
  n.factor = r;
  return g_.add_node(n);
}

NodeId build_block(GraphBuilder& b, NodeId x, BlockVariant v, int channels, const std::string& name,
                   int cut) {
  const int C = channels;
  const std::string u1n = name + ".unit1", u2n = name + ".unit2";
  switch (v) {
    case BlockVariant::Original: {
      const NodeId u1 = b.unit(x, u1n, C, C);
      const NodeId u2 = b.unit(u1, u2n, C, C);
      return cut >= 0 ? u2 : b.add(x, u2, name + ".add");
    }
    case BlockVariant::FormerResidual: {
      const NodeId u1 = b.unit(x, u1n, C, C);
      const NodeId a1 = cut == 0 ? u1 : b.add(x, u1, name + ".add1");
      const NodeId u2 = b.unit(a1, u2n, C, C);
      return cut == 1 ? u2 : b.add(x, u2, name + ".add");
    }
    case BlockVariant::LaterResidual: {
      const NodeId u1 = b.unit(x, u1n, C, C);
      const NodeId u2 = b.unit(u1, u2n, C, C);
      const NodeId a2 = cut == 1 ? u2 : b.add(u1, u2, name + ".add2");
      return cut == 0 ? a2 : b.add(x, a2, name + ".add");
    }
    case BlockVariant::BiReal: {
      const NodeId u1 = b.unit(x, u1n, C, C);
      const NodeId a1 = cut == 0 ? u1 : b.add(x, u1, name + ".add1");
      const NodeId u2 = b.unit(a1, u2n, C, C);
      return cut == 1 ? u2 : b.add(a1, u2, name + ".add2");
    }
  }
  throw ConfigError("unknown block variant");
}

NodeId build_tail(GraphBuilder& b, NodeId x, TailVariant v, int channels, int scale) {
  const int expanded = channels * scale * scale;
  switch (v) {
    case TailVariant::Original:
    case TailVariant::RepeatShortcut: {
      NodeId y = b.unit(x, "tail.unit", channels, expanded);
      if (v == TailVariant::RepeatShortcut)
        y = b.add(b.repeat(x, "tail.repeat", scale * scale), y, "tail.add");
      const NodeId ps = b.pixel_shuffle(y, "tail.shuffle", scale);
      return b.fpconv(ps, "tail.conv", channels, 3);
    }
    case TailVariant::Lightweight: {
      const NodeId conv = b.fpconv(x, "tail.conv", channels, 3 * scale * scale);
      return b.pixel_shuffle(conv, "tail.shuffle", scale);
    }
  }
  throw ConfigError("unknown tail variant");
}

LayerGraph build_block(BlockVariant v, int channels, QuantizerKind q) {
  if (channels < 1) throw ConfigError("channels must be >= 1");
  GraphBuilder b(q);
  const NodeId x = b.input(channels);
  b.output(build_block(b, x, v, channels, "block"));
  return b.take();
}

LayerGraph build_tail(TailVariant v, int channels, int scale, QuantizerKind q) {
  if (channels < 1 || scale < 1) throw ConfigError("tail needs channels >= 1 and scale >= 1");
  GraphBuilder b(q);
  const NodeId x = b.input(channels);
  b.output(build_tail(b, x, v, channels, scale));
  return b.take();
}

LayerGraph build_network(const NetworkConfig& cfg) {
  cfg.validate();
  GraphBuilder b(cfg.quantizer, cfg.full_precision, cfg.backbone);
  const NodeId in = b.input(3);
  const NodeId head = b.fpconv(in, "head", 3, cfg.channels);
  NodeId x = head;
  for (int i = 0; i < cfg.num_blocks; ++i) {
    int cut = -1;
    if (cfg.cutoff.kind == Cutoff::Kind::Body && cfg.cutoff.index / 2 == i) cut = cfg.cutoff.index % 2;
    x = build_block(b, x, cfg.block, cfg.channels, "body." + std::to_string(i), cut);
  }
  if (cfg.global_skip) x = b.add(head, x, "skip", true);
  b.output(build_tail(b, x, cfg.effective_tail(), cfg.channels, cfg.scale));
  LayerGraph g = b.take();
  g.validate();
  return g;
}

ParamStore init_params(const LayerGraph& g, std::uint64_t seed) {
  ParamStore p;
  std::mt19937_64 rng(seed);
  for (const Node& n : g.nodes()) {
    switch (n.kind) {
      case NodeKind::FPConv:
      case NodeKind::BinConv: {
        const int fan_in = n.in_channels * n.kernel * n.kernel;
        const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
        p.add(n.name + ".weight",
              random_uniform({n.out_channels, n.in_channels, n.kernel, n.kernel}, -bound, bound, rng));
        if (n.kind == NodeKind::FPConv && n.bias)
          p.add(n.name + ".bias", random_uniform({n.out_channels, 1, 1, 1}, -bound, bound, rng));
        break;
      }
      case NodeKind::BN: {
        const Shape s{n.out_channels, 1, 1, 1};
        p.add(n.name + ".weight", Tensor(s, 1.0f));
        p.add(n.name + ".bias", Tensor(s, 0.0f));
        p.add(n.name + ".running_mean", Tensor(s, 0.0f), false);
        p.add(n.name + ".running_var", Tensor(s, 1.0f), false);
        break;
      }
      default:
        break;
    }
  }
  return p;
}

Model Model::create(const NetworkConfig& cfg) {
  Model m;
  m.config = cfg;
  m.graph = build_network(cfg);
  m.params = init_params(m.graph, cfg.seed);
  return m;
}

}  // namespace binsr
