#include "binsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "binsr/error.hpp"

namespace binsr {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  template <class T>
  void pod(T v) {
    const char* p = reinterpret_cast<const char*>(&v);
    out_.append(p, sizeof v);
  }
  void bytes(const std::string& s) { out_.append(s); }
  void table(const std::vector<NamedTensor>& entries) {
    pod(static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
      pod(static_cast<std::uint32_t>(e.name.size()));
      bytes(e.name);
      for (int d : e.value.shape().dims()) pod(static_cast<std::uint32_t>(d));
      const auto data = e.value.data();
      out_.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(float));
    }
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string r = s_.substr(pos_, n);
    pos_ += n;
    return r;
  }
  std::vector<NamedTensor> table() {
    const auto count = pod<std::uint32_t>();
    std::vector<NamedTensor> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
      NamedTensor e;
      e.name = bytes(pod<std::uint32_t>());
      Shape s;
      s.n = static_cast<int>(pod<std::uint32_t>());
      s.c = static_cast<int>(pod<std::uint32_t>());
      s.h = static_cast<int>(pod<std::uint32_t>());
      s.w = static_cast<int>(pod<std::uint32_t>());
      if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) throw DataError("checkpoint: bad tensor dims");
      const std::size_t n = s.numel();
      need(n * sizeof(float));
      std::vector<float> data(n);
      std::memcpy(data.data(), s_.data() + pos_, n * sizeof(float));
      pos_ += n * sizeof(float);
      e.value = Tensor(s, std::move(data));
      entries.push_back(std::move(e));
    }
    return entries;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (s_.size() - pos_ < n) throw DataError("checkpoint: truncated file");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ck) {
  Writer w;
  w.bytes(std::string(kCheckpointMagic, 4));
  w.pod(kCheckpointVersion);
  const std::string meta = nlohmann::json{{"network", to_json(ck.network)}, {"train", to_json(ck.train)}}.dump();
  w.pod(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta);
  w.pod(ck.epoch);
  w.pod(ck.step);
  w.table(ck.params);
  w.table(ck.buffers);
  w.table(ck.moments);
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(4) != std::string(kCheckpointMagic, 4)) throw DataError("checkpoint: bad magic");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  const std::string meta = r.bytes(r.pod<std::uint32_t>());
  try {
    const auto j = nlohmann::json::parse(meta);
    ck.network = network_config_from_json(j.at("network"));
    ck.train = train_config_from_json(j.at("train"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad config block: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: bad config block: ") + e.what());
  }
  ck.epoch = r.pod<std::uint32_t>();
  ck.step = r.pod<std::uint64_t>();
  ck.params = r.table();
  ck.buffers = r.table();
  ck.moments = r.table();
  if (!r.done()) throw DataError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const std::string bytes = encode_checkpoint(ck);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Checkpoint make_checkpoint(const Model& model, const TrainConfig& train, const Adam* adam,
                           std::uint32_t epoch) {
  Checkpoint ck;
  ck.network = model.config;
  ck.train = train;
  ck.epoch = epoch;
  for (const auto& [name, p] : model.params) {
    Tensor plain(p.value.shape(), p.value.storage());
    (p.trainable ? ck.params : ck.buffers).push_back({name, std::move(plain)});
  }
  if (adam) {
    ck.step = adam->steps();
    for (const auto& [name, mom] : adam->moments()) {
      const Shape s = model.params.at(name).value.shape();
      ck.moments.push_back({"m:" + name, Tensor(s, mom.m)});
      ck.moments.push_back({"v:" + name, Tensor(s, mom.v)});
    }
  }
  return ck;
}

Model restore_model(const Checkpoint& ck) {
  Model m = Model::create(ck.network);
  std::size_t seen = 0;
  auto copy_in = [&](const std::vector<NamedTensor>& table, bool trainable) {
    for (const auto& e : table) {
      if (!m.params.contains(e.name)) throw DataError("checkpoint: unknown tensor '" + e.name + "'");
      Parameter& p = m.params.at(e.name);
      if (p.trainable != trainable || p.value.shape() != e.value.shape()) {
        throw DataError("checkpoint: tensor '" + e.name + "' does not match the network (" +
                        e.value.shape().str() + " vs " + p.value.shape().str() + ")");
      }
      std::copy(e.value.storage().begin(), e.value.storage().end(), p.value.storage().begin());
      ++seen;
    }
  };
  copy_in(ck.params, true);
  copy_in(ck.buffers, false);
  if (seen != m.params.size()) throw DataError("checkpoint: missing tensors for this network");
  return m;
}

void restore_adam(const Checkpoint& ck, Adam& adam) {
  adam.set_steps(ck.step);
  adam.moments().clear();
  for (const auto& e : ck.moments) {
    if (e.name.size() < 3 || e.name[1] != ':') throw DataError("checkpoint: bad moment name '" + e.name + "'");
    AdamMoments& mom = adam.moments()[e.name.substr(2)];
    if (e.name[0] == 'm') mom.m = e.value.storage();
    else if (e.name[0] == 'v') mom.v = e.value.storage();
    else throw DataError("checkpoint: bad moment name '" + e.name + "'");
  }
}

}  // namespace binsr
