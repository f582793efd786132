#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "binsr/model_zoo.hpp"
#include "binsr/optim.hpp"
#include "binsr/train_config.hpp"

namespace binsr {

inline constexpr char kCheckpointMagic[4] = {'E', '2', 'F', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Little-endian layout:
///   "E2FC" | u32 version | u32 json_len | json {"network", "train"} |
///   u32 epoch | u64 step | params table | buffers table | moments table
/// where each table is u32 count followed by entries of
///   u32 name_len | name | u32 dims[4] | f32 data[numel].
/// Params are latent float weights; buffers are BN running statistics;
/// moments are named "m:<param>" and "v:<param>".
struct Checkpoint {
  NetworkConfig network;
  TrainConfig train;
  std::uint32_t epoch = 0;  // completed epochs
  std::uint64_t step = 0;   // optimizer steps taken
  std::vector<NamedTensor> params;
  std::vector<NamedTensor> buffers;
  std::vector<NamedTensor> moments;
};

std::string encode_checkpoint(const Checkpoint& ck);
/// Throws DataError on bad magic, unsupported version or truncation.
Checkpoint decode_checkpoint(const std::string& bytes);

/// Writes to a sibling temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const Model& model, const TrainConfig& train, const Adam* adam,
                           std::uint32_t epoch);
/// Rebuilds the model from the stored config and copies every tensor in.
Model restore_model(const Checkpoint& ck);
void restore_adam(const Checkpoint& ck, Adam& adam);

}  // namespace binsr
