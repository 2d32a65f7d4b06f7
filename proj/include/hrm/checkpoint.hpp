#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "hrm/adam.hpp"
#include "hrm/model.hpp"

namespace hrm {

/// Binary checkpoint, little-endian:
///
///   "HRMCKPT1"  u32 version
///   config      i32 box_size width heads n_cycles t_low max_segments min_segments,
///               f64 epsilon, u64 seed
///   i64 step    u64 manifest_hash
///   u8 has_optimizer  i64 optimizer_step
///   u32 count, then per array: u32 name_len, name bytes, u32 rows, u32 cols, f32 data
///
/// Arrays follow ModelParams::named() order; Adam moments, when present, come
/// after as "adam.m/<name>" and "adam.v/<name>".
struct Checkpoint {
  ModelConfig config;
  std::int64_t step = 0;
  std::uint64_t manifest_hash = 0;
  ModelParams<float> params;
  std::optional<AdamState<float>> optimizer;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws IoError naming the path on any read or format failure.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hrm
