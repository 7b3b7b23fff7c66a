#pragma once

// Binary checkpoint layout (all integers and reals little-endian):
//
//   "SPA1"                      4 bytes magic
//   u32 version                 currently 1
//   u32 header_len, bytes       UTF-8 JSON: model architecture, schedule, code version
//   u32 param_count
//   param_count x record
//   u64 adam_step
//   u32 moment_count
//   moment_count x record       paths "m/<param>" and "v/<param>"
//
//   record := u32 path_len, path bytes (UTF-8),
//             u32 rank, rank x u64 dims,
//             prod(dims) x f64
//
// Records are written in sorted path order, so save(load(x)) is byte-identical.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "scorepa/autodiff.hpp"

namespace scorepa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::string header_json;
    std::map<std::string, nn::Tensor> params;
    std::uint64_t adam_step = 0;
    std::map<std::string, nn::Tensor> moments;
};

Checkpoint snapshot(const nn::ParamStore& store, std::string header_json);
/// Copies values (and Adam state) into store. Every parameter in store must be
/// present with the same shape; throws ParseError otherwise.
void restore(const Checkpoint& ckpt, nn::ParamStore& store);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace scorepa
