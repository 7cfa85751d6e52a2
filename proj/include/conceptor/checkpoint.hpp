#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "conceptor/denoiser.hpp"
#include "conceptor/schedule.hpp"
#include "conceptor/vocabulary.hpp"

namespace conceptor {

/// Everything needed to run the frozen subject model.
struct SubjectBundle {
  Vocabulary vocab;
  NoiseSchedule schedule;
  MlpDenoiser model;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, little-endian:
///   "CPSM" | u32 version | u32 N | u32 d | u32 T
///   | f32 embeddings (N x d, row per token) | f64 alpha_bar (T+1) | f64 betas (T)
///   | per token: u32 length, UTF-8 name, u8 role
///   | u32 time_dim | f64 signal_scale | u32 block count
///   | per block: u32 length, name, u32 rank, u32 dims..., f32 values (row-major)
///   | SHA-256 of all preceding bytes
std::vector<std::uint8_t> encode_checkpoint(const Vocabulary& vocab, const NoiseSchedule& sched,
                                            const MlpDenoiser& model);

/// Throws IntegrityError on a bad magic, version, digest or truncated body.
SubjectBundle decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Vocabulary& vocab, const NoiseSchedule& sched,
                     const MlpDenoiser& model);
SubjectBundle load_checkpoint(const std::filesystem::path& path);

}  // namespace conceptor
