#pragma once

#include <span>
#include <vector>

#include "conceptor/denoiser.hpp"
#include "conceptor/schedule.hpp"
#include "conceptor/synthetic.hpp"
#include "conceptor/vocabulary.hpp"

namespace conceptor {

struct SamplerConfig {
  double guidance_scale = 3.0;
  /// Number of denoiser evaluations along the chain (<= T).
  int steps = 100;
  std::uint64_t seed = 0;
};

/// eps_u + g (eps_c - eps_u); g = 0 and g = 1 return the respective branch verbatim.
Matrix guide(const Matrix& eps_uncond, const Matrix& eps_cond, double guidance_scale);

/// Descending timesteps visited by the sampler. alpha_bar[T] = 0 carries no
/// signal, so the chain starts at T - 1 with z_T as its state.
std::vector<int> sampling_timesteps(const NoiseSchedule& sched, int steps);

/// Ancestral DDPM sampling of one image per seed with classifier-free
/// guidance. Each seed owns its own generator (initial noise, then one draw
/// per stochastic step). Results depend on the number of seeds in the batch
/// only through floating-point blocking, so bit-exact comparisons must use
/// the same batch size.
std::vector<Image> sample_batch(const Denoiser& model, const NoiseSchedule& sched, const Vector& cond,
                                const Vector& uncond, std::span<const std::uint64_t> seeds,
                                double guidance_scale, int steps, const HiddenHook* hook = nullptr);

/// One image from a raw conditioning vector, unconditional branch `uncond`.
Image sample_conditioned(const Denoiser& model, const NoiseSchedule& sched, const Vector& cond,
                         const Vector& uncond, const SamplerConfig& cfg, const HiddenHook* hook = nullptr);

/// One image for a prompt; the unconditional branch uses the null token.
Image sample(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab, const Prompt& prompt,
             const SamplerConfig& cfg, const HiddenHook* hook = nullptr);

}  // namespace conceptor
