#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "conceptor/denoiser.hpp"
#include "conceptor/schedule.hpp"
#include "conceptor/synthetic.hpp"
#include "conceptor/vocabulary.hpp"

namespace conceptor {

struct SubjectTrainingConfig {
  int steps = 12000;
  int batch = 64;
  double lr = 3e-4;
  /// Final learning rate as a fraction of `lr` (cosine decay).
  double lr_floor = 0.1;
  /// Probability of replacing the whole prompt by the null token.
  double p_uncond = 0.1;
  /// Independent per-attribute probability of leaving an atom out of the prompt.
  double p_attribute_drop = 0.25;
  /// Per-sample loss weight clamp(SNR_t, min, max) / SNR_t; min 0 and max
  /// infinity give the plain noise-prediction loss.
  double snr_weight_min = 1.0;
  double snr_weight_max = 5.0;
  std::uint64_t seed = 0;
};

struct SubjectTrainingLog {
  std::vector<double> losses;
};

/// Conditioning used for a training image: one "a photo of <atom>" clause per
/// kept atom (see atom_prompt).
Prompt training_prompt(const Vocabulary& vocab, const ImageSample& sample, Rng& rng,
                       const SubjectTrainingConfig& config);

/// Adam on the noise-prediction loss with per-sample random (eps, t) and
/// classifier-free-guidance dropout. Returns the frozen model. Throws
/// ComputeError if the loss becomes non-finite.
MlpDenoiser train_subject(MlpDenoiser model, const std::vector<ImageSample>& corpus, const Vocabulary& vocab,
                          const NoiseSchedule& sched, const SubjectTrainingConfig& config,
                          SubjectTrainingLog* log = nullptr,
                          const std::function<void(int, double)>& progress = {});

/// Mean noise-prediction MSE of `model` on `images` conditioned on each
/// sample's full atom prompt, with (eps, t ~ U{1..T}) drawn from `seed`.
double heldout_denoising_loss(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                              const std::vector<ImageSample>& samples, std::uint64_t seed);

}  // namespace conceptor
