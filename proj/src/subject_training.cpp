#include "conceptor/subject_training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "conceptor/adam.hpp"

namespace conceptor {

Prompt training_prompt(const Vocabulary& vocab, const ImageSample& sample, Rng& rng,
                       const SubjectTrainingConfig& config) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool drop_all = unit(rng) < config.p_uncond;
  std::vector<TokenId> kept;
  for (const auto& atom : sample.atoms)
    if (unit(rng) >= config.p_attribute_drop) kept.push_back(atom.token_id);
  if (drop_all) return null_prompt(vocab);
  return atom_prompt(vocab, kept);
}

MlpDenoiser train_subject(MlpDenoiser model, const std::vector<ImageSample>& corpus, const Vocabulary& vocab,
                          const NoiseSchedule& sched, const SubjectTrainingConfig& config, SubjectTrainingLog* log,
                          const std::function<void(int, double)>& progress) {
  require(!corpus.empty(), "train_subject: empty corpus", "corpus");
  require(config.batch >= 1 && config.steps >= 0, "train_subject: invalid batch/steps", "batch");
  require(config.p_uncond >= 0 && config.p_uncond <= 1, "train_subject: p_uncond out of [0, 1]", "p_uncond");
  require(config.snr_weight_min >= 0 && config.snr_weight_max >= config.snr_weight_min,
          "train_subject: need 0 <= snr_weight_min <= snr_weight_max", "snr_weight_min");
  const bool weighted = config.snr_weight_min > 0 || std::isfinite(config.snr_weight_max);
  require(model.cond_dim() == static_cast<Eigen::Index>(vocab.dim()), "train_subject: cond_dim != vocab dim");
  require(model.image_dim() == corpus.front().pixels.size(), "train_subject: image dim mismatch");

  Rng rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  std::uniform_int_distribution<int> pick_t(1, sched.steps());
  Adam adam(AdamConfig{config.lr});
  const Eigen::Index D = model.image_dim();
  const Eigen::Index B = config.batch;

  Matrix z(D, B), eps(D, B), cond(model.cond_dim(), B);
  Eigen::RowVectorXd weight = Eigen::RowVectorXd::Ones(B);
  std::vector<int> ts(static_cast<std::size_t>(B));
  for (int step = 0; step < config.steps; ++step) {
    for (Eigen::Index b = 0; b < B; ++b) {
      const auto& s = corpus[pick(rng)];
      const int t = pick_t(rng);
      ts[static_cast<std::size_t>(b)] = t;
      auto e = eps.col(b);
      fill_normal(rng, e);
      const double ab = sched.alpha_bar(t);
      z.col(b) = std::sqrt(ab) * s.pixels + std::sqrt(1.0 - ab) * eps.col(b);
      cond.col(b) = encode_prompt(vocab, training_prompt(vocab, s, rng, config));
      if (weighted && ab > 0) {
        const double snr = ab / (1.0 - ab);
        weight[b] = std::clamp(snr, config.snr_weight_min, config.snr_weight_max) / snr;
      }
    }
    MlpDenoiser::Cache cache;
    const Matrix pred = model.forward(z, ts, cond, &cache);
    const Matrix diff = pred - eps;
    const double loss = diff.squaredNorm() / static_cast<double>(diff.size());
    if (!std::isfinite(loss))
      throw ComputeError("train_subject: non-finite loss at step " + std::to_string(step));
    if (log != nullptr) log->losses.push_back(loss);
    if (progress) progress(step, loss);

    auto grads = model.backward(cache, (2.0 / static_cast<double>(diff.size())) * (diff * weight.asDiagonal()));
    const double frac = config.steps > 1 ? static_cast<double>(step) / (config.steps - 1) : 0.0;
    const double lr_scale = config.lr_floor + (1.0 - config.lr_floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
    adam.set_lr(config.lr * lr_scale);
    adam.begin_step();
    std::size_t slot = 0;
    model.mutable_params().for_each_pair(grads, [&](auto& p, auto& g) { adam.update(slot++, p, g); });
  }
  model.freeze();
  return model;
}

double heldout_denoising_loss(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                              const std::vector<ImageSample>& samples, std::uint64_t seed) {
  require(!samples.empty(), "heldout_denoising_loss: no samples");
  Rng rng(seed);
  std::uniform_int_distribution<int> pick_t(1, sched.steps());
  const auto B = static_cast<Eigen::Index>(samples.size());
  const Eigen::Index D = model.image_dim();
  Matrix z(D, B), eps(D, B), cond(model.cond_dim(), B);
  std::vector<int> ts(samples.size());
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& s = samples[static_cast<std::size_t>(b)];
    const int t = pick_t(rng);
    ts[static_cast<std::size_t>(b)] = t;
    auto e = eps.col(b);
    fill_normal(rng, e);
    z.col(b) = noise_image(s.pixels, eps.col(b), t, sched);
    std::vector<TokenId> atoms;
    for (const auto& a : s.atoms) atoms.push_back(a.token_id);
    cond.col(b) = encode_prompt(vocab, atom_prompt(vocab, atoms));
  }
  const Matrix pred = model.predict(z, ts, cond);
  return (pred - eps).squaredNorm() / static_cast<double>(pred.size());
}

}  // namespace conceptor
