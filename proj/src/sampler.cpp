#include "conceptor/sampler.hpp"

#include <cmath>

namespace conceptor {

Matrix guide(const Matrix& eps_uncond, const Matrix& eps_cond, double guidance_scale) {
  if (guidance_scale == 1.0) return eps_cond;
  if (guidance_scale == 0.0) return eps_uncond;
  return eps_uncond + guidance_scale * (eps_cond - eps_uncond);
}

std::vector<int> sampling_timesteps(const NoiseSchedule& sched, int steps) {
  const int T = sched.steps();
  require(steps >= 1 && steps <= T, "sampler: steps must be in [1, T]", "steps");
  const int last = T - 1;
  std::vector<int> out;
  if (steps >= last) {
    for (int t = last; t >= 1; --t) out.push_back(t);
    return out;
  }
  for (int i = steps - 1; i >= 0; --i) {
    const int t = steps == 1 ? last
                             : 1 + static_cast<int>(std::lround(static_cast<double>(last - 1) * i / (steps - 1)));
    if (out.empty() || out.back() != t) out.push_back(t);
  }
  return out;
}

std::vector<Image> sample_batch(const Denoiser& model, const NoiseSchedule& sched, const Vector& cond,
                                const Vector& uncond, std::span<const std::uint64_t> seeds,
                                double guidance_scale, int steps, const HiddenHook* hook) {
  require(guidance_scale >= 0.0, "sampler: guidance_scale must be >= 0", "guidance_scale");
  require(cond.size() == model.cond_dim() && uncond.size() == model.cond_dim(), "sampler: conditioning dimension");
  require(!seeds.empty(), "sampler: no seeds");
  const auto K = static_cast<Eigen::Index>(seeds.size());
  const Eigen::Index D = model.image_dim();
  const auto ts = sampling_timesteps(sched, steps);

  std::vector<Rng> rngs;
  rngs.reserve(seeds.size());
  for (auto s : seeds) rngs.emplace_back(s);

  Matrix x(D, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    auto col = x.col(k);
    fill_normal(rngs[static_cast<std::size_t>(k)], col);
  }

  Matrix conds(cond.size(), 2 * K);
  for (Eigen::Index k = 0; k < K; ++k) {
    conds.col(k) = cond;
    conds.col(K + k) = uncond;
  }
  Matrix z2(D, 2 * K);
  std::vector<int> tcol(static_cast<std::size_t>(2 * K));
  Vector noise(D);

  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
    z2.leftCols(K) = x;
    z2.rightCols(K) = x;
    std::fill(tcol.begin(), tcol.end(), t);
    const Matrix eps_both = model.predict(z2, tcol, conds, hook);
    const Matrix eps = guide(eps_both.rightCols(K), eps_both.leftCols(K), guidance_scale);

    const double ab = sched.alpha_bar(t);
    const double ab_prev = sched.alpha_bar(t_prev);
    const double beta = 1.0 - ab / ab_prev;
    Matrix x0 = (x - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
    x0 = x0.cwiseMax(-1.0).cwiseMin(1.0);
    const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
    const double ct = std::sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab);
    x = c0 * x0 + ct * x;
    if (t_prev > 0) {
      const double sigma = std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab));
      for (Eigen::Index k = 0; k < K; ++k) {
        fill_normal(rngs[static_cast<std::size_t>(k)], noise);
        x.col(k) += sigma * noise;
      }
    }
  }
  std::vector<Image> out;
  out.reserve(seeds.size());
  for (Eigen::Index k = 0; k < K; ++k) out.emplace_back(x.col(k).cwiseMax(-1.0).cwiseMin(1.0));
  return out;
}

Image sample_conditioned(const Denoiser& model, const NoiseSchedule& sched, const Vector& cond,
                         const Vector& uncond, const SamplerConfig& cfg, const HiddenHook* hook) {
  const std::uint64_t seed = cfg.seed;
  return sample_batch(model, sched, cond, uncond, std::span<const std::uint64_t>(&seed, 1), cfg.guidance_scale,
                      cfg.steps, hook)
      .front();
}

Image sample(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab, const Prompt& prompt,
             const SamplerConfig& cfg, const HiddenHook* hook) {
  return sample_conditioned(model, sched, encode_prompt(vocab, prompt), encode_prompt(vocab, null_prompt(vocab)),
                            cfg, hook);
}

}  // namespace conceptor
