#include <doctest.h>

#include "conceptor/sampler.hpp"
#include "fixtures.hpp"

using namespace conceptor;
using testing::same_bits;

TEST_CASE("schedule endpoints and monotonicity") {
  const NoiseSchedule s = make_linear_schedule();
  CHECK(s.steps() == 100);
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.alpha_bar(100) == 0.0);
  for (int t = 1; t <= 100; ++t) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  for (int t = 1; t < 100; ++t) {
    CHECK(s.beta(t) > 0.0);
    CHECK(s.beta(t) < 1.0);
  }
  CHECK(s.beta(100) == 1.0);
}

TEST_CASE("schedule rejects non-monotone alpha_bar") {
  CHECK_THROWS_AS(NoiseSchedule({1.0, 0.5, 0.7, 0.0}), ValidationError);
  CHECK_THROWS_AS(NoiseSchedule({0.9, 0.5, 0.0}), ValidationError);
  CHECK_THROWS_AS(NoiseSchedule({1.0, 0.5, 0.1}), ValidationError);
}

TEST_CASE("noise_image endpoints are exact") {
  const NoiseSchedule s = make_linear_schedule();
  Rng rng(1);
  Vector z(64), eps(64);
  fill_normal(rng, z);
  fill_normal(rng, eps);
  CHECK(same_bits(noise_image(z, eps, 0, s), z));
  CHECK(same_bits(noise_image(z, eps, 100, s), eps));
  const Vector mid = noise_image(z, eps, 50, s);
  const Vector expect = std::sqrt(s.alpha_bar(50)) * z + std::sqrt(1 - s.alpha_bar(50)) * eps;
  CHECK((mid - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("guidance returns branches verbatim at 0 and 1") {
  Rng rng(2);
  Matrix u(5, 3), c(5, 3);
  fill_normal(rng, u);
  fill_normal(rng, c);
  CHECK(guide(u, c, 0.0) == u);
  CHECK(guide(u, c, 1.0) == c);
  CHECK((guide(u, c, 3.0) - (u + 3.0 * (c - u))).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("sampler visits T-1 down to 1") {
  const NoiseSchedule s = make_linear_schedule();
  const auto full = sampling_timesteps(s, 100);
  CHECK(full.front() == 99);
  CHECK(full.back() == 1);
  CHECK(full.size() == 99);
  const auto coarse = sampling_timesteps(s, 10);
  CHECK(coarse.front() == 99);
  CHECK(coarse.back() == 1);
  CHECK(std::is_sorted(coarse.rbegin(), coarse.rend()));
  CHECK_THROWS_AS(sampling_timesteps(s, 0), ValidationError);
  CHECK_THROWS_AS(sampling_timesteps(s, 101), ValidationError);
}

TEST_CASE("sampling is deterministic per seed") {
  const auto& b = testing::tiny_subject();
  const Prompt p = atom_prompt(b.vocab, {b.vocab.id("circle"), b.vocab.id("red")});
  const SamplerConfig cfg{3.0, 10, 5};
  const Image a = sample(b.model, b.schedule, b.vocab, p, cfg);
  const Image again = sample(b.model, b.schedule, b.vocab, p, cfg);
  CHECK(same_bits(a, again));
  const Image other = sample(b.model, b.schedule, b.vocab, p, SamplerConfig{3.0, 10, 6});
  CHECK_FALSE(same_bits(a, other));
}
