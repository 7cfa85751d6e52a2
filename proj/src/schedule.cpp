#include "conceptor/schedule.hpp"

#include <cmath>

namespace conceptor {

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
  require(alpha_bar_.size() >= 2, "schedule: need at least one step");
  require(alpha_bar_.front() == 1.0, "schedule: alpha_bar[0] must be 1");
  require(alpha_bar_.back() == 0.0, "schedule: alpha_bar[T] must be 0");
  const int T = steps();
  betas_.resize(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    const double prev = alpha_bar_[t - 1], cur = alpha_bar_[t];
    require(cur < prev, "schedule: alpha_bar must be strictly decreasing");
    betas_[t - 1] = 1.0 - cur / prev;
    if (t < T) require(betas_[t - 1] > 0.0 && betas_[t - 1] < 1.0, "schedule: beta out of (0, 1)");
  }
}

NoiseSchedule make_linear_schedule(const ScheduleConfig& config) {
  require(config.steps >= 2, "schedule: steps must be >= 2", "steps");
  require(config.beta_start > 0 && config.beta_end >= config.beta_start, "schedule: invalid beta range", "beta_start");
  const int T = config.steps;
  std::vector<double> sqrt_ab(static_cast<std::size_t>(T + 1));
  double ab = 1.0;
  sqrt_ab[0] = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / (T - 1);
    const double beta = config.beta_start + frac * (config.beta_end - config.beta_start);
    ab *= 1.0 - beta;
    sqrt_ab[t] = std::sqrt(ab);
  }
  const double last = sqrt_ab[T];
  std::vector<double> alpha_bar(static_cast<std::size_t>(T + 1));
  for (int t = 0; t <= T; ++t) {
    const double s = (sqrt_ab[t] - last) / (1.0 - last);
    alpha_bar[t] = s * s;
  }
  alpha_bar[0] = 1.0;
  alpha_bar[T] = 0.0;
  return NoiseSchedule(std::move(alpha_bar));
}

Vector noise_image(const Vector& z, const Vector& eps, int t, const NoiseSchedule& sched) {
  require(z.size() == eps.size(), "noise_image: shape mismatch");
  require(t >= 0 && t <= sched.steps(), "noise_image: t out of range", "t");
  const double ab = sched.alpha_bar(t);
  // endpoints are returned verbatim so that signed zeros survive
  if (ab == 1.0) return z;
  if (ab == 0.0) return eps;
  return std::sqrt(ab) * z + std::sqrt(1.0 - ab) * eps;
}

}  // namespace conceptor
