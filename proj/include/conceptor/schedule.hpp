#pragma once

#include <vector>

#include "conceptor/common.hpp"

namespace conceptor {

/// Cumulative signal coefficients for t = 0..T. alpha_bar[0] = 1 and
/// alpha_bar[T] = 0 exactly; betas[t-1] is the variance of step t.
class NoiseSchedule {
 public:
  /// Throws ValidationError unless alpha_bar is strictly decreasing from 1 to
  /// 0 and 0 < beta_t < 1 for t < T (beta_T = 1 follows from alpha_bar[T] = 0).
  explicit NoiseSchedule(std::vector<double> alpha_bar);

  int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
  double beta(int t) const { return betas_.at(static_cast<std::size_t>(t - 1)); }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }
  const std::vector<double>& betas() const { return betas_; }

 private:
  std::vector<double> alpha_bar_;
  std::vector<double> betas_;
};

struct ScheduleConfig {
  int steps = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

/// Linear betas, then sqrt(alpha_bar) is shifted and rescaled so that the
/// terminal value is exactly zero while alpha_bar[0] stays 1.
NoiseSchedule make_linear_schedule(const ScheduleConfig& config = {});

/// z_t = sqrt(alpha_bar[t]) z + sqrt(1 - alpha_bar[t]) eps.
Vector noise_image(const Vector& z, const Vector& eps, int t, const NoiseSchedule& sched);

}  // namespace conceptor
