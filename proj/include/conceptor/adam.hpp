#pragma once

#include <cmath>
#include <vector>

#include "conceptor/common.hpp"

namespace conceptor {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Parameters are addressed by slot index; call
/// begin_step() once per iteration, then update() for every slot.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void begin_step() { ++t_; }
  void set_lr(double lr) { config_.lr = lr; }
  long steps() const { return t_; }

  template <class P, class G>
  void update(std::size_t slot, Eigen::MatrixBase<P>& param, const Eigen::MatrixBase<G>& grad) {
    if (slot >= m_.size()) {
      m_.resize(slot + 1);
      v_.resize(slot + 1);
    }
    if (m_[slot].size() == 0) {
      m_[slot] = Matrix::Zero(param.rows(), param.cols());
      v_[slot] = Matrix::Zero(param.rows(), param.cols());
    }
    auto& m = m_[slot];
    auto& v = v_[slot];
    m = config_.beta1 * m + (1.0 - config_.beta1) * grad;
    v = config_.beta2 * v + (1.0 - config_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    param.array() -= config_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.eps);
  }

 private:
  AdamConfig config_;
  long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace conceptor
