#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "conceptor/common.hpp"

namespace conceptor {

/// Called with the first hidden layer (hidden x batch) and the per-column
/// timesteps; may rewrite the activations in place.
using HiddenHook = std::function<void(Matrix& hidden, std::span<const int> t)>;

/// Conditional noise predictor eps(z_t, t, c). Batches are column-major: one
/// sample per column.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual Eigen::Index image_dim() const = 0;
  virtual Eigen::Index cond_dim() const = 0;
  /// Width of the hookable hidden layer, 0 when the model has none.
  virtual Eigen::Index hidden_dim() const { return 0; }

  virtual Matrix predict(const Matrix& z_t, std::span<const int> t, const Matrix& cond,
                         const HiddenHook* hook = nullptr) const = 0;

  /// Gradient of <grad_out, predict(z_t, t, cond)> with respect to cond.
  virtual Matrix cond_vjp(const Matrix& z_t, std::span<const int> t, const Matrix& cond,
                          const Matrix& grad_out) const = 0;

  virtual std::string weights_hash() const = 0;
};

struct DenoiserArch {
  Eigen::Index image_dim = 3072;
  Eigen::Index cond_dim = 64;
  Eigen::Index hidden = 256;
  Eigen::Index time_dim = 32;
  int residual_layers = 2;
  /// Largest timestep; the sinusoidal embedding is stretched to a 1000-step range.
  int max_t = 100;
  /// alpha_bar[0..max_t] of the training schedule. When set, the network
  /// output F is a clean-image estimate and
  ///   eps = k_t (z - sqrt(ab_t) F),  k_t = s_t / (s_t^2 + signal_scale^2 ab_t),  s_t = sqrt(1 - ab_t).
  /// When empty, eps = F.
  std::vector<double> alpha_bar;
  double signal_scale = 0.1;
};

/// Sinusoidal embedding of t (time_dim x batch).
Matrix time_embedding(std::span<const int> t, Eigen::Index time_dim, int max_t);

struct NamedBlock {
  std::string name;
  std::vector<std::uint32_t> shape;
  /// Row-major values.
  std::vector<double> values;
};

/// Residual fully-connected denoiser:
///   h0 = silu(W_in [z; temb; c] + b_in)
///   h_{k+1} = h_k + silu(W_k h_k + U_k [temb; c] + b_k)
///   eps = W_out h_L + b_out
class MlpDenoiser final : public Denoiser {
 public:
  struct Params {
    Matrix w_in;
    Vector b_in;
    std::vector<Matrix> w_res;
    std::vector<Matrix> u_res;
    std::vector<Vector> b_res;
    Matrix w_out;
    Vector b_out;

    void set_zero_like(const Params& other);
    template <class F>
    void for_each(F&& f);
    template <class F>
    void for_each_pair(Params& other, F&& f);
  };

  struct Cache {
    Matrix x;   // [z; temb; c]
    Matrix tc;  // [temb; c]
    Matrix a0;
    std::vector<Matrix> h;  // h[0] .. h[L]
    std::vector<Matrix> a;  // pre-activations of residual layers
    Eigen::RowVectorXd out_scale;
  };

  MlpDenoiser(DenoiserArch arch, Params params);

  /// He-style normal init; the output layer starts at zero when `zero_output`.
  static MlpDenoiser initialize(const DenoiserArch& arch, std::uint64_t seed, bool zero_output = true);

  Eigen::Index image_dim() const override { return arch_.image_dim; }
  Eigen::Index cond_dim() const override { return arch_.cond_dim; }
  Eigen::Index hidden_dim() const override { return arch_.hidden; }

  Matrix predict(const Matrix& z_t, std::span<const int> t, const Matrix& cond,
                 const HiddenHook* hook = nullptr) const override;
  Matrix cond_vjp(const Matrix& z_t, std::span<const int> t, const Matrix& cond,
                  const Matrix& grad_out) const override;
  std::string weights_hash() const override;

  Matrix forward(const Matrix& z_t, std::span<const int> t, const Matrix& cond, Cache* cache,
                 const HiddenHook* hook = nullptr) const;
  /// Parameter gradients of <grad_out, output>; optionally the cond gradient.
  Params backward(const Cache& cache, const Matrix& grad_out, Matrix* grad_cond = nullptr) const;

  const DenoiserArch& arch() const { return arch_; }
  const Params& params() const { return params_; }
  /// Throws std::logic_error once frozen.
  Params& mutable_params();

  /// Rounds parameters to float32 and fixes the weights hash.
  void freeze();
  bool frozen() const { return frozen_; }

  std::vector<NamedBlock> blocks() const;
  static MlpDenoiser from_blocks(const std::vector<NamedBlock>& blocks, Eigen::Index cond_dim, int max_t,
                                 std::vector<double> alpha_bar = {}, double signal_scale = 0.1);

 private:
  /// Per-column (skip, out) coefficients of the output parametrization.
  std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> output_scales(std::span<const int> t) const;
  Matrix stack_time_cond(std::span<const int> t, const Matrix& cond) const;
  void check_inputs(const Matrix& z_t, std::span<const int> t, const Matrix& cond) const;

  DenoiserArch arch_;
  Params params_;
  bool frozen_ = false;
  std::string hash_;
};

template <class F>
void MlpDenoiser::Params::for_each(F&& f) {
  f(w_in);
  f(b_in);
  for (auto& m : w_res) f(m);
  for (auto& m : u_res) f(m);
  for (auto& v : b_res) f(v);
  f(w_out);
  f(b_out);
}

template <class F>
void MlpDenoiser::Params::for_each_pair(Params& other, F&& f) {
  f(w_in, other.w_in);
  f(b_in, other.b_in);
  for (std::size_t k = 0; k < w_res.size(); ++k) f(w_res[k], other.w_res[k]);
  for (std::size_t k = 0; k < u_res.size(); ++k) f(u_res[k], other.u_res[k]);
  for (std::size_t k = 0; k < b_res.size(); ++k) f(b_res[k], other.b_res[k]);
  f(w_out, other.w_out);
  f(b_out, other.b_out);
}

}  // namespace conceptor
