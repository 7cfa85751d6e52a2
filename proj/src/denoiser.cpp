#include "conceptor/denoiser.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "conceptor/sha256.hpp"

namespace conceptor {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix silu(const Matrix& a) {
  return a.unaryExpr([](double x) { return x * sigmoid(x); });
}

Matrix silu_grad(const Matrix& a) {
  return a.unaryExpr([](double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
  });
}

void append_block(std::vector<NamedBlock>& out, std::string name, const Matrix& m) {
  NamedBlock b{std::move(name), {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, {}};
  b.values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) b.values.push_back(m(i, j));
  out.push_back(std::move(b));
}

void append_block(std::vector<NamedBlock>& out, std::string name, const Vector& v) {
  NamedBlock b{std::move(name), {static_cast<std::uint32_t>(v.size())}, {v.data(), v.data() + v.size()}};
  out.push_back(std::move(b));
}

const NamedBlock& find_block(const std::vector<NamedBlock>& blocks, const std::string& name) {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw IntegrityError("checkpoint: missing parameter block '" + name + "'");
}

Matrix block_matrix(const NamedBlock& b) {
  if (b.shape.size() != 2) throw IntegrityError("checkpoint: block '" + b.name + "' is not a matrix");
  Matrix m(b.shape[0], b.shape[1]);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = b.values[static_cast<std::size_t>(i * m.cols() + j)];
  return m;
}

Vector block_vector(const NamedBlock& b) {
  if (b.shape.size() != 1) throw IntegrityError("checkpoint: block '" + b.name + "' is not a vector");
  return Eigen::Map<const Vector>(b.values.data(), static_cast<Eigen::Index>(b.values.size()));
}

}  // namespace

Matrix time_embedding(std::span<const int> t, Eigen::Index time_dim, int max_t) {
  const Eigen::Index half = time_dim / 2;
  Matrix out = Matrix::Zero(time_dim, static_cast<Eigen::Index>(t.size()));
  const double stretch = 1000.0 / max_t;
  for (std::size_t b = 0; b < t.size(); ++b) {
    const double pos = t[b] * stretch;
    for (Eigen::Index i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
      out(i, static_cast<Eigen::Index>(b)) = std::sin(pos * freq);
      out(half + i, static_cast<Eigen::Index>(b)) = std::cos(pos * freq);
    }
  }
  return out;
}

void MlpDenoiser::Params::set_zero_like(const Params& other) {
  w_in = Matrix::Zero(other.w_in.rows(), other.w_in.cols());
  b_in = Vector::Zero(other.b_in.size());
  w_res.clear();
  u_res.clear();
  b_res.clear();
  for (const auto& m : other.w_res) w_res.push_back(Matrix::Zero(m.rows(), m.cols()));
  for (const auto& m : other.u_res) u_res.push_back(Matrix::Zero(m.rows(), m.cols()));
  for (const auto& v : other.b_res) b_res.push_back(Vector::Zero(v.size()));
  w_out = Matrix::Zero(other.w_out.rows(), other.w_out.cols());
  b_out = Vector::Zero(other.b_out.size());
}

MlpDenoiser::MlpDenoiser(DenoiserArch arch, Params params) : arch_(arch), params_(std::move(params)) {
  const Eigen::Index in_dim = arch_.image_dim + arch_.time_dim + arch_.cond_dim;
  const Eigen::Index tc_dim = arch_.time_dim + arch_.cond_dim;
  require(arch_.time_dim % 2 == 0, "denoiser: time_dim must be even", "time_dim");
  require(arch_.max_t >= 1, "denoiser: max_t must be positive", "max_t");
  require(arch_.signal_scale > 0.0, "denoiser: signal_scale must be positive", "signal_scale");
  require(arch_.alpha_bar.empty() || static_cast<int>(arch_.alpha_bar.size()) == arch_.max_t + 1,
          "denoiser: alpha_bar must have max_t + 1 entries", "alpha_bar");
  require(params_.w_in.rows() == arch_.hidden && params_.w_in.cols() == in_dim, "denoiser: w_in shape");
  require(params_.b_in.size() == arch_.hidden, "denoiser: b_in shape");
  require(static_cast<int>(params_.w_res.size()) == arch_.residual_layers &&
              static_cast<int>(params_.u_res.size()) == arch_.residual_layers &&
              static_cast<int>(params_.b_res.size()) == arch_.residual_layers,
          "denoiser: residual layer count");
  for (int k = 0; k < arch_.residual_layers; ++k) {
    require(params_.w_res[k].rows() == arch_.hidden && params_.w_res[k].cols() == arch_.hidden, "denoiser: w_res shape");
    require(params_.u_res[k].rows() == arch_.hidden && params_.u_res[k].cols() == tc_dim, "denoiser: u_res shape");
    require(params_.b_res[k].size() == arch_.hidden, "denoiser: b_res shape");
  }
  require(params_.w_out.rows() == arch_.image_dim && params_.w_out.cols() == arch_.hidden, "denoiser: w_out shape");
  require(params_.b_out.size() == arch_.image_dim, "denoiser: b_out shape");
}

MlpDenoiser MlpDenoiser::initialize(const DenoiserArch& arch, std::uint64_t seed, bool zero_output) {
  Rng rng(seed);
  const Eigen::Index in_dim = arch.image_dim + arch.time_dim + arch.cond_dim;
  const Eigen::Index tc_dim = arch.time_dim + arch.cond_dim;
  auto normal = [&](Eigen::Index rows, Eigen::Index cols, double std) {
    Matrix m(rows, cols);
    fill_normal(rng, m);
    return Matrix(m * std);
  };
  Params p;
  p.w_in = normal(arch.hidden, in_dim, std::sqrt(2.0 / static_cast<double>(in_dim)));
  p.b_in = Vector::Zero(arch.hidden);
  for (int k = 0; k < arch.residual_layers; ++k) {
    p.w_res.push_back(normal(arch.hidden, arch.hidden, std::sqrt(1.0 / static_cast<double>(arch.hidden))));
    p.u_res.push_back(normal(arch.hidden, tc_dim, std::sqrt(1.0 / static_cast<double>(tc_dim))));
    p.b_res.push_back(Vector::Zero(arch.hidden));
  }
  p.w_out = zero_output ? Matrix::Zero(arch.image_dim, arch.hidden)
                        : normal(arch.image_dim, arch.hidden, std::sqrt(1.0 / static_cast<double>(arch.hidden)));
  p.b_out = Vector::Zero(arch.image_dim);
  return MlpDenoiser(arch, std::move(p));
}

void MlpDenoiser::check_inputs(const Matrix& z_t, std::span<const int> t, const Matrix& cond) const {
  require(z_t.rows() == arch_.image_dim, "denoiser: z_t has " + std::to_string(z_t.rows()) + " rows, expected " +
                                             std::to_string(arch_.image_dim));
  require(cond.rows() == arch_.cond_dim, "denoiser: cond has " + std::to_string(cond.rows()) + " rows, expected " +
                                             std::to_string(arch_.cond_dim));
  require(cond.cols() == z_t.cols() && static_cast<Eigen::Index>(t.size()) == z_t.cols(),
          "denoiser: batch size mismatch");
  for (int v : t) require(v >= 0 && v <= arch_.max_t, "denoiser: timestep " + std::to_string(v) + " out of range", "t");
}

std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> MlpDenoiser::output_scales(std::span<const int> t) const {
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::RowVectorXd skip = Eigen::RowVectorXd::Zero(n), out = Eigen::RowVectorXd::Ones(n);
  if (arch_.alpha_bar.empty()) return {skip, out};
  for (Eigen::Index b = 0; b < n; ++b) {
    const int tb = t[static_cast<std::size_t>(b)];
    require(tb >= 0 && tb <= arch_.max_t, "denoiser: t out of range", "t");
    const double ab = arch_.alpha_bar[static_cast<std::size_t>(tb)];
    const double s = std::sqrt(1.0 - ab);
    const double k = s / (s * s + arch_.signal_scale * arch_.signal_scale * ab);
    skip[b] = k;
    out[b] = -k * std::sqrt(ab);
  }
  return {skip, out};
}

Matrix MlpDenoiser::stack_time_cond(std::span<const int> t, const Matrix& cond) const {
  Matrix tc(arch_.time_dim + arch_.cond_dim, cond.cols());
  tc.topRows(arch_.time_dim) = time_embedding(t, arch_.time_dim, arch_.max_t);
  tc.bottomRows(arch_.cond_dim) = cond;
  return tc;
}

Matrix MlpDenoiser::forward(const Matrix& z_t, std::span<const int> t, const Matrix& cond, Cache* cache,
                            const HiddenHook* hook) const {
  check_inputs(z_t, t, cond);
  const Eigen::Index batch = z_t.cols();
  Matrix tc = stack_time_cond(t, cond);
  Matrix x(arch_.image_dim + tc.rows(), batch);
  x.topRows(arch_.image_dim) = z_t;
  x.bottomRows(tc.rows()) = tc;

  Matrix a0 = params_.w_in * x;
  a0.colwise() += params_.b_in;
  Matrix h = silu(a0);
  if (hook != nullptr && *hook) (*hook)(h, t);

  std::vector<Matrix> hs, as;
  if (cache != nullptr) hs.push_back(h);
  for (int k = 0; k < arch_.residual_layers; ++k) {
    Matrix a = params_.w_res[k] * h;
    a.noalias() += params_.u_res[k] * tc;
    a.colwise() += params_.b_res[k];
    h += silu(a);
    if (cache != nullptr) {
      as.push_back(std::move(a));
      hs.push_back(h);
    }
  }
  Matrix out = params_.w_out * h;
  out.colwise() += params_.b_out;
  const auto [skip, scale] = output_scales(t);
  if (!arch_.alpha_bar.empty()) {
    out.array().rowwise() *= scale.array();
    out.noalias() += z_t * skip.asDiagonal();
  }
  if (cache != nullptr) {
    cache->out_scale = scale;
    cache->x = std::move(x);
    cache->tc = std::move(tc);
    cache->a0 = std::move(a0);
    cache->h = std::move(hs);
    cache->a = std::move(as);
  }
  return out;
}

MlpDenoiser::Params MlpDenoiser::backward(const Cache& cache, const Matrix& grad_eps, Matrix* grad_cond) const {
  const Matrix grad_out = grad_eps * cache.out_scale.asDiagonal();
  Params g;
  g.w_out.noalias() = grad_out * cache.h.back().transpose();
  g.b_out = grad_out.rowwise().sum();
  Matrix dh = params_.w_out.transpose() * grad_out;
  Matrix dtc = Matrix::Zero(cache.tc.rows(), cache.tc.cols());
  g.w_res.resize(static_cast<std::size_t>(arch_.residual_layers));
  g.u_res.resize(static_cast<std::size_t>(arch_.residual_layers));
  g.b_res.resize(static_cast<std::size_t>(arch_.residual_layers));
  for (int k = arch_.residual_layers - 1; k >= 0; --k) {
    Matrix da = dh.cwiseProduct(silu_grad(cache.a[k]));
    g.w_res[k].noalias() = da * cache.h[k].transpose();
    g.u_res[k].noalias() = da * cache.tc.transpose();
    g.b_res[k] = da.rowwise().sum();
    dh.noalias() += params_.w_res[k].transpose() * da;
    dtc.noalias() += params_.u_res[k].transpose() * da;
  }
  Matrix da0 = dh.cwiseProduct(silu_grad(cache.a0));
  g.w_in.noalias() = da0 * cache.x.transpose();
  g.b_in = da0.rowwise().sum();
  if (grad_cond != nullptr) {
    *grad_cond = params_.w_in.rightCols(arch_.cond_dim).transpose() * da0;
    *grad_cond += dtc.bottomRows(arch_.cond_dim);
  }
  return g;
}

Matrix MlpDenoiser::predict(const Matrix& z_t, std::span<const int> t, const Matrix& cond,
                            const HiddenHook* hook) const {
  return forward(z_t, t, cond, nullptr, hook);
}

Matrix MlpDenoiser::cond_vjp(const Matrix& z_t, std::span<const int> t, const Matrix& cond,
                             const Matrix& grad_out) const {
  Cache cache;
  forward(z_t, t, cond, &cache);
  require(grad_out.rows() == arch_.image_dim && grad_out.cols() == z_t.cols(), "denoiser: grad_out shape");
  // Only the cond path is needed: skip every parameter gradient.
  Matrix dh = params_.w_out.transpose() * (grad_out * cache.out_scale.asDiagonal());
  Matrix dcond = Matrix::Zero(arch_.cond_dim, z_t.cols());
  for (int k = arch_.residual_layers - 1; k >= 0; --k) {
    Matrix da = dh.cwiseProduct(silu_grad(cache.a[k]));
    dh.noalias() += params_.w_res[k].transpose() * da;
    dcond.noalias() += params_.u_res[k].rightCols(arch_.cond_dim).transpose() * da;
  }
  Matrix da0 = dh.cwiseProduct(silu_grad(cache.a0));
  dcond.noalias() += params_.w_in.rightCols(arch_.cond_dim).transpose() * da0;
  return dcond;
}

MlpDenoiser::Params& MlpDenoiser::mutable_params() {
  if (frozen_) throw std::logic_error("denoiser is frozen");
  return params_;
}

void MlpDenoiser::freeze() {
  if (frozen_) return;
  params_.for_each([](auto& m) { round_to_float(m); });
  frozen_ = true;
  hash_ = weights_hash();
}

std::vector<NamedBlock> MlpDenoiser::blocks() const {
  std::vector<NamedBlock> out;
  append_block(out, "w_in", params_.w_in);
  append_block(out, "b_in", params_.b_in);
  for (int k = 0; k < arch_.residual_layers; ++k) {
    const std::string prefix = "res" + std::to_string(k) + ".";
    append_block(out, prefix + "w", params_.w_res[k]);
    append_block(out, prefix + "u", params_.u_res[k]);
    append_block(out, prefix + "b", params_.b_res[k]);
  }
  append_block(out, "w_out", params_.w_out);
  append_block(out, "b_out", params_.b_out);
  return out;
}

MlpDenoiser MlpDenoiser::from_blocks(const std::vector<NamedBlock>& blocks, Eigen::Index cond_dim, int max_t,
                                     std::vector<double> alpha_bar, double signal_scale) {
  Params p;
  p.w_in = block_matrix(find_block(blocks, "w_in"));
  p.b_in = block_vector(find_block(blocks, "b_in"));
  p.w_out = block_matrix(find_block(blocks, "w_out"));
  p.b_out = block_vector(find_block(blocks, "b_out"));
  int layers = 0;
  while (true) {
    const std::string prefix = "res" + std::to_string(layers) + ".";
    bool present = false;
    for (const auto& b : blocks) present = present || b.name == prefix + "w";
    if (!present) break;
    p.w_res.push_back(block_matrix(find_block(blocks, prefix + "w")));
    p.u_res.push_back(block_matrix(find_block(blocks, prefix + "u")));
    p.b_res.push_back(block_vector(find_block(blocks, prefix + "b")));
    ++layers;
  }
  DenoiserArch arch;
  arch.image_dim = p.w_out.rows();
  arch.hidden = p.w_out.cols();
  arch.cond_dim = cond_dim;
  arch.time_dim = p.w_in.cols() - arch.image_dim - cond_dim;
  arch.residual_layers = layers;
  arch.max_t = max_t;
  arch.alpha_bar = std::move(alpha_bar);
  arch.signal_scale = signal_scale;
  if (arch.time_dim <= 0) throw IntegrityError("checkpoint: inconsistent w_in width");
  MlpDenoiser model(arch, std::move(p));
  model.freeze();
  return model;
}

std::string MlpDenoiser::weights_hash() const {
  if (frozen_ && !hash_.empty()) return hash_;
  Sha256 h;
  for (const auto& b : blocks()) {
    h.update(b.name);
    for (auto s : b.shape) h.update(std::to_string(s) + ",");
    for (double v : b.values) {
      auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      const std::uint8_t le[4] = {static_cast<std::uint8_t>(bits), static_cast<std::uint8_t>(bits >> 8),
                                  static_cast<std::uint8_t>(bits >> 16), static_cast<std::uint8_t>(bits >> 24)};
      h.update(std::span<const std::uint8_t>(le, 4));
    }
  }
  if (!arch_.alpha_bar.empty()) {
    h.update("alpha_bar");
    h.update(std::to_string(arch_.signal_scale));
    for (double v : arch_.alpha_bar) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      std::uint8_t le[8];
      for (int i = 0; i < 8; ++i) le[i] = static_cast<std::uint8_t>(bits >> (8 * i));
      h.update(std::span<const std::uint8_t>(le, 8));
    }
  }
  return to_hex(h.finish());
}

}  // namespace conceptor
