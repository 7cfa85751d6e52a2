#include "conceptor/decomposition.hpp"

#include <algorithm>
#include <cmath>

namespace conceptor {

CoefficientMlp CoefficientMlp::initialize(Eigen::Index dim, Eigen::Index hidden, std::uint64_t seed, double scale,
                                          bool nonnegative) {
  require(dim >= 1 && hidden >= 1, "coefficient mlp: dims must be positive", "hidden");
  Rng rng(seed);
  CoefficientMlp mlp{Matrix(hidden, dim), Eigen::RowVectorXd(hidden)};
  fill_normal(rng, mlp.w1);
  mlp.w1 /= std::sqrt(static_cast<double>(dim));
  fill_normal(rng, mlp.w2);
  mlp.w2 *= scale / std::sqrt(static_cast<double>(hidden));
  if (nonnegative) mlp.w2 = mlp.w2.cwiseAbs();
  return mlp;
}

double CoefficientMlp::operator()(const Vector& w) const {
  const Vector hidden_act = (w1 * w).cwiseMax(0.0);
  return std::max(0.0, w2.dot(hidden_act));
}

Matrix candidate_matrix(const Vocabulary& vocab, std::span<const TokenId> candidates) {
  Matrix m(static_cast<Eigen::Index>(vocab.dim()), static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = vocab.embedding(candidates[i]);
  return m;
}

Vector coefficients(const CoefficientMlp& mlp, const Vocabulary& vocab, std::span<const TokenId> candidates) {
  require(mlp.dim() == static_cast<Eigen::Index>(vocab.dim()), "coefficients: mlp input dim != vocab dim");
  const Matrix hidden_act = (mlp.w1 * candidate_matrix(vocab, candidates)).cwiseMax(0.0);
  return (mlp.w2 * hidden_act).transpose().cwiseMax(0.0);
}

Vector combine_tokens(const Vocabulary& vocab, std::vector<WeightedToken> terms) {
  std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.token_id < b.token_id; });
  Vector out = Vector::Zero(static_cast<Eigen::Index>(vocab.dim()));
  for (const auto& term : terms)
    if (term.weight != 0.0) out += term.weight * vocab.embedding(term.token_id);
  return out;
}

void sort_ranked(std::vector<RankedToken>& ranked) {
  std::sort(ranked.begin(), ranked.end(), [](const RankedToken& a, const RankedToken& b) {
    if (a.coefficient != b.coefficient) return a.coefficient > b.coefficient;
    return a.token_id < b.token_id;
  });
}

std::vector<RankedToken> top_n(std::span<const TokenId> candidates, const Vector& alpha, std::size_t n) {
  require(static_cast<std::size_t>(alpha.size()) == candidates.size(), "top_n: coefficient count mismatch");
  require(n <= candidates.size(),
          "n = " + std::to_string(n) + " exceeds the " + std::to_string(candidates.size()) + " candidate tokens", "n");
  std::vector<RankedToken> all;
  all.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    all.push_back({candidates[i], alpha[static_cast<Eigen::Index>(i)]});
  sort_ranked(all);
  all.resize(n);
  return all;
}

Vector pseudo_token_from_ranked(const Vocabulary& vocab, const std::vector<RankedToken>& ranked) {
  std::vector<WeightedToken> terms;
  terms.reserve(ranked.size());
  for (const auto& r : ranked) terms.push_back({r.token_id, r.coefficient});
  return combine_tokens(vocab, std::move(terms));
}

PseudoTokens build_pseudo_tokens(const CoefficientMlp& mlp, const Vocabulary& vocab,
                                 std::span<const TokenId> candidates, std::size_t n) {
  const Vector alpha = coefficients(mlp, vocab, candidates);
  std::vector<WeightedToken> all;
  all.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) all.push_back({candidates[i], alpha[static_cast<Eigen::Index>(i)]});
  PseudoTokens out;
  out.ranked = top_n(candidates, alpha, n);
  out.w_star_full = combine_tokens(vocab, std::move(all));
  out.w_star = pseudo_token_from_ranked(vocab, out.ranked);
  return out;
}

SparsityLoss sparsity_loss(const Vector& w_star, const Vector& w_star_full) {
  require(w_star.size() == w_star_full.size(), "sparsity_loss: dimension mismatch");
  SparsityLoss out;
  out.grad_star = Vector::Zero(w_star.size());
  out.grad_full = Vector::Zero(w_star.size());
  const double na = w_star.norm(), nb = w_star_full.norm();
  if (na < 1e-12 || nb < 1e-12) {
    out.degenerate = true;
    return out;
  }
  const double cosine = w_star.dot(w_star_full) / (na * nb);
  out.value = 1.0 - cosine;
  out.grad_star = -(w_star_full / (na * nb) - cosine * w_star / (na * na));
  out.grad_full = -(w_star / (na * nb) - cosine * w_star_full / (nb * nb));
  return out;
}

NoiseDraw draw_noise(Rng& rng, std::size_t batch, Eigen::Index image_dim, int T) {
  NoiseDraw d{Matrix(image_dim, static_cast<Eigen::Index>(batch)), std::vector<int>(batch)};
  std::uniform_int_distribution<int> pick_t(1, T);
  for (std::size_t b = 0; b < batch; ++b) {
    auto col = d.eps.col(static_cast<Eigen::Index>(b));
    fill_normal(rng, col);
    d.t[b] = pick_t(rng);
  }
  return d;
}

ReconstructionLoss reconstruction_loss(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                                       const std::vector<Image>& batch, const Vector& pseudo,
                                       const NoiseDraw& draw, bool want_grad) {
  require(!batch.empty(), "reconstruction_loss: empty batch");
  const auto B = static_cast<Eigen::Index>(batch.size());
  require(draw.eps.cols() == B && draw.eps.rows() == model.image_dim(), "reconstruction_loss: draw shape mismatch");
  const Prompt prompt = pseudo_token_prompt(vocab, pseudo);
  const Vector c = encode_prompt(vocab, prompt);
  Matrix z(model.image_dim(), B);
  for (Eigen::Index b = 0; b < B; ++b)
    z.col(b) = noise_image(batch[static_cast<std::size_t>(b)], draw.eps.col(b), draw.t[static_cast<std::size_t>(b)], sched);
  const Matrix cond = c.replicate(1, B);
  const Matrix diff = model.predict(z, draw.t, cond) - draw.eps;
  ReconstructionLoss out;
  out.value = diff.squaredNorm() / static_cast<double>(diff.size());
  if (!std::isfinite(out.value)) throw ComputeError("reconstruction_loss: non-finite loss");
  if (want_grad) {
    const Matrix dcond = model.cond_vjp(z, draw.t, cond, (2.0 / static_cast<double>(diff.size())) * diff);
    // the pseudo-token is one of the prompt's tokens in the mean
    out.grad = dcond.rowwise().sum() / static_cast<double>(prompt.token_ids.size());
  }
  return out;
}

ReconstructionLoss reconstruction_loss(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                                       const std::vector<Image>& batch, const Vector& pseudo, Rng& rng,
                                       bool want_grad) {
  const NoiseDraw draw = draw_noise(rng, batch.size(), model.image_dim(), sched.steps());
  return reconstruction_loss(model, sched, vocab, batch, pseudo, draw, want_grad);
}

bool Decomposition::contains(TokenId id) const {
  return std::any_of(ranked.begin(), ranked.end(), [&](const RankedToken& r) { return r.token_id == id; });
}

double Decomposition::coefficient(TokenId id) const {
  for (const auto& r : ranked)
    if (r.token_id == id) return r.coefficient;
  throw ValidationError("token " + std::to_string(id) + " is not in the decomposition", "token_id");
}

}  // namespace conceptor
