#pragma once

#include <span>
#include <string>
#include <vector>

#include "conceptor/denoiser.hpp"
#include "conceptor/schedule.hpp"
#include "conceptor/synthetic.hpp"
#include "conceptor/vocabulary.hpp"

namespace conceptor {

/// f(w) = relu(w2 . relu(W1 w)), bias-free.
struct CoefficientMlp {
  Matrix w1;                // h x d
  Eigen::RowVectorXd w2;    // 1 x h

  /// W1 ~ N(0, 1/d), w2 ~ N(0, scale^2 / h); with `nonnegative`, w2 is
  /// replaced by its absolute value so every token starts with f(w) > 0.
  static CoefficientMlp initialize(Eigen::Index dim, Eigen::Index hidden, std::uint64_t seed, double scale = 1.0,
                                   bool nonnegative = false);

  Eigen::Index dim() const { return w1.cols(); }
  Eigen::Index hidden() const { return w1.rows(); }
  double operator()(const Vector& w) const;
};

/// Candidate embeddings, one per column.
Matrix candidate_matrix(const Vocabulary& vocab, std::span<const TokenId> candidates);

/// alpha_i = f(w_i) >= 0 for each candidate, in candidate order.
Vector coefficients(const CoefficientMlp& mlp, const Vocabulary& vocab, std::span<const TokenId> candidates);

struct RankedToken {
  TokenId token_id;
  double coefficient;
  friend bool operator==(const RankedToken&, const RankedToken&) = default;
};

struct WeightedToken {
  TokenId token_id;
  double weight;
};

/// Sum of weight * E[token] accumulated in ascending token-id order. Zero
/// weights are skipped, so dropping a token and scaling it by 0 give the same
/// bits.
Vector combine_tokens(const Vocabulary& vocab, std::vector<WeightedToken> terms);

/// Sorts by descending coefficient, then ascending token id.
void sort_ranked(std::vector<RankedToken>& ranked);

/// The n largest coefficients (ties by ascending id).
std::vector<RankedToken> top_n(std::span<const TokenId> candidates, const Vector& alpha, std::size_t n);

struct PseudoTokens {
  Vector w_star_full;
  std::vector<RankedToken> ranked;
  Vector w_star;
};

/// w*_N over all candidates, the top-n ranking, and w* over the ranking.
/// Coefficients are not renormalized after truncation.
PseudoTokens build_pseudo_tokens(const CoefficientMlp& mlp, const Vocabulary& vocab,
                                 std::span<const TokenId> candidates, std::size_t n);

Vector pseudo_token_from_ranked(const Vocabulary& vocab, const std::vector<RankedToken>& ranked);

struct SparsityLoss {
  double value = 0.0;
  bool degenerate = false;
  Vector grad_star;
  Vector grad_full;
};

/// 1 - cosine(w*, w*_N) with gradients. Either norm below 1e-12 yields 0 and
/// the degenerate flag.
SparsityLoss sparsity_loss(const Vector& w_star, const Vector& w_star_full);

/// Per-image noise and timestep for one reconstruction-loss evaluation.
struct NoiseDraw {
  Matrix eps;           // image_dim x batch
  std::vector<int> t;   // in 1..T
};

/// For each image: eps ~ N(0, I) then t ~ U{1..T}.
NoiseDraw draw_noise(Rng& rng, std::size_t batch, Eigen::Index image_dim, int T);

struct ReconstructionLoss {
  double value = 0.0;
  /// d value / d pseudo; empty when not requested.
  Vector grad;
};

/// Mean squared noise-prediction error over the batch, conditioned on
/// "a photo of a <pseudo>". Throws ComputeError on a non-finite loss.
ReconstructionLoss reconstruction_loss(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                                       const std::vector<Image>& batch, const Vector& pseudo,
                                       const NoiseDraw& draw, bool want_grad = true);

ReconstructionLoss reconstruction_loss(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                                       const std::vector<Image>& batch, const Vector& pseudo, Rng& rng,
                                       bool want_grad = true);

struct DecompositionConfig {
  int n = 8;
  double lambda_sparsity = 1e-3;
  double lr = 1e-3;
  int max_steps = 500;
  int batch = 6;
  /// 0 disables validation; the final step is returned.
  int val_every = 50;
  int val_count = 20;
  std::uint64_t seed = 1024;
  std::uint64_t val_seed = 2;
  int hidden = 64;
  double init_scale = 0.1;
  bool nonnegative_init = true;
  /// Vocabulary pre-filter size; 0 keeps every non-null token.
  int top_m = 0;
  double guidance_scale = 3.0;
  int sampler_steps = 100;
};

struct TrainingStep {
  int step;
  double reconstruction;
  double sparsity;
  double total;
};

struct ValidationPoint {
  int step;
  double score;
};

struct TrainingLog {
  std::vector<TrainingStep> steps;
  std::vector<ValidationPoint> validations;
  int selected_step = 0;
};

struct Decomposition {
  std::string concept_name;
  TokenId concept_token_id = -1;
  std::string vocab_hash;
  std::string subject_hash;
  CoefficientMlp mlp;
  std::vector<TokenId> candidate_ids;
  int n = 0;
  std::vector<RankedToken> ranked;
  Vector w_star_full;
  Vector w_star;
  double lambda_sparsity = 0.0;
  DecompositionConfig config;
  std::uint64_t seed = 0;
  TrainingLog log;
  /// Notes from derived edits (e.g. debiasing); empty for trained results.
  std::vector<std::string> provenance;

  bool contains(TokenId id) const;
  double coefficient(TokenId id) const;
};

}  // namespace conceptor
