#pragma once

#include <functional>
#include <string>
#include <vector>

#include "conceptor/decomposition.hpp"
#include "conceptor/similarity.hpp"

namespace conceptor {

/// Images of one concept: the training set and the held-out images used for
/// checkpoint selection.
struct ConceptCorpus {
  std::string concept_name;
  TokenId concept_token_id = -1;
  std::vector<Image> train;
  std::vector<Image> validation;
};

/// Deterministic sequence of training batches: epoch-wise shuffled image
/// indices, then the per-image (eps, t) draw. Decomposition and token
/// optimization consume identical streams for identical seeds.
class BatchStream {
 public:
  BatchStream(std::size_t corpus_size, std::size_t batch, Eigen::Index image_dim, int T, std::uint64_t seed);

  struct Batch {
    std::vector<std::size_t> indices;
    NoiseDraw draw;
  };
  Batch next();

 private:
  std::size_t corpus_size_;
  std::size_t batch_;
  Eigen::Index image_dim_;
  int T_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_;
};

/// Ranks every non-null token by its mean one-step denoising loss when used
/// as the prompt's only content token, on a seeded draw over up to
/// `subsample` images. Returns the top_m lowest-loss ids in ascending order.
std::vector<TokenId> filter_vocabulary(const Vocabulary& vocab, const std::vector<Image>& corpus,
                                       const Denoiser& model, const NoiseSchedule& sched, std::size_t top_m,
                                       std::uint64_t seed, std::size_t subsample = 32);

/// Per-token filter scores (mean loss) in token order; null gets +inf.
std::vector<double> token_denoising_scores(const Vocabulary& vocab, const std::vector<Image>& corpus,
                                           const Denoiser& model, const NoiseSchedule& sched, std::uint64_t seed,
                                           std::size_t subsample = 32);

/// Mean pairwise oracle similarity between images generated from `pseudo`
/// with seeds val_seed + i (i < val_count) and the validation images.
double validation_score(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                        const Vector& pseudo, const std::vector<Image>& validation, const DecompositionConfig& config,
                        const SimilarityOracle& oracle);

/// Total objective L_rec(w*_N) + lambda L_sparsity(w*, w*_N) and its gradient
/// with respect to both MLP matrices.
struct ObjectiveEval {
  double reconstruction = 0.0;
  double sparsity = 0.0;
  double total = 0.0;
  bool degenerate = false;
  Matrix grad_w1;
  Eigen::RowVectorXd grad_w2;
};

ObjectiveEval decomposition_objective(const CoefficientMlp& mlp, const Denoiser& model, const NoiseSchedule& sched,
                                      const Vocabulary& vocab, std::span<const TokenId> candidates, std::size_t n,
                                      double lambda_sparsity, const std::vector<Image>& batch,
                                      const NoiseDraw& draw);

/// Throws ValidationError naming the offending field, including n larger
/// than the candidate count.
void validate_decomposition_config(const DecompositionConfig& config, const Vocabulary& vocab);

using ProgressFn = std::function<void(double fraction)>;

/// Learns the coefficient MLP with Adam; checkpoints are scored every
/// val_every steps and the best one is returned.
Decomposition train_decomposition(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                                  const ConceptCorpus& corpus, const DecompositionConfig& config,
                                  const SimilarityOracle& oracle, const ProgressFn& progress = {});

/// Recomputes ranked / w* / w*_N of `dec` from its MLP.
void refresh_pseudo_tokens(Decomposition& dec, const Vocabulary& vocab);

struct OptimizedToken {
  Vector vector;
  std::vector<double> losses;
  TokenId init_token = -1;
};

struct TokenOptimizationConfig {
  double lr = 1e-2;
  int max_steps = 500;
  int batch = 6;
  std::uint64_t seed = 1024;
};

/// A free vector trained on the reconstruction loss alone, initialised at the
/// concept token's embedding.
OptimizedToken optimize_token(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                              const ConceptCorpus& corpus, const TokenOptimizationConfig& config);

/// Reconstruction loss of `pseudo` over all `images` with one fixed draw.
double evaluate_reconstruction(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                               const std::vector<Image>& images, const Vector& pseudo, std::uint64_t seed);

}  // namespace conceptor
