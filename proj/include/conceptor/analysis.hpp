#pragma once

#include <string>
#include <vector>

#include "conceptor/conceptor.hpp"
#include "conceptor/sampler.hpp"

namespace conceptor {

// ---- robustness ----

/// |top-k(a) intersect top-k(b)| by exact token id.
int topk_intersection(const std::vector<RankedToken>& a, const std::vector<RankedToken>& b, std::size_t k);

struct IntersectionAtK {
  int k;
  double mean_count;
  double percentage;
};

struct IntersectionReport {
  std::string concept_name;
  std::vector<IntersectionAtK> per_k;
};

/// Mean over j >= 1 of |top-k(runs[0]) intersect top-k(runs[j])| for each k.
IntersectionReport intersection_report(const std::string& concept_name,
                                       const std::vector<std::vector<RankedToken>>& runs,
                                       const std::vector<int>& ks);

/// Standard deviation across concepts of the mean count at each k.
std::vector<double> intersection_stddev(const std::vector<IntersectionReport>& reports);

struct RobustnessResult {
  IntersectionReport report;
  std::vector<Decomposition> runs;
};

/// One decomposition per corpus; corpora[j] is trained with config.seed = seeds[j].
RobustnessResult robustness_study(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                                  const std::vector<ConceptCorpus>& corpora, const std::vector<std::uint64_t>& seeds,
                                  const DecompositionConfig& config, const SimilarityOracle& oracle,
                                  const std::vector<int>& ks = {3, 5, 8});

// ---- denoising generalization ----

struct GeneralizationInput {
  std::string name;
  Vector pseudo;
};

struct GeneralizationCurve {
  std::vector<std::string> names;
  TokenId random_token = -1;
  int T = 0;
  /// raw[c][t-1], normalized[c][t-1]: mean over images and draws.
  std::vector<std::vector<double>> raw;
  std::vector<std::vector<double>> normalized;
  /// Standard error across images of the per-timestep normalized loss.
  std::vector<std::vector<double>> stderr_t;
  /// Mean over t, and its standard error across images.
  std::vector<double> mean_normalized;
  std::vector<double> stderr_mean;
};

/// Conditionings are evaluated on identical (image, t, eps) triples. A random
/// candidate token (drawn once from `candidates` with `seed`) is appended as
/// the last conditioning and serves as the normalizer.
GeneralizationCurve generalization_study(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                                         const std::vector<GeneralizationInput>& inputs,
                                         std::span<const TokenId> candidates, const std::vector<Image>& test_images,
                                         int draws_per_t, std::uint64_t seed);

// ---- activation baselines ----

enum class BasisMethod { pca, kmeans, nmf };
std::string_view basis_method_name(BasisMethod method);
BasisMethod parse_basis_method(std::string_view name);

struct ActivationBasis {
  BasisMethod method = BasisMethod::pca;
  /// hidden_dim x n_components.
  Matrix components;
  /// PCA centering vector; zero for the other methods.
  Vector mean;
  std::vector<int> timesteps;
  int iterations = 0;
  int initializations = 0;
  std::string initialization;
  std::vector<std::string> warnings;

  Eigen::Index n_components() const { return components.cols(); }
  /// Projection-reconstruction of each column of `h` under the basis.
  Matrix reconstruct(const Matrix& h) const;
};

struct BasisFitConfig {
  int kmeans_inits = 10;
  int kmeans_iters = 100;
  int nmf_iters = 200;
  bool randomized_svd = false;
  int rsvd_iters = 5;
  int rsvd_oversamples = 10;
  std::uint64_t seed = 0;
};

/// Rows are samples, columns are features.
ActivationBasis fit_pca(const Matrix& samples, Eigen::Index n_c, const BasisFitConfig& config = {});
ActivationBasis fit_kmeans(const Matrix& samples, Eigen::Index n_c, const BasisFitConfig& config = {});
ActivationBasis fit_nmf(const Matrix& samples, Eigen::Index n_c, const BasisFitConfig& config = {});
ActivationBasis fit_basis(BasisMethod method, const Matrix& samples, Eigen::Index n_c, const BasisFitConfig& config = {});

/// Sum of squared distances from each sample (row) to its nearest centroid (column).
double quantization_error(const Matrix& samples, const Matrix& centroids);

/// First-hidden-layer activations (one row per recorded column) captured while
/// sampling from `cond` at the listed timesteps.
Matrix record_activations(const Denoiser& model, const NoiseSchedule& sched, const Vector& cond, const Vector& uncond,
                          std::span<const std::uint64_t> seeds, const std::vector<int>& timesteps,
                          double guidance_scale, int sampler_steps);

ActivationBasis fit_activation_basis(const Denoiser& model, const NoiseSchedule& sched, const Vector& cond,
                                     const Vector& uncond, BasisMethod method, Eigen::Index n_c,
                                     const std::vector<int>& timesteps, std::span<const std::uint64_t> seeds,
                                     const SamplerConfig& sampler = {}, const BasisFitConfig& config = {});

/// Samples with every first-hidden-layer activation replaced by its
/// reconstruction under `basis`.
Image sample_with_basis(const Denoiser& model, const NoiseSchedule& sched, const Vector& cond, const Vector& uncond,
                        const ActivationBasis& basis, const SamplerConfig& cfg);

}  // namespace conceptor
