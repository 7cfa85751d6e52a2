#pragma once

#include <map>
#include <string>
#include <vector>

#include "conceptor/decomposition.hpp"
#include "conceptor/sampler.hpp"
#include "conceptor/similarity.hpp"

namespace conceptor {

enum class RemovalOrder { ascending_coefficient, descending_coefficient };

std::string_view removal_order_name(RemovalOrder order);
RemovalOrder parse_removal_order(std::string_view name);

struct TraceEntry {
  TokenId token_id;
  double similarity;
  bool removed;
  int pass;
};

struct SingleImageResult {
  std::uint64_t seed = 0;
  double tau = 0.95;
  RemovalOrder order = RemovalOrder::ascending_coefficient;
  std::vector<RankedToken> surviving;
  std::vector<TraceEntry> trace;
  /// Oracle similarity between the reference and the surviving-set image is >= tau.
  bool final_image_matches = false;
  double final_similarity = 1.0;
  Image reference;
  Image final_image;
  /// Tentative-removal image of each trace entry.
  std::vector<Image> trace_images;
};

struct SingleImageConfig {
  double tau = 0.95;
  RemovalOrder order = RemovalOrder::ascending_coefficient;
  double guidance_scale = 3.0;
  int sampler_steps = 100;
};

/// The image generated from w = sum of `tokens` coefficients for one seed.
Image render_token_set(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                       const std::vector<RankedToken>& tokens, std::uint64_t seed, double guidance_scale,
                       int sampler_steps);

/// Greedy per-image pruning of the decomposition's ranked tokens.
SingleImageResult single_image_decompose(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                                         const Decomposition& dec, std::uint64_t seed, const SimilarityOracle& oracle,
                                         const SingleImageConfig& config = {});

struct SubsetScore {
  std::vector<TokenId> tokens;
  double similarity;
};

/// Exhaustive search over every subset of the ranked tokens (at most 8): the
/// smallest subsets whose image scores >= tau against the full reference.
std::vector<SubsetScore> brute_force_minimal_subsets(const Denoiser& model, const NoiseSchedule& sched,
                                                     const Vocabulary& vocab, const Decomposition& dec,
                                                     std::uint64_t seed, const SimilarityOracle& oracle,
                                                     const SingleImageConfig& config = {});

struct ManipulationRequest {
  /// token id -> non-negative scale on its coefficient; unlisted tokens keep scale 1.
  std::map<TokenId, double> edits;
  std::uint64_t seed = 0;
  double guidance_scale = 3.0;
  int sampler_steps = 100;
};

/// Coefficients of `dec` after applying the edits, in ranked order.
std::vector<RankedToken> edited_tokens(const Decomposition& dec, const std::map<TokenId, double>& edits);

Image manipulate(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                 const Decomposition& dec, const ManipulationRequest& request);

/// Copy of `dec` with the listed tokens' coefficients multiplied by `factor`
/// in [0, 1); re-ranked, w* recomputed, provenance appended.
Decomposition debias(const Decomposition& dec, const Vocabulary& vocab, const std::vector<TokenId>& token_ids,
                     double factor);

}  // namespace conceptor
