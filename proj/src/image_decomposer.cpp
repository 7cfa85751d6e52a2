#include "conceptor/image_decomposer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

namespace conceptor {

std::string_view removal_order_name(RemovalOrder order) {
  return order == RemovalOrder::ascending_coefficient ? "ascending_coefficient" : "descending_coefficient";
}

RemovalOrder parse_removal_order(std::string_view name) {
  if (name == "ascending_coefficient") return RemovalOrder::ascending_coefficient;
  if (name == "descending_coefficient") return RemovalOrder::descending_coefficient;
  throw ValidationError("unknown removal order '" + std::string(name) + "'", "order");
}

Image render_token_set(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                       const std::vector<RankedToken>& tokens, std::uint64_t seed, double guidance_scale,
                       int sampler_steps) {
  const Vector pseudo = pseudo_token_from_ranked(vocab, tokens);
  return sample(model, sched, vocab, pseudo_token_prompt(vocab, pseudo),
                SamplerConfig{guidance_scale, sampler_steps, seed});
}

namespace {

void check_tau(double tau) { require(tau > 0.0 && tau < 1.0, "tau must lie in (0, 1)", "tau"); }

void check_decomposition(const Decomposition& dec, const Vocabulary& vocab) {
  require(!dec.ranked.empty(), "decomposition has no ranked tokens", "decomposition");
  for (const auto& r : dec.ranked)
    require(vocab.contains(r.token_id), "decomposition token outside the vocabulary", "decomposition");
}

}  // namespace

SingleImageResult single_image_decompose(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                                         const Decomposition& dec, std::uint64_t seed, const SimilarityOracle& oracle,
                                         const SingleImageConfig& config) {
  check_tau(config.tau);
  check_decomposition(dec, vocab);
  auto render = [&](const std::vector<RankedToken>& tokens) {
    return render_token_set(model, sched, vocab, tokens, seed, config.guidance_scale, config.sampler_steps);
  };

  SingleImageResult result;
  result.seed = seed;
  result.tau = config.tau;
  result.order = config.order;
  result.reference = render(dec.ranked);

  std::vector<RankedToken> current = dec.ranked;
  for (int pass = 0; !current.empty(); ++pass) {
    std::vector<RankedToken> order = current;
    std::stable_sort(order.begin(), order.end(), [&](const RankedToken& a, const RankedToken& b) {
      if (a.coefficient != b.coefficient)
        return config.order == RemovalOrder::ascending_coefficient ? a.coefficient < b.coefficient
                                                                   : a.coefficient > b.coefficient;
      return a.token_id < b.token_id;
    });
    bool removed_any = false;
    for (const auto& candidate : order) {
      std::vector<RankedToken> without;
      for (const auto& r : current)
        if (r.token_id != candidate.token_id) without.push_back(r);
      Image tentative = render(without);
      const double sim = oracle.similarity(result.reference, tentative);
      const bool remove = sim >= config.tau;
      result.trace.push_back({candidate.token_id, sim, remove, pass});
      result.trace_images.push_back(std::move(tentative));
      if (remove) {
        current = std::move(without);
        removed_any = true;
      }
    }
    if (!removed_any) break;
  }
  result.surviving = current;
  result.final_image = render(current);
  result.final_similarity = oracle.similarity(result.reference, result.final_image);
  result.final_image_matches = result.final_similarity >= config.tau;
  return result;
}

std::vector<SubsetScore> brute_force_minimal_subsets(const Denoiser& model, const NoiseSchedule& sched,
                                                     const Vocabulary& vocab, const Decomposition& dec,
                                                     std::uint64_t seed, const SimilarityOracle& oracle,
                                                     const SingleImageConfig& config) {
  check_tau(config.tau);
  check_decomposition(dec, vocab);
  const std::size_t k = dec.ranked.size();
  require(k <= 8, "brute-force subset search supports at most 8 tokens", "n");
  const Image reference =
      render_token_set(model, sched, vocab, dec.ranked, seed, config.guidance_scale, config.sampler_steps);

  std::vector<SubsetScore> best;
  int best_size = static_cast<int>(k) + 1;
  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    const int size = std::popcount(mask);
    if (size > best_size) continue;
    std::vector<RankedToken> subset;
    for (std::size_t i = 0; i < k; ++i)
      if (mask & (1u << i)) subset.push_back(dec.ranked[i]);
    const double sim = oracle.similarity(
        reference, render_token_set(model, sched, vocab, subset, seed, config.guidance_scale, config.sampler_steps));
    if (sim < config.tau) continue;
    if (size < best_size) {
      best.clear();
      best_size = size;
    }
    SubsetScore score{{}, sim};
    for (const auto& r : subset) score.tokens.push_back(r.token_id);
    best.push_back(std::move(score));
  }
  return best;
}

std::vector<RankedToken> edited_tokens(const Decomposition& dec, const std::map<TokenId, double>& edits) {
  for (const auto& [id, scale] : edits) {
    require(dec.contains(id), "token " + std::to_string(id) + " is not in the decomposition", "edits");
    require(std::isfinite(scale) && scale >= 0.0, "edit scale must be finite and >= 0", "edits");
  }
  std::vector<RankedToken> out = dec.ranked;
  for (auto& r : out) {
    auto it = edits.find(r.token_id);
    if (it != edits.end() && it->second != 1.0) r.coefficient *= it->second;
  }
  return out;
}

Image manipulate(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                 const Decomposition& dec, const ManipulationRequest& request) {
  return render_token_set(model, sched, vocab, edited_tokens(dec, request.edits), request.seed,
                          request.guidance_scale, request.sampler_steps);
}

Decomposition debias(const Decomposition& dec, const Vocabulary& vocab, const std::vector<TokenId>& token_ids,
                     double factor) {
  require(factor >= 0.0 && factor < 1.0, "debias factor must lie in [0, 1)", "factor");
  require(!token_ids.empty(), "debias needs at least one token", "token_ids");
  std::map<TokenId, double> edits;
  for (TokenId id : token_ids) edits[id] = factor;
  Decomposition out = dec;
  out.ranked = edited_tokens(dec, edits);
  sort_ranked(out.ranked);
  out.w_star = pseudo_token_from_ranked(vocab, out.ranked);
  std::ostringstream note;
  note.precision(17);
  note << "debias factor=" << factor << " tokens=";
  for (std::size_t i = 0; i < token_ids.size(); ++i)
    note << (i ? "," : "") << vocab.token(token_ids[i]);
  out.provenance.push_back(note.str());
  return out;
}

}  // namespace conceptor
