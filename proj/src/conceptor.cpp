#include "conceptor/conceptor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "conceptor/adam.hpp"
#include "conceptor/sampler.hpp"

namespace conceptor {

namespace {

constexpr std::uint64_t kStreamSalt = 0x9e3779b97f4a7c15ULL;

std::vector<TokenId> non_null_tokens(const Vocabulary& vocab) {
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < vocab.size(); ++i)
    if (static_cast<TokenId>(i) != vocab.null_id()) out.push_back(static_cast<TokenId>(i));
  return out;
}

std::vector<Image> gather(const std::vector<Image>& images, const std::vector<std::size_t>& idx) {
  std::vector<Image> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(images[i]);
  return out;
}

}  // namespace

void validate_decomposition_config(const DecompositionConfig& c, const Vocabulary& vocab) {
  require(c.n >= 1, "n must be >= 1", "n");
  require(c.lambda_sparsity >= 0.0, "lambda_sparsity must be >= 0", "lambda_sparsity");
  require(c.lr > 0.0, "lr must be > 0", "lr");
  require(c.max_steps >= 1, "max_steps must be >= 1", "max_steps");
  require(c.batch >= 1, "batch must be >= 1", "batch");
  require(c.val_every >= 0, "val_every must be >= 0", "val_every");
  require(c.val_every == 0 || c.val_count >= 1, "val_count must be >= 1", "val_count");
  require(c.hidden >= 1, "hidden must be >= 1", "hidden");
  require(c.top_m >= 0, "top_m must be >= 0", "top_m");
  require(c.guidance_scale >= 0.0, "guidance_scale must be >= 0", "guidance_scale");
  require(c.sampler_steps >= 1, "sampler_steps must be >= 1", "sampler_steps");
  const std::size_t available = vocab.size() - 1;
  require(static_cast<std::size_t>(c.top_m) <= available,
          "top_m must be <= " + std::to_string(available) + " (non-null tokens)", "top_m");
  const std::size_t candidates = c.top_m > 0 ? static_cast<std::size_t>(c.top_m) : available;
  require(static_cast<std::size_t>(c.n) <= candidates,
          "n = " + std::to_string(c.n) + " exceeds the " + std::to_string(candidates) + " candidate tokens", "n");
}

BatchStream::BatchStream(std::size_t corpus_size, std::size_t batch, Eigen::Index image_dim, int T,
                         std::uint64_t seed)
    : corpus_size_(corpus_size), batch_(batch), image_dim_(image_dim), T_(T), rng_(seed), cursor_(corpus_size) {
  require(corpus_size >= batch && batch >= 1, "batch stream: corpus smaller than batch", "batch");
  order_.resize(corpus_size);
}

BatchStream::Batch BatchStream::next() {
  Batch b;
  while (b.indices.size() < batch_) {
    if (cursor_ == corpus_size_) {
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    b.indices.push_back(order_[cursor_++]);
  }
  b.draw = draw_noise(rng_, batch_, image_dim_, T_);
  return b;
}

std::vector<double> token_denoising_scores(const Vocabulary& vocab, const std::vector<Image>& corpus,
                                           const Denoiser& model, const NoiseSchedule& sched, std::uint64_t seed,
                                           std::size_t subsample) {
  require(!corpus.empty(), "filter_vocabulary: empty corpus", "corpus");
  Rng rng(seed);
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(subsample, idx.size()));
  const auto images = gather(corpus, idx);
  const NoiseDraw draw = draw_noise(rng, images.size(), model.image_dim(), sched.steps());
  std::vector<double> scores(vocab.size(), std::numeric_limits<double>::infinity());
  for (std::size_t tok = 0; tok < vocab.size(); ++tok) {
    if (static_cast<TokenId>(tok) == vocab.null_id()) continue;
    const Vector e = vocab.embedding(static_cast<TokenId>(tok));
    scores[tok] = reconstruction_loss(model, sched, vocab, images, e, draw, false).value;
  }
  return scores;
}

std::vector<TokenId> filter_vocabulary(const Vocabulary& vocab, const std::vector<Image>& corpus,
                                       const Denoiser& model, const NoiseSchedule& sched, std::size_t top_m,
                                       std::uint64_t seed, std::size_t subsample) {
  require(top_m >= 1 && top_m <= vocab.size() - 1,
          "top_m must be in [1, " + std::to_string(vocab.size() - 1) + "]", "top_m");
  const auto scores = token_denoising_scores(vocab, corpus, model, sched, seed, subsample);
  std::vector<TokenId> ids = non_null_tokens(vocab);
  std::stable_sort(ids.begin(), ids.end(), [&](TokenId a, TokenId b) { return scores[a] < scores[b]; });
  ids.resize(top_m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

double validation_score(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                        const Vector& pseudo, const std::vector<Image>& validation, const DecompositionConfig& config,
                        const SimilarityOracle& oracle) {
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(config.val_count));
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = config.val_seed + i;
  const Vector cond = encode_prompt(vocab, pseudo_token_prompt(vocab, pseudo));
  const Vector uncond = encode_prompt(vocab, null_prompt(vocab));
  const auto generated = sample_batch(model, sched, cond, uncond, seeds, config.guidance_scale,
                                      std::min(config.sampler_steps, sched.steps()));
  return mean_pairwise_similarity(oracle, generated, validation);
}

ObjectiveEval decomposition_objective(const CoefficientMlp& mlp, const Denoiser& model, const NoiseSchedule& sched,
                                      const Vocabulary& vocab, std::span<const TokenId> candidates, std::size_t n,
                                      double lambda_sparsity, const std::vector<Image>& batch,
                                      const NoiseDraw& draw) {
  const Matrix cand = candidate_matrix(vocab, candidates);
  const Matrix z1 = mlp.w1 * cand;
  const Matrix a1 = z1.cwiseMax(0.0);
  const Eigen::RowVectorXd z2 = mlp.w2 * a1;
  const Vector alpha = z2.transpose().cwiseMax(0.0);

  std::vector<WeightedToken> all;
  all.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) all.push_back({candidates[i], alpha[static_cast<Eigen::Index>(i)]});
  const auto ranked = top_n(candidates, alpha, n);
  const Vector full = combine_tokens(vocab, std::move(all));
  const Vector star = pseudo_token_from_ranked(vocab, ranked);

  const auto rec = reconstruction_loss(model, sched, vocab, batch, full, draw, true);
  const auto sp = sparsity_loss(star, full);

  ObjectiveEval out;
  out.reconstruction = rec.value;
  out.sparsity = sp.value;
  out.degenerate = sp.degenerate;
  out.total = rec.value + lambda_sparsity * sp.value;

  const Vector g_full = rec.grad + lambda_sparsity * sp.grad_full;
  const Vector g_star = lambda_sparsity * sp.grad_star;
  Eigen::RowVectorXd d_alpha = (cand.transpose() * g_full).transpose();
  for (const auto& r : ranked) {
    const auto pos = std::find(candidates.begin(), candidates.end(), r.token_id) - candidates.begin();
    d_alpha[pos] += cand.col(pos).dot(g_star);
  }
  const Eigen::RowVectorXd d_z2 = d_alpha.cwiseProduct((z2.array() > 0.0).cast<double>().matrix());
  out.grad_w2 = d_z2 * a1.transpose();
  const Matrix d_z1 = (mlp.w2.transpose() * d_z2).cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
  out.grad_w1 = d_z1 * cand.transpose();
  return out;
}

void refresh_pseudo_tokens(Decomposition& dec, const Vocabulary& vocab) {
  auto pt = build_pseudo_tokens(dec.mlp, vocab, dec.candidate_ids, static_cast<std::size_t>(dec.n));
  dec.ranked = std::move(pt.ranked);
  dec.w_star_full = std::move(pt.w_star_full);
  dec.w_star = std::move(pt.w_star);
}

Decomposition train_decomposition(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                                  const ConceptCorpus& corpus, const DecompositionConfig& config,
                                  const SimilarityOracle& oracle, const ProgressFn& progress) {
  validate_decomposition_config(config, vocab);
  require(model.cond_dim() == static_cast<Eigen::Index>(vocab.dim()), "decompose: model/vocab dimension mismatch");
  require(corpus.train.size() >= static_cast<std::size_t>(config.batch),
          "decompose: training corpus smaller than batch", "batch");
  require(config.val_every == 0 || !corpus.validation.empty(), "decompose: no validation images", "val_count");
  const std::string subject_hash = model.weights_hash();

  Decomposition dec;
  dec.concept_name = corpus.concept_name;
  dec.concept_token_id = corpus.concept_token_id;
  dec.vocab_hash = vocab.version_hash();
  dec.subject_hash = subject_hash;
  dec.n = config.n;
  dec.lambda_sparsity = config.lambda_sparsity;
  dec.config = config;
  dec.seed = config.seed;
  dec.candidate_ids = config.top_m > 0 ? filter_vocabulary(vocab, corpus.train, model, sched,
                                                           static_cast<std::size_t>(config.top_m), config.seed)
                                       : non_null_tokens(vocab);
  require(static_cast<std::size_t>(config.n) <= dec.candidate_ids.size(),
          "n = " + std::to_string(config.n) + " exceeds the " + std::to_string(dec.candidate_ids.size()) +
              " candidate tokens",
          "n");

  CoefficientMlp mlp = CoefficientMlp::initialize(static_cast<Eigen::Index>(vocab.dim()), config.hidden,
                                                  config.seed, config.init_scale, config.nonnegative_init);
  CoefficientMlp best = mlp;
  double best_score = -std::numeric_limits<double>::infinity();
  Adam adam(AdamConfig{config.lr});
  BatchStream stream(corpus.train.size(), static_cast<std::size_t>(config.batch), model.image_dim(), sched.steps(),
                     config.seed ^ kStreamSalt);

  for (int step = 1; step <= config.max_steps; ++step) {
    auto batch = stream.next();
    const auto images = gather(corpus.train, batch.indices);
    auto eval = decomposition_objective(mlp, model, sched, vocab, dec.candidate_ids,
                                        static_cast<std::size_t>(config.n), config.lambda_sparsity, images,
                                        batch.draw);
    if (!std::isfinite(eval.total)) throw ComputeError("decompose: non-finite loss at step " + std::to_string(step));
    dec.log.steps.push_back({step, eval.reconstruction, eval.sparsity, eval.total});
    adam.begin_step();
    adam.update(0, mlp.w1, eval.grad_w1);
    adam.update(1, mlp.w2, eval.grad_w2);

    if (config.val_every > 0 && step % config.val_every == 0) {
      const auto pt = build_pseudo_tokens(mlp, vocab, dec.candidate_ids, static_cast<std::size_t>(config.n));
      const double score = validation_score(model, sched, vocab, pt.w_star, corpus.validation, config, oracle);
      dec.log.validations.push_back({step, score});
      if (score > best_score) {
        best_score = score;
        best = mlp;
        dec.log.selected_step = step;
      }
    }
    if (progress) progress(static_cast<double>(step) / config.max_steps);
  }
  if (config.val_every == 0 || dec.log.validations.empty()) {
    best = mlp;
    dec.log.selected_step = config.max_steps;
  }
  if (model.weights_hash() != subject_hash) throw ComputeError("decompose: subject weights changed during training");
  dec.mlp = std::move(best);
  refresh_pseudo_tokens(dec, vocab);
  return dec;
}

OptimizedToken optimize_token(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                              const ConceptCorpus& corpus, const TokenOptimizationConfig& config) {
  require(config.lr > 0 && config.max_steps >= 1 && config.batch >= 1, "optimize_token: invalid config", "lr");
  require(corpus.train.size() >= static_cast<std::size_t>(config.batch), "optimize_token: corpus smaller than batch",
          "batch");
  OptimizedToken out;
  out.init_token = corpus.concept_token_id;
  out.vector = vocab.embedding(corpus.concept_token_id);
  Adam adam(AdamConfig{config.lr});
  BatchStream stream(corpus.train.size(), static_cast<std::size_t>(config.batch), model.image_dim(), sched.steps(),
                     config.seed ^ kStreamSalt);
  for (int step = 1; step <= config.max_steps; ++step) {
    auto batch = stream.next();
    const auto rec = reconstruction_loss(model, sched, vocab, gather(corpus.train, batch.indices), out.vector,
                                         batch.draw, true);
    out.losses.push_back(rec.value);
    adam.begin_step();
    adam.update(0, out.vector, rec.grad);
  }
  return out;
}

double evaluate_reconstruction(const Denoiser& model, const NoiseSchedule& sched, const Vocabulary& vocab,
                               const std::vector<Image>& images, const Vector& pseudo, std::uint64_t seed) {
  Rng rng(seed);
  return reconstruction_loss(model, sched, vocab, images, pseudo, rng, false).value;
}

}  // namespace conceptor
