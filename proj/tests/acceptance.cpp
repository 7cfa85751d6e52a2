// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance --lab DIR --prepare        train or reuse the cached subject
//   acceptance --lab DIR [--criterion K]  run one criterion, or all of them

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>

#include <unistd.h>

#include "conceptor/lab.hpp"
#include "conceptor/png.hpp"
#include "conceptor/report.hpp"

namespace fs = std::filesystem;
using namespace conceptor;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

const std::vector<std::uint64_t> kRecoverySeeds{1024, 1, 2};

bool same_bits(const Vector& a, const Vector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

std::vector<std::uint8_t> png_bytes(const Image& img) { return encode_png(to_raster(img)); }

SubjectBundle prepare_subject(const Workspace& ws) {
  const SubjectConfig config;
  const Json expected = subject_config_to_json(config);
  if (fs::exists(ws.checkpoint()) && fs::exists(ws.subject_config()) && read_json(ws.subject_config()) == expected)
    return load_checkpoint(ws.checkpoint());
  std::fprintf(stderr, "training subject (%d steps)\n", config.training.steps);
  SubjectBundle bundle = train_subject_bundle(config, nullptr, [&](int step, double loss) {
    if (step % 500 == 0) std::fprintf(stderr, "  step %d loss %.5f\n", step, loss);
  });
  fs::create_directories(ws.root);
  save_checkpoint(ws.checkpoint(), bundle.vocab, bundle.schedule, bundle.model);
  write_json(ws.subject_config(), expected);
  return load_checkpoint(ws.checkpoint());
}

// ---- small instances ----

Vocabulary small_vocabulary(Eigen::Index d, std::size_t N, std::uint64_t seed) {
  Rng rng(seed);
  Matrix table(d, static_cast<Eigen::Index>(N));
  fill_normal(rng, table);
  table.col(0).setZero();
  std::vector<std::string> tokens{std::string(kNullToken), std::string(kPhotoToken)};
  std::vector<TokenRole> roles{TokenRole::null, TokenRole::filler};
  for (std::size_t i = 2; i < N; ++i) {
    tokens.push_back("tok" + std::to_string(i));
    roles.push_back(TokenRole::filler);
  }
  return Vocabulary(std::move(table), std::move(tokens), std::move(roles));
}

std::vector<Image> random_images(std::size_t count, Eigen::Index dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Image> out(count, Image(dim));
  for (auto& img : out) fill_normal(rng, img);
  return out;
}

/// eps(z_t, t, c) = A c + beta z_t.
class LinearStub final : public Denoiser {
 public:
  LinearStub(Matrix a, double beta) : a_(std::move(a)), beta_(beta) {}
  Eigen::Index image_dim() const override { return a_.rows(); }
  Eigen::Index cond_dim() const override { return a_.cols(); }
  Matrix predict(const Matrix& z_t, std::span<const int>, const Matrix& cond, const HiddenHook*) const override {
    return a_ * cond + beta_ * z_t;
  }
  Matrix cond_vjp(const Matrix&, std::span<const int>, const Matrix&, const Matrix& grad_out) const override {
    return a_.transpose() * grad_out;
  }
  std::string weights_hash() const override { return "linear-stub"; }

 private:
  Matrix a_;
  double beta_;
};

// ---- criteria ----

Outcome noising_identities(const SubjectBundle&) {
  const NoiseSchedule sched = make_linear_schedule();
  Rng rng(3);
  bool ok = sched.alpha_bar(0) == 1.0 && sched.alpha_bar(sched.steps()) == 0.0;
  int cases = 0;
  for (int trial = 0; trial < 16; ++trial) {
    Vector z(kImageDim), eps(kImageDim);
    fill_normal(rng, z);
    fill_normal(rng, eps);
    ok = ok && same_bits(noise_image(z, eps, 0, sched), z) && same_bits(noise_image(z, eps, sched.steps(), sched), eps);
    cases += 2;
  }
  return {ok, std::to_string(cases) + " endpoint cases bit-exact: " + (ok ? "yes" : "no")};
}

struct GradCheck {
  double worst = 0.0;
  int entries = 0;
};

/// Entrywise |a - f| / max(|a|, |f|), entries with both below `floor` skipped.
void compare_gradient(GradCheck& check, double analytic, double numeric, double floor = 1e-9) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  ++check.entries;
  if (scale < floor) return;
  check.worst = std::max(check.worst, std::abs(analytic - numeric) / scale);
}

Outcome gradient_correctness(const SubjectBundle&) {
  constexpr Eigen::Index d = 8, h = 8, D = 12;
  constexpr std::size_t N = 16;
  const Vocabulary vocab = small_vocabulary(d, N, 5);
  const NoiseSchedule sched = make_linear_schedule(ScheduleConfig{10, 1e-4, 0.02});
  DenoiserArch arch;
  arch.image_dim = D;
  arch.cond_dim = d;
  arch.hidden = 16;
  arch.time_dim = 4;
  arch.residual_layers = 1;
  arch.max_t = sched.steps();
  arch.alpha_bar = sched.alpha_bars();
  const MlpDenoiser model = MlpDenoiser::initialize(arch, 9, false);

  std::vector<TokenId> candidates;
  for (TokenId i = 1; i < static_cast<TokenId>(N); ++i) candidates.push_back(i);
  const auto images = random_images(4, D, 17);
  Rng rng(23);
  const NoiseDraw draw = draw_noise(rng, images.size(), D, sched.steps());

  GradCheck mlp_check, cond_check;
  const double step = 1e-6;
  for (double lambda : {1e-3, 0.5}) {
    CoefficientMlp mlp = CoefficientMlp::initialize(d, h, 31, 1.0, true);
    const auto eval = decomposition_objective(mlp, model, sched, vocab, candidates, 4, lambda, images, draw);
    auto total_at = [&](const CoefficientMlp& m) {
      return decomposition_objective(m, model, sched, vocab, candidates, 4, lambda, images, draw).total;
    };
    for (Eigen::Index i = 0; i < mlp.w1.size(); ++i) {
      CoefficientMlp plus = mlp, minus = mlp;
      plus.w1.data()[i] += step;
      minus.w1.data()[i] -= step;
      compare_gradient(mlp_check, eval.grad_w1.data()[i], (total_at(plus) - total_at(minus)) / (2 * step));
    }
    for (Eigen::Index i = 0; i < mlp.w2.size(); ++i) {
      CoefficientMlp plus = mlp, minus = mlp;
      plus.w2[i] += step;
      minus.w2[i] -= step;
      compare_gradient(mlp_check, eval.grad_w2[i], (total_at(plus) - total_at(minus)) / (2 * step));
    }
  }

  Vector pseudo(d);
  fill_normal(rng, pseudo);
  const auto rec = reconstruction_loss(model, sched, vocab, images, pseudo, draw, true);
  for (Eigen::Index i = 0; i < d; ++i) {
    Vector plus = pseudo, minus = pseudo;
    plus[i] += step;
    minus[i] -= step;
    const double numeric = (reconstruction_loss(model, sched, vocab, images, plus, draw, false).value -
                            reconstruction_loss(model, sched, vocab, images, minus, draw, false).value) /
                           (2 * step);
    compare_gradient(cond_check, rec.grad[i], numeric);
  }

  const double worst = std::max(mlp_check.worst, cond_check.worst);
  char buf[200];
  std::snprintf(buf, sizeof buf, "max rel err %.2e over %d MLP + %d conditioning entries (<= 1e-4)", worst,
                mlp_check.entries, cond_check.entries);
  return {worst <= 1e-4, buf};
}

Outcome linear_oracle(const SubjectBundle&) {
  constexpr Eigen::Index d = 8, D = 48;
  constexpr std::size_t N = 16;
  const Vocabulary vocab = small_vocabulary(d, N, 41);
  const NoiseSchedule sched = make_linear_schedule();
  Rng rng(43);
  Matrix a(D, d);
  fill_normal(rng, a);
  const double beta = 0.5;
  const LinearStub stub(a, beta);

  // Least-squares optimum at c = (E_photo + E alpha) / 2 with alpha > 0.
  std::vector<TokenId> candidates;
  for (TokenId i = 1; i < static_cast<TokenId>(N); ++i) candidates.push_back(i);
  Vector alpha(static_cast<Eigen::Index>(candidates.size()));
  std::uniform_real_distribution<double> unit(0.2, 0.6);
  for (auto& v : alpha) v = unit(rng);
  const Vector w_target = candidate_matrix(vocab, candidates) * alpha;
  const Vector c_target = 0.5 * (vocab.embedding(vocab.id(kPhotoToken)) + w_target);
  double mean_sqrt_ab = 0.0;
  for (int t = 1; t <= sched.steps(); ++t) mean_sqrt_ab += std::sqrt(sched.alpha_bar(t)) / sched.steps();
  const Vector z0 = -(a * c_target) / (beta * mean_sqrt_ab);

  auto concept_images = [&](std::size_t count, std::uint64_t seed) {
    auto out = random_images(count, D, seed);
    for (auto& img : out) img = z0 + 0.1 * img;
    return out;
  };
  ConceptCorpus corpus;
  corpus.concept_name = "stub";
  corpus.train = concept_images(200, 47);

  DecompositionConfig cfg;
  cfg.lambda_sparsity = 0.0;
  cfg.max_steps = 5000;
  cfg.val_every = 0;
  cfg.batch = 32;
  cfg.hidden = 64;
  cfg.n = 8;
  cfg.seed = 1024;
  const PooledCosineOracle oracle;
  const Decomposition dec = train_decomposition(stub, sched, vocab, corpus, cfg, oracle);

  // Quadratic in w on a fixed draw: normal equations from gradients.
  const auto eval_images = concept_images(2000, 53);
  Rng eval_rng(59);
  const NoiseDraw draw = draw_noise(eval_rng, eval_images.size(), D, sched.steps());
  auto loss = [&](const Vector& w, bool grad) { return reconstruction_loss(stub, sched, vocab, eval_images, w, draw, grad); };
  const Vector w0 = Vector::Zero(d);
  const Vector g0 = loss(w0, true).grad;
  Matrix H(d, d);
  for (Eigen::Index j = 0; j < d; ++j) H.col(j) = loss(Vector::Unit(d, j), true).grad - g0;
  const Vector w_ls = w0 - H.ldlt().solve(g0);
  const double optimum = loss(w_ls, false).value;
  const double trained = loss(dec.w_star_full, false).value;
  const double initial = [&] {
    const CoefficientMlp init = CoefficientMlp::initialize(d, cfg.hidden, cfg.seed, cfg.init_scale, cfg.nonnegative_init);
    return loss(candidate_matrix(vocab, candidates) * coefficients(init, vocab, candidates), false).value;
  }();
  const double gap = (trained - optimum) / optimum;
  char buf[220];
  std::snprintf(buf, sizeof buf, "L_rec %.6f vs optimum %.6f (initial %.6f): gap %.3f%% (<= 1%%) in %d steps", trained,
                optimum, initial, 100.0 * gap, cfg.max_steps);
  return {gap <= 0.01, buf};
}

std::vector<std::string> suite_names(const Vocabulary& vocab) {
  std::vector<std::string> names;
  for (const auto& spec : default_concept_suite(vocab)) names.push_back(vocab.token(spec.concept_token_id()));
  return names;
}

std::string top3(const Decomposition& dec, const Vocabulary& vocab) {
  std::string s;
  for (std::size_t i = 0; i < 3 && i < dec.ranked.size(); ++i) s += (i ? "," : "") + vocab.token(dec.ranked[i].token_id);
  return s;
}

Outcome ground_truth_recovery(const SubjectBundle& b) {
  const ConceptCorpusPlan plan;
  const PooledCosineOracle oracle;
  const auto suite = default_concept_suite(b.vocab);
  int hits = 0, total = 0;
  for (const auto& name : suite_names(b.vocab)) {
    const ConceptCorpus corpus = suite_corpus(b.vocab, name, plan);
    std::string line = name + ":";
    for (auto seed : kRecoverySeeds) {
      DecompositionConfig cfg;
      cfg.seed = seed;
      const auto dec = train_decomposition(b.model, b.schedule, b.vocab, corpus, cfg, oracle);
      const int atoms = atoms_in_top_k(dec, suite[suite_index(b.vocab, name)], 3);
      hits += atoms >= 2;
      ++total;
      line += " [" + top3(dec, b.vocab) + "]";
    }
    std::fprintf(stderr, "  %s\n", line.c_str());
  }
  const double rate = static_cast<double>(hits) / total;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d/%d concept-seed pairs with >= 2 atoms in top-3 (%.0f%%, need >= 80%%)", hits,
                total, 100.0 * rate);
  return {rate >= 0.8, buf};
}

Outcome sparsity_ablation(const SubjectBundle& b) {
  const ConceptCorpusPlan plan;
  const PooledCosineOracle oracle;
  const auto suite = default_concept_suite(b.vocab);
  int degraded = 0;
  std::string detail;
  for (const auto& name : suite_names(b.vocab)) {
    const ConceptCorpus corpus = suite_corpus(b.vocab, name, plan);
    const std::size_t idx = suite_index(b.vocab, name);
    const auto test = concept_images(suite[idx], idx, CorpusSplit::test, plan);
    DecompositionConfig with;
    DecompositionConfig without = with;
    without.lambda_sparsity = 0.0;
    const auto d1 = train_decomposition(b.model, b.schedule, b.vocab, corpus, with, oracle);
    const auto d0 = train_decomposition(b.model, b.schedule, b.vocab, corpus, without, oracle);
    const double s1 = validation_score(b.model, b.schedule, b.vocab, d1.w_star, test, with, oracle);
    const double s0 = validation_score(b.model, b.schedule, b.vocab, d0.w_star, test, with, oracle);
    degraded += s0 < s1;
    char buf[120];
    std::snprintf(buf, sizeof buf, "  %s: score lambda=1e-3 %.4f, lambda=0 %.4f\n", name.c_str(), s1, s0);
    std::fputs(buf, stderr);
  }
  return {degraded >= 3, std::to_string(degraded) + "/5 concepts degrade without the sparsity term (need >= 3)"};
}

Outcome generalization_ordering(const SubjectBundle& b) {
  const ConceptCorpusPlan plan;
  const PooledCosineOracle oracle;
  const auto suite = default_concept_suite(b.vocab);
  int ok_count = 0;
  for (const auto& name : suite_names(b.vocab)) {
    const ConceptCorpus corpus = suite_corpus(b.vocab, name, plan);
    const std::size_t idx = suite_index(b.vocab, name);
    const DecompositionConfig cfg;
    const auto dec = train_decomposition(b.model, b.schedule, b.vocab, corpus, cfg, oracle);
    TokenOptimizationConfig tcfg;
    tcfg.seed = cfg.seed;
    const auto w_o = optimize_token(b.model, b.schedule, b.vocab, corpus, tcfg);
    const auto test = concept_images(suite[idx], idx, CorpusSplit::test, plan);
    const auto curve = generalization_study(b.model, b.schedule, b.vocab, {{"w_star", dec.w_star}, {"w_opt", w_o.vector}},
                                            dec.candidate_ids, test, 1, 0);
    const double star = curve.mean_normalized[0], opt = curve.mean_normalized[1];
    const double se = curve.stderr_mean[0];
    const bool ok = opt <= star && star < 0.0 && -star >= 3.0 * se && curve.mean_normalized[2] == 0.0;
    ok_count += ok;
    char buf[200];
    std::snprintf(buf, sizeof buf, "  %s: w_opt %.5f <= w_star %.5f < 0 (stderr %.5f, %.1f se, %s) %s\n", name.c_str(),
                  opt, star, se, se > 0 ? -star / se : 0.0, curve.names[2].c_str(), ok ? "ok" : "violated");
    std::fputs(buf, stderr);
  }
  return {ok_count == 5, std::to_string(ok_count) + "/5 concepts satisfy w_opt <= w_star < 0 with a 3-se margin"};
}

Outcome robustness(const SubjectBundle& b) {
  const ConceptCorpusPlan plan;
  const PooledCosineOracle oracle;
  int ok_count = 0;
  std::string worst;
  double worst_value = 1e9;
  for (const auto& name : suite_names(b.vocab)) {
    std::vector<ConceptCorpus> corpora;
    for (std::size_t run = 0; run < kRecoverySeeds.size(); ++run) corpora.push_back(suite_corpus(b.vocab, name, plan, run));
    const auto result = robustness_study(b.model, b.schedule, b.vocab, corpora, kRecoverySeeds, DecompositionConfig{},
                                         oracle, {3});
    const double mean = result.report.per_k[0].mean_count;
    ok_count += mean >= 2.0;
    if (mean < worst_value) worst_value = mean, worst = name;
    std::string line = "  " + name + ": top-3 intersection " + format_double(mean);
    for (const auto& run : result.runs) line += " [" + top3(run, b.vocab) + "]";
    std::fprintf(stderr, "%s\n", line.c_str());
  }
  return {ok_count == 5, std::to_string(ok_count) + "/5 concepts with mean top-3 intersection >= 2.0 (lowest " +
                             worst + " " + format_double(worst_value) + ")"};
}

Outcome single_image_contracts(const SubjectBundle& b) {
  const ConceptCorpusPlan plan;
  const PooledCosineOracle oracle;
  const SingleImageConfig cfg;
  int runs = 0;
  std::vector<std::string> failures;
  for (const auto& name : {std::string("gleeb"), std::string("blick")}) {
    const auto dec = train_decomposition(b.model, b.schedule, b.vocab, suite_corpus(b.vocab, name, plan), {}, oracle);
    // A variant carrying a zero-coefficient token.
    Decomposition zeroed = dec;
    zeroed.ranked = edited_tokens(dec, {{dec.ranked[1].token_id, 0.0}});
    for (const Decomposition* d : {&dec, static_cast<const Decomposition*>(&zeroed)}) {
      for (std::uint64_t seed : {0ull, 7ull}) {
        ++runs;
        const auto r = single_image_decompose(b.model, b.schedule, b.vocab, *d, seed, oracle, cfg);
        const std::string tag = name + (d == &zeroed ? "/zeroed" : "") + " seed " + std::to_string(seed);
        int passes = 0;
        for (const auto& e : r.trace) passes = std::max(passes, e.pass + 1);
        if (passes > d->n) failures.push_back(tag + ": " + std::to_string(passes) + " passes");
        for (const auto& e : r.trace)
          if (e.removed != (e.similarity >= cfg.tau)) failures.push_back(tag + ": removal inconsistent with tau");
        for (const auto& rt : d->ranked)
          if (rt.coefficient == 0.0) {
            const bool removed_first_pass = std::any_of(r.trace.begin(), r.trace.end(), [&](const TraceEntry& e) {
              return e.token_id == rt.token_id && e.pass == 0 && e.removed;
            });
            if (!removed_first_pass) failures.push_back(tag + ": zero-coefficient token kept");
          }
        // Replay the trace.
        std::vector<RankedToken> current = d->ranked;
        const Image reference = render_token_set(b.model, b.schedule, b.vocab, current, seed, cfg.guidance_scale,
                                                 cfg.sampler_steps);
        bool replay_ok = same_bits(reference, r.reference);
        for (const auto& e : r.trace) {
          std::vector<RankedToken> without;
          for (const auto& rt : current)
            if (rt.token_id != e.token_id) without.push_back(rt);
          const double sim = oracle.similarity(
              reference, render_token_set(b.model, b.schedule, b.vocab, without, seed, cfg.guidance_scale,
                                          cfg.sampler_steps));
          replay_ok = replay_ok && std::memcmp(&sim, &e.similarity, sizeof sim) == 0;
          if (e.removed) current = std::move(without);
        }
        replay_ok = replay_ok && current == r.surviving;
        if (!replay_ok) failures.push_back(tag + ": trace replay differs");
      }
    }
  }
  std::string detail = std::to_string(runs) + " runs";
  if (failures.empty()) detail += ": pass bound, tau consistency, zero-coefficient removal and bit-exact replay hold";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

Outcome determinism(const SubjectBundle& b) {
  const ConceptCorpusPlan plan;
  const PooledCosineOracle oracle;
  std::vector<std::string> failures;

  const ConceptCorpus corpus = suite_corpus(b.vocab, "vorp", plan);
  const DecompositionConfig cfg;
  const auto d1 = train_decomposition(b.model, b.schedule, b.vocab, corpus, cfg, oracle);
  const auto d2 = train_decomposition(b.model, b.schedule, b.vocab, corpus, cfg, oracle);
  const std::string j1 = canonical_dump(decomposition_to_json(d1, b.vocab));
  if (j1 != canonical_dump(decomposition_to_json(d2, b.vocab))) failures.push_back("decomposition JSON differs");

  SubjectConfig small;
  small.arch.hidden = 64;
  small.training.steps = 60;
  small.images_per_combo = 2;
  const auto s1 = train_subject_bundle(small);
  const auto s2 = train_subject_bundle(small);
  if (encode_checkpoint(s1.vocab, s1.schedule, s1.model) != encode_checkpoint(s2.vocab, s2.schedule, s2.model))
    failures.push_back("checkpoint bytes differ");
  const auto cached = encode_checkpoint(b.vocab, b.schedule, b.model);
  const auto reloaded = decode_checkpoint(cached);
  if (encode_checkpoint(reloaded.vocab, reloaded.schedule, reloaded.model) != cached)
    failures.push_back("checkpoint re-save differs");

  const fs::path tmp = fs::temp_directory_path() / ("conceptor_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  save_decomposition(tmp / "d.json", d1, b.vocab);
  const Decomposition loaded = load_decomposition(tmp / "d.json", b.vocab.version_hash(), b.model.weights_hash());
  fs::remove_all(tmp);
  for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
    ManipulationRequest req;
    req.seed = seed;
    const auto a = png_bytes(manipulate(b.model, b.schedule, b.vocab, d1, req));
    const auto again = png_bytes(manipulate(b.model, b.schedule, b.vocab, d2, req));
    const auto after_load = png_bytes(manipulate(b.model, b.schedule, b.vocab, loaded, req));
    if (a != again) failures.push_back("PNG differs across runs, seed " + std::to_string(seed));
    if (a != after_load) failures.push_back("PNG differs after load, seed " + std::to_string(seed));
  }
  std::string detail = "decomposition JSON (" + std::to_string(j1.size()) +
                       " bytes), checkpoint bytes, PNGs for 3 seeds";
  if (failures.empty()) detail += " identical across runs and after reload";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

Outcome baseline_sanity(const SubjectBundle& b) {
  const auto spec = default_concept_suite(b.vocab)[0];
  const Vector cond = encode_prompt(b.vocab, atom_prompt(b.vocab, spec.atom_tokens()));
  const Vector uncond = encode_prompt(b.vocab, null_prompt(b.vocab));
  const std::vector<int> timesteps{10, 30, 50, 70, 90};
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 32; ++s) seeds.push_back(s);
  const SamplerConfig sampler;
  const Matrix acts = record_activations(b.model, b.schedule, cond, uncond, seeds, timesteps, sampler.guidance_scale,
                                         sampler.steps);

  const ActivationBasis pca = fit_basis(BasisMethod::pca, acts, b.model.hidden_dim());
  double worst_pixel = 0.0;
  for (std::uint64_t s : {100ull, 101ull, 102ull}) {
    SamplerConfig cfg = sampler;
    cfg.seed = s;
    const Image plain = sample_conditioned(b.model, b.schedule, cond, uncond, cfg);
    const Image projected = sample_with_basis(b.model, b.schedule, cond, uncond, pca, cfg);
    worst_pixel = std::max(worst_pixel, (plain - projected).cwiseAbs().maxCoeff());
  }

  const ActivationBasis nmf = fit_basis(BasisMethod::nmf, acts, 8);
  const double nmf_min = nmf.components.minCoeff();

  const Matrix few = acts.topRows(40);
  const ActivationBasis km = fit_basis(BasisMethod::kmeans, few, few.rows());
  const double qerr = quantization_error(few, km.components);

  char buf[240];
  std::snprintf(buf, sizeof buf,
                "full-rank PCA (%ld comps) max pixel diff %.2e (<= 1e-5); NMF min component %.3g (>= 0); "
                "k-means n_c=%ld quantization error %.3g (== 0)",
                static_cast<long>(pca.n_components()), worst_pixel, nmf_min, static_cast<long>(few.rows()), qerr);
  return {worst_pixel <= 1e-5 && nmf_min >= 0.0 && qerr == 0.0, buf};
}

struct Criterion {
  int number;
  std::string name;
  double budget_s;
  std::function<Outcome(const SubjectBundle&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string lab = "acceptance_lab";
  int only = 0;
  bool prepare = false;
  app.add_option("--lab", lab, "Directory caching the trained subject");
  app.add_option("--criterion", only, "Run only this criterion");
  app.add_flag("--prepare", prepare, "Train or verify the cached subject and exit");
  CLI11_PARSE(app, argc, argv);

  const Workspace ws(lab);
  try {
    const SubjectBundle bundle = prepare_subject(ws);
    if (prepare) {
      std::printf("subject %s vocab %s\n", bundle.model.weights_hash().c_str(), bundle.vocab.version_hash().c_str());
      return 0;
    }
    const std::vector<Criterion> criteria{
        {1, "noising identities", 1, noising_identities},
        {2, "gradient correctness", 60, gradient_correctness},
        {3, "linear-denoiser oracle", 120, linear_oracle},
        {4, "ground-truth recovery", 1800, ground_truth_recovery},
        {5, "sparsity-loss ablation", 1800, sparsity_ablation},
        {6, "generalization ordering", 600, generalization_ordering},
        {7, "robustness", 2700, robustness},
        {8, "single-image contracts", 1e9, single_image_contracts},
        {9, "determinism and persistence", 1e9, determinism},
        {10, "baseline sanity", 1e9, baseline_sanity},
    };
    bool all = true;
    for (const auto& c : criteria) {
      if (only && c.number != only) continue;
      const auto t0 = Clock::now();
      Outcome out;
      try {
        out = c.run(bundle);
      } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
      }
      const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
      const bool in_time = secs < c.budget_s;
      const bool pass = out.pass && in_time;
      all = all && pass;
      std::printf("%s criterion %d (%s): %s [%.1f s%s]\n", pass ? "PASS" : "FAIL", c.number, c.name.c_str(),
                  out.detail.c_str(), secs,
                  c.budget_s < 1e8 ? (in_time ? ", within budget" : ", OVER BUDGET") : "");
      std::fflush(stdout);
    }
    return all ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
