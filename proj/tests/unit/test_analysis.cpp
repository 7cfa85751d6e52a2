#include <doctest.h>

#include "conceptor/analysis.hpp"
#include "fixtures.hpp"

using namespace conceptor;

namespace {

std::vector<RankedToken> ranked(std::initializer_list<TokenId> ids) {
  std::vector<RankedToken> out;
  double c = 1.0;
  for (TokenId id : ids) out.push_back({id, c -= 0.1});
  return out;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  fill_normal(rng, m);
  return m;
}

/// Knows the clean image, so it predicts the noise exactly.
class PerfectDenoiser final : public Denoiser {
 public:
  PerfectDenoiser(Image clean, const NoiseSchedule& s, Eigen::Index cond_dim) : clean_(std::move(clean)), s_(s), d_(cond_dim) {}
  Eigen::Index image_dim() const override { return clean_.size(); }
  Eigen::Index cond_dim() const override { return d_; }
  Matrix predict(const Matrix& z, std::span<const int> t, const Matrix&, const HiddenHook*) const override {
    Matrix out(z.rows(), z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const double ab = s_.alpha_bar(t[static_cast<std::size_t>(j)]);
      out.col(j) = (z.col(j) - std::sqrt(ab) * clean_) / std::sqrt(1.0 - ab);
    }
    return out;
  }
  Matrix cond_vjp(const Matrix&, std::span<const int>, const Matrix& c, const Matrix&) const override {
    return Matrix::Zero(c.rows(), c.cols());
  }
  std::string weights_hash() const override { return "perfect"; }

 private:
  Image clean_;
  NoiseSchedule s_;
  Eigen::Index d_;
};

}  // namespace

TEST_CASE("top-k intersection") {
  const auto a = ranked({1, 2, 3, 4}), b = ranked({2, 3, 9, 1}), c = ranked({3, 9, 8, 7});
  CHECK(topk_intersection(a, a, 3) == 3);
  CHECK(topk_intersection(a, b, 3) == 2);
  CHECK(topk_intersection(b, a, 3) == 2);
  CHECK(topk_intersection(a, b, 4) == 3);
  const auto report = intersection_report("x", {ranked({1, 2, 3}), ranked({2, 3, 4}), ranked({3, 4, 5})}, {3});
  CHECK(report.per_k[0].mean_count == doctest::Approx(1.5));
  CHECK(report.per_k[0].percentage == doctest::Approx(0.5));
  const auto self = intersection_report("x", {a, a, a}, {1, 2, 3});
  for (const auto& k : self.per_k) CHECK(k.mean_count == k.k);
  CHECK_THROWS_AS(intersection_report("x", {a, a}, {5}), ValidationError);
}

TEST_CASE("PCA is orthonormal and exact at full rank") {
  const Matrix x = random_matrix(40, 12, 1);
  const auto full = fit_pca(x, 12);
  CHECK((full.components.transpose() * full.components - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((full.reconstruct(x.transpose()) - x.transpose()).cwiseAbs().maxCoeff() < 1e-6);
  const auto partial = fit_pca(x, 4);
  CHECK(partial.n_components() == 4);
  CHECK(partial.warnings.empty());
}

TEST_CASE("PCA on a rank-deficient matrix warns") {
  const Matrix x = random_matrix(30, 3, 2) * random_matrix(3, 10, 3);
  const auto basis = fit_pca(x, 6);
  CHECK(basis.n_components() == 3);
  CHECK_FALSE(basis.warnings.empty());
}

TEST_CASE("randomized PCA spans the same subspace on low-rank data") {
  const Matrix x = random_matrix(50, 4, 4) * random_matrix(4, 20, 5);
  BasisFitConfig cfg;
  cfg.randomized_svd = true;
  const auto basis = fit_pca(x, 4, cfg);
  CHECK((basis.reconstruct(x.transpose()) - x.transpose()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("k-means with one centroid per sample has zero error") {
  const Matrix x = random_matrix(15, 6, 6);
  const auto basis = fit_kmeans(x, 15);
  CHECK(quantization_error(x, basis.components) == 0.0);
  CHECK(basis.initializations == 10);
  const auto one = fit_kmeans(x, 1);
  CHECK((one.components.col(0) - x.colwise().mean().transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("NMF components are nonnegative") {
  const Matrix x = random_matrix(25, 8, 7);
  const auto basis = fit_nmf(x, 3);
  CHECK(basis.components.minCoeff() >= 0.0);
  CHECK(basis.initialization == "nndsvd");
  CHECK(basis.reconstruct(x.transpose()).minCoeff() >= 0.0);
}

TEST_CASE("method names round-trip") {
  for (auto m : {BasisMethod::pca, BasisMethod::kmeans, BasisMethod::nmf}) CHECK(parse_basis_method(basis_method_name(m)) == m);
  CHECK_THROWS_AS(parse_basis_method("svd"), ValidationError);
}

TEST_CASE("activation baselines on the subject") {
  const auto& b = testing::tiny_subject();
  const Vector cond = encode_prompt(b.vocab, atom_prompt(b.vocab, {b.vocab.id("square")}));
  const Vector uncond = encode_prompt(b.vocab, null_prompt(b.vocab));
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3};
  const SamplerConfig sampler{3.0, 10, 9};
  CHECK_THROWS_AS(record_activations(b.model, b.schedule, cond, uncond, seeds, {10}, 3.0, 10), ValidationError);
  const Matrix acts = record_activations(b.model, b.schedule, cond, uncond, seeds, {12, 55, 99}, 3.0, 10);
  CHECK(acts.cols() == b.model.hidden_dim());
  CHECK(acts.rows() == 4 * 3 * 2);
  const auto before = b.model.weights_hash();
  const auto km = fit_activation_basis(b.model, b.schedule, cond, uncond, BasisMethod::kmeans, 1, {12, 55, 99}, seeds, sampler);
  const Image a = sample_with_basis(b.model, b.schedule, cond, uncond, km, sampler);
  const Image again = sample_with_basis(b.model, b.schedule, cond, uncond, km, sampler);
  CHECK(testing::same_bits(a, again));
  CHECK(b.model.weights_hash() == before);
}

TEST_CASE("generalization study normalizes against the random token") {
  const auto& b = testing::tiny_subject();
  const auto corpus = suite_corpus(b.vocab, "blick", testing::quick_plan());
  std::vector<TokenId> cands;
  for (TokenId i = 1; i < static_cast<TokenId>(b.vocab.size()); ++i) cands.push_back(i);
  const auto curve = generalization_study(b.model, b.schedule, b.vocab,
                                          {{"a", b.vocab.embedding(3)}, {"b", b.vocab.embedding(4)}}, cands,
                                          corpus.validation, 1, 5);
  REQUIRE(curve.names.size() == 3);
  CHECK(curve.names[2].rfind("random:", 0) == 0);
  for (double v : curve.normalized[2]) CHECK(v == 0.0);
  CHECK(curve.raw[0].size() == 100);
  const auto again = generalization_study(b.model, b.schedule, b.vocab,
                                          {{"a", b.vocab.embedding(3)}, {"b", b.vocab.embedding(4)}}, cands,
                                          corpus.validation, 1, 5);
  CHECK(again.raw == curve.raw);
  CHECK_THROWS_AS(generalization_study(b.model, b.schedule, b.vocab, {}, cands, {}, 1, 5), ValidationError);

  const NoiseSchedule s = make_linear_schedule({20, 1e-4, 0.02});
  const Image clean = corpus.validation[0];
  const PerfectDenoiser perfect(clean, s, static_cast<Eigen::Index>(b.vocab.dim()));
  const auto zero = generalization_study(perfect, s, b.vocab, {{"a", b.vocab.embedding(3)}}, cands, {clean}, 2, 1);
  for (std::size_t c = 0; c < 2; ++c)
    for (int t = 0; t < 19; ++t) {
      CHECK(zero.raw[c][static_cast<std::size_t>(t)] < 1e-20);
      CHECK(zero.normalized[c][static_cast<std::size_t>(t)] == 0.0);
    }
}
