#include <doctest.h>

#include "conceptor/conceptor.hpp"
#include "fixtures.hpp"

using namespace conceptor;
using testing::same_bits;

TEST_CASE("coefficient MLP is relu(w2 relu(W1 w))") {
  CoefficientMlp m;
  m.w1 = Matrix{{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
  m.w2 = Eigen::RowVectorXd{{1.0, -2.0, 0.5}};
  CHECK(m(Vector{{1.0, 2.0}}) == 0.0);
  CHECK(m(Vector{{2.0, -1.0}}) == doctest::Approx(2.0 + 0.5));
  const auto nn = CoefficientMlp::initialize(8, 16, 3, 0.1, true);
  CHECK(nn.w2.minCoeff() >= 0.0);
  CHECK(nn.w1.rows() == 16);
}

TEST_CASE("top_n ranks by coefficient then id") {
  const std::vector<TokenId> ids{4, 2, 9, 7};
  const Vector alpha{{0.5, 0.7, 0.5, 0.0}};
  const auto top = top_n(ids, alpha, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0] == RankedToken{2, 0.7});
  CHECK(top[1] == RankedToken{4, 0.5});
  CHECK(top[2] == RankedToken{9, 0.5});
}

TEST_CASE("combining skips zero weights bit-exactly") {
  const Vocabulary v = make_default_vocabulary({});
  const Vector with_zero = combine_tokens(v, {{5, 0.3}, {9, 0.0}, {3, 0.2}});
  const Vector without = combine_tokens(v, {{3, 0.2}, {5, 0.3}});
  CHECK(same_bits(with_zero, without));
  CHECK((without - (0.2 * v.embedding(3) + 0.3 * v.embedding(5))).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("sparsity loss values and gradient") {
  const Vector a{{1.0, 0.0, 0.0}};
  CHECK(sparsity_loss(a, 2.0 * a).value == doctest::Approx(0.0));
  CHECK(sparsity_loss(a, Vector{{0.0, 1.0, 0.0}}).value == doctest::Approx(1.0));
  CHECK(sparsity_loss(a, -a).value == doctest::Approx(2.0));
  const auto degenerate = sparsity_loss(Vector::Zero(3), a);
  CHECK(degenerate.degenerate);
  CHECK(degenerate.value == 0.0);

  const Vector s{{0.3, -1.2, 0.8}}, f{{1.1, 0.4, -0.5}};
  const auto l = sparsity_loss(s, f);
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i) {
    Vector sp = s, sm = s, fp = f, fm = f;
    sp[i] += h;
    sm[i] -= h;
    fp[i] += h;
    fm[i] -= h;
    CHECK(l.grad_star[i] == doctest::Approx((sparsity_loss(sp, f).value - sparsity_loss(sm, f).value) / (2 * h)).epsilon(1e-6));
    CHECK(l.grad_full[i] == doctest::Approx((sparsity_loss(s, fp).value - sparsity_loss(s, fm).value) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("pseudo tokens are not renormalized") {
  const Vocabulary v = make_default_vocabulary({});
  const auto mlp = CoefficientMlp::initialize(static_cast<Eigen::Index>(v.dim()), 64, 1, 1.0, true);
  std::vector<TokenId> cands;
  for (TokenId i = 1; i < 64; ++i) cands.push_back(i);
  const auto pt = build_pseudo_tokens(mlp, v, cands, 8);
  REQUIRE(pt.ranked.size() == 8);
  const Vector alpha = coefficients(mlp, v, cands);
  CHECK((pt.w_star_full - candidate_matrix(v, cands) * alpha).cwiseAbs().maxCoeff() < 1e-10);
  Vector manual = Vector::Zero(static_cast<Eigen::Index>(v.dim()));
  for (const auto& r : pt.ranked) manual += r.coefficient * v.embedding(r.token_id);
  CHECK((pt.w_star - manual).cwiseAbs().maxCoeff() < 1e-12);
  for (std::size_t i = 1; i < pt.ranked.size(); ++i) CHECK(pt.ranked[i - 1].coefficient >= pt.ranked[i].coefficient);
}

TEST_CASE("config validation names the field") {
  const auto& b = testing::tiny_subject();
  auto field_of = [&](DecompositionConfig c) {
    try {
      validate_decomposition_config(c, b.vocab);
    } catch (const ValidationError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  DecompositionConfig c;
  CHECK(field_of(c) == "<none>");
  c.n = 64;
  CHECK(field_of(c) == "n");
  c = {};
  c.lr = 0.0;
  CHECK(field_of(c) == "lr");
  c = {};
  c.batch = 0;
  CHECK(field_of(c) == "batch");
  c = {};
  c.top_m = 70;
  CHECK(field_of(c) == "top_m");
  c = {};
  c.top_m = 5;
  CHECK(field_of(c) == "n");
}

TEST_CASE("batch stream is deterministic") {
  BatchStream a(10, 4, 6, 100, 3), b(10, 4, 6, 100, 3);
  for (int i = 0; i < 5; ++i) {
    const auto x = a.next(), y = b.next();
    CHECK(x.indices == y.indices);
    CHECK(x.draw.t == y.draw.t);
    CHECK(x.draw.eps == y.draw.eps);
    for (int t : x.draw.t) {
      CHECK(t >= 1);
      CHECK(t <= 100);
    }
  }
}

TEST_CASE("decomposition training is deterministic and self-consistent") {
  const auto& b = testing::tiny_subject();
  const auto& dec = testing::tiny_decomposition();
  PooledCosineOracle oracle;
  const auto again = train_decomposition(b.model, b.schedule, b.vocab, suite_corpus(b.vocab, "gleeb", testing::quick_plan()),
                                         testing::quick_config(), oracle);
  CHECK(dec.ranked == again.ranked);
  CHECK(same_bits(dec.w_star, again.w_star));
  CHECK(dec.ranked.size() == 8);
  CHECK(dec.vocab_hash == b.vocab.version_hash());
  CHECK(dec.subject_hash == b.model.weights_hash());
  CHECK(dec.log.steps.size() == 20);
  CHECK(dec.log.validations.size() == 2);
  Decomposition copy = dec;
  refresh_pseudo_tokens(copy, b.vocab);
  CHECK(copy.ranked == dec.ranked);
  CHECK(same_bits(copy.w_star, dec.w_star));
}

TEST_CASE("vocabulary filter keeps the lowest-loss tokens") {
  const auto& b = testing::tiny_subject();
  const auto corpus = suite_corpus(b.vocab, "vorp", testing::quick_plan());
  const auto scores = token_denoising_scores(b.vocab, corpus.train, b.model, b.schedule, 4, 8);
  const auto kept = filter_vocabulary(b.vocab, corpus.train, b.model, b.schedule, 10, 4, 8);
  REQUIRE(kept.size() == 10);
  CHECK(std::isinf(scores[0]));
  double worst_kept = 0.0;
  for (TokenId id : kept) worst_kept = std::max(worst_kept, scores[static_cast<std::size_t>(id)]);
  int below = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) below += scores[i] < worst_kept;
  CHECK(below <= 9);
}
