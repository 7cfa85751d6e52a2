#include <doctest.h>

#include "fixtures.hpp"

using namespace conceptor;
using testing::same_bits;

TEST_CASE("rendering is deterministic and in range") {
  const Vocabulary vocab = make_default_vocabulary({});
  for (const auto& spec : default_concept_suite(vocab)) {
    const auto a = render_image(spec, 42);
    const auto b = render_image(spec, 42);
    CHECK(same_bits(a.pixels, b.pixels));
    CHECK(a.pixels.size() == kImageDim);
    CHECK(a.pixels.maxCoeff() <= 1.0);
    CHECK(a.pixels.minCoeff() >= -1.0);
    CHECK_FALSE(same_bits(a.pixels, render_image(spec, 43).pixels));
  }
}

TEST_CASE("jitter-free renders differ across textures and colors") {
  const Vocabulary vocab = make_default_vocabulary({});
  const auto none = RenderJitter::none();
  const auto a = render_image(CompositeConceptSpec::from_names(vocab, "gleeb", Shape::circle, Color::red, Texture::solid, none), 1);
  const auto b = render_image(CompositeConceptSpec::from_names(vocab, "gleeb", Shape::circle, Color::red, Texture::dots, none), 1);
  const auto c = render_image(CompositeConceptSpec::from_names(vocab, "gleeb", Shape::circle, Color::blue, Texture::solid, none), 1);
  CHECK((a.pixels - b.pixels).cwiseAbs().maxCoeff() > 0.1);
  CHECK((a.pixels - c.pixels).cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("corpus seeds follow the xor layout") {
  CHECK(corpus_seed(7, 0, 5) == (7ull ^ 5ull));
  CHECK(corpus_seed(7, 2, 5) == (7ull ^ ((2ull << 32) + 5ull)));
  const Vocabulary vocab = make_default_vocabulary({});
  const auto corpus = build_corpus(default_concept_suite(vocab), 3, 9);
  REQUIRE(corpus.size() == 15);
  CHECK(corpus[4].seed == corpus_seed(9, 1, 1));
  CHECK(corpus[4].concept_token_id == vocab.id("snarf"));
}

TEST_CASE("suite and grid") {
  const Vocabulary vocab = make_default_vocabulary({});
  const auto suite = default_concept_suite(vocab);
  REQUIRE(suite.size() == 5);
  CHECK(vocab.token(suite[4].concept_token_id()) == "zund");
  CHECK(suite[4].shape() == Shape::triangle);
  CHECK(suite[4].color() == Color::red);
  CHECK(suite[4].texture() == Texture::checker);
  const auto grid = atom_grid(vocab);
  CHECK(grid.size() == 64);
  for (const auto& g : grid) CHECK(g.concept_token_id() == vocab.null_id());
}

TEST_CASE("concept spec validation") {
  const Vocabulary vocab = make_default_vocabulary({});
  const TokenId red = vocab.id("red");
  const std::array<AttributeAtom, 3> missing_shape{AttributeAtom{AttributeKind::color, 0, red},
                                                   AttributeAtom{AttributeKind::color, 0, red},
                                                   AttributeAtom{AttributeKind::texture, 0, vocab.id("solid")}};
  CHECK_THROWS_AS(CompositeConceptSpec(vocab.id("gleeb"), missing_shape), ValidationError);
  const std::array<AttributeAtom, 3> ok{AttributeAtom{AttributeKind::shape, 0, vocab.id("circle")},
                                        AttributeAtom{AttributeKind::color, 0, red},
                                        AttributeAtom{AttributeKind::texture, 0, vocab.id("solid")}};
  CHECK_THROWS_AS(CompositeConceptSpec(red, ok), ValidationError);
  CHECK_NOTHROW(CompositeConceptSpec(vocab.id("gleeb"), ok));
}

TEST_CASE("pixel quantization") {
  CHECK(quantize_pixel(-1.0) == 0);
  CHECK(quantize_pixel(1.0) == 255);
  CHECK(quantize_pixel(0.0) == 128);
}
