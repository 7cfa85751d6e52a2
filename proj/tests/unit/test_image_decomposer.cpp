#include <doctest.h>

#include "conceptor/image_decomposer.hpp"
#include "conceptor/png.hpp"
#include "fixtures.hpp"

using namespace conceptor;
using testing::same_bits;

namespace {

SingleImageConfig quick_single() {
  SingleImageConfig c;
  c.sampler_steps = 10;
  return c;
}

ManipulationRequest quick_request(std::uint64_t seed) {
  ManipulationRequest r;
  r.seed = seed;
  r.sampler_steps = 10;
  return r;
}

}  // namespace

TEST_CASE("identity edits reproduce the unedited image") {
  const auto& b = testing::tiny_subject();
  const auto& dec = testing::tiny_decomposition();
  auto req = quick_request(3);
  const Image base = manipulate(b.model, b.schedule, b.vocab, dec, req);
  for (const auto& r : dec.ranked) req.edits[r.token_id] = 1.0;
  CHECK(same_bits(base, manipulate(b.model, b.schedule, b.vocab, dec, req)));
}

TEST_CASE("scale-0 edit equals the first tentative removal") {
  const auto& b = testing::tiny_subject();
  const auto& dec = testing::tiny_decomposition();
  PooledCosineOracle oracle;
  const auto result = single_image_decompose(b.model, b.schedule, b.vocab, dec, 7, oracle, quick_single());
  REQUIRE_FALSE(result.trace.empty());
  REQUIRE(result.trace_images.size() == result.trace.size());
  auto req = quick_request(7);
  req.edits[result.trace[0].token_id] = 0.0;
  const Image edited = manipulate(b.model, b.schedule, b.vocab, dec, req);
  CHECK(encode_png(to_raster(edited)) == encode_png(to_raster(result.trace_images[0])));
}

TEST_CASE("single-image contracts") {
  const auto& b = testing::tiny_subject();
  Decomposition dec = testing::tiny_decomposition();
  dec.ranked = edited_tokens(dec, {{dec.ranked[2].token_id, 0.0}});
  PooledCosineOracle oracle;
  for (auto order : {RemovalOrder::ascending_coefficient, RemovalOrder::descending_coefficient}) {
    auto cfg = quick_single();
    cfg.order = order;
    const auto r = single_image_decompose(b.model, b.schedule, b.vocab, dec, 1, oracle, cfg);
    int passes = 0;
    for (const auto& e : r.trace) {
      passes = std::max(passes, e.pass + 1);
      CHECK(e.removed == (e.similarity >= cfg.tau));
    }
    CHECK(passes <= dec.n);
    const auto zero_id = dec.ranked[2].token_id;
    CHECK(std::any_of(r.trace.begin(), r.trace.end(),
                      [&](const TraceEntry& e) { return e.token_id == zero_id && e.pass == 0 && e.removed; }));
    CHECK(r.final_image_matches == (r.final_similarity >= cfg.tau));
  }
}

TEST_CASE("tau must lie in (0, 1)") {
  const auto& b = testing::tiny_subject();
  PooledCosineOracle oracle;
  auto cfg = quick_single();
  cfg.tau = 1.0;
  CHECK_THROWS_AS(single_image_decompose(b.model, b.schedule, b.vocab, testing::tiny_decomposition(), 1, oracle, cfg),
                  ValidationError);
}

TEST_CASE("brute force finds subsets no larger than greedy") {
  const auto& b = testing::tiny_subject();
  Decomposition dec = testing::tiny_decomposition();
  dec.ranked.resize(4);
  PooledCosineOracle oracle;
  auto cfg = quick_single();
  cfg.tau = 0.9;
  const auto best = brute_force_minimal_subsets(b.model, b.schedule, b.vocab, dec, 2, oracle, cfg);
  const auto greedy = single_image_decompose(b.model, b.schedule, b.vocab, dec, 2, oracle, cfg);
  REQUIRE_FALSE(best.empty());
  for (const auto& s : best) CHECK(s.similarity >= cfg.tau);
  if (greedy.final_image_matches) CHECK(best.front().tokens.size() <= greedy.surviving.size());
}

TEST_CASE("edits are validated") {
  const auto& dec = testing::tiny_decomposition();
  TokenId absent = 1;
  while (dec.contains(absent)) ++absent;
  CHECK_THROWS_AS(edited_tokens(dec, {{absent, 0.5}}), ValidationError);
  CHECK_THROWS_AS(edited_tokens(dec, {{dec.ranked[0].token_id, -1.0}}), ValidationError);
}

TEST_CASE("debiasing attenuates, re-ranks and records provenance") {
  const auto& b = testing::tiny_subject();
  const auto& dec = testing::tiny_decomposition();
  const TokenId top = dec.ranked[0].token_id;
  const auto out = debias(dec, b.vocab, {top}, 0.0);
  CHECK(out.ranked.back().token_id == top);
  CHECK(out.coefficient(top) == 0.0);
  CHECK(out.provenance.size() == 1);
  CHECK(out.provenance[0].find(b.vocab.token(top)) != std::string::npos);
  CHECK(same_bits(out.w_star, pseudo_token_from_ranked(b.vocab, out.ranked)));
  CHECK_THROWS_AS(debias(dec, b.vocab, {top}, 1.0), ValidationError);
}
