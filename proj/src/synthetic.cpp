#include "conceptor/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace conceptor {

std::array<double, 3> color_rgb(Color color) {
  switch (color) {
    case Color::red: return {1.0, -1.0, -1.0};
    case Color::green: return {-1.0, 1.0, -1.0};
    case Color::blue: return {-1.0, -1.0, 1.0};
    case Color::yellow: return {1.0, 1.0, -1.0};
  }
  return {0.0, 0.0, 0.0};
}

CompositeConceptSpec::CompositeConceptSpec(TokenId concept_token_id, std::array<AttributeAtom, 3> atoms,
                                           RenderJitter jitter)
    : concept_(concept_token_id), atoms_(atoms), jitter_(jitter) {
  for (int k = 0; k < 3; ++k) {
    require(atoms_[k].kind == static_cast<AttributeKind>(k),
            "concept spec: atoms must be ordered shape, color, texture", "atoms");
    require(atoms_[k].value >= 0 && atoms_[k].value < 4, "concept spec: atom value out of range", "atoms");
    require(atoms_[k].token_id != concept_, "concept spec: concept token equals an atom token", "atoms");
  }
  require(atoms_[0].token_id != atoms_[1].token_id && atoms_[1].token_id != atoms_[2].token_id &&
              atoms_[0].token_id != atoms_[2].token_id,
          "concept spec: atom tokens must be distinct", "atoms");
  require(jitter_.position_px >= 0 && jitter_.scale >= 0 && jitter_.scale < 1 && jitter_.rotation_rad >= 0 &&
              jitter_.pixel_noise >= 0,
          "concept spec: invalid jitter", "jitter");
}

CompositeConceptSpec CompositeConceptSpec::from_names(const Vocabulary& vocab, std::string_view concept_token,
                                                      Shape shape, Color color, Texture texture,
                                                      RenderJitter jitter) {
  auto atom = [&](AttributeKind kind, int value) {
    return AttributeAtom{kind, value, vocab.id(atom_name(kind, value))};
  };
  return CompositeConceptSpec(vocab.id(concept_token),
                              {atom(AttributeKind::shape, static_cast<int>(shape)),
                               atom(AttributeKind::color, static_cast<int>(color)),
                               atom(AttributeKind::texture, static_cast<int>(texture))},
                              jitter);
}

CompositeConceptSpec CompositeConceptSpec::with_jitter(RenderJitter jitter) const {
  return CompositeConceptSpec(concept_, atoms_, jitter);
}

std::vector<TokenId> CompositeConceptSpec::atom_tokens() const {
  return {atoms_[0].token_id, atoms_[1].token_id, atoms_[2].token_id};
}

namespace {

constexpr double kBaseRadius = 11.0;

bool inside_shape(Shape shape, double u, double v) {
  const double r = kBaseRadius;
  switch (shape) {
    case Shape::circle: return u * u + v * v <= r * r;
    case Shape::square: return std::abs(u) <= 0.85 * r && std::abs(v) <= 0.85 * r;
    case Shape::triangle:
      // apex up at v = -r, base at v = 0.8 r with half-width r
      return v >= -r && v <= 0.8 * r && std::abs(u) <= (v + r) / 1.8;
    case Shape::cross:
      return (std::abs(u) <= 0.3 * r && std::abs(v) <= r) || (std::abs(v) <= 0.3 * r && std::abs(u) <= r);
  }
  return false;
}

bool texture_on(Texture texture, double u, double v) {
  switch (texture) {
    case Texture::solid: return true;
    case Texture::stripes: return static_cast<long>(std::floor(v / 2.0)) % 2 == 0;
    case Texture::dots: {
      const double gu = u - 5.0 * std::round(u / 5.0);
      const double gv = v - 5.0 * std::round(v / 5.0);
      return gu * gu + gv * gv <= 1.25 * 1.25;
    }
    case Texture::checker:
      return (static_cast<long>(std::floor(u / 4.0)) + static_cast<long>(std::floor(v / 4.0))) % 2 == 0;
  }
  return true;
}

}  // namespace

ImageSample render_image(const CompositeConceptSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const RenderJitter& j = spec.jitter();
  const double dx = unit(rng) * j.position_px;
  const double dy = unit(rng) * j.position_px;
  const double scale = 1.0 + unit(rng) * j.scale;
  const double angle = unit(rng) * j.rotation_rad;
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double cx = kImageSize / 2.0 + dx, cy = kImageSize / 2.0 + dy;

  const auto fg = color_rgb(spec.color());
  std::array<double, 3> off{};
  for (int c = 0; c < 3; ++c) off[c] = 0.5 * (fg[c] + kBackgroundRgb[c]);

  Image img(kImageDim);
  for (int y = 0; y < kImageSize; ++y) {
    for (int x = 0; x < kImageSize; ++x) {
      const double px = x + 0.5 - cx, py = y + 0.5 - cy;
      const double u = (ca * px + sa * py) / scale;
      const double v = (-sa * px + ca * py) / scale;
      const std::array<double, 3>* rgb = &kBackgroundRgb;
      if (inside_shape(spec.shape(), u, v)) rgb = texture_on(spec.texture(), u, v) ? &fg : &off;
      for (int c = 0; c < 3; ++c) img[pixel_index(y, x, c)] = (*rgb)[c];
    }
  }
  if (j.pixel_noise > 0) {
    std::normal_distribution<double> normal(0.0, j.pixel_noise);
    for (Eigen::Index i = 0; i < img.size(); ++i) img[i] += normal(rng);
  }
  img = img.cwiseMax(-1.0).cwiseMin(1.0);
  return ImageSample{std::move(img), spec.concept_token_id(), spec.atoms(), seed};
}

std::uint64_t corpus_seed(std::uint64_t master, std::size_t concept_index, std::size_t i) {
  return master ^ ((static_cast<std::uint64_t>(concept_index) << 32) + static_cast<std::uint64_t>(i));
}

std::vector<ImageSample> build_corpus(const std::vector<CompositeConceptSpec>& specs, std::size_t per_concept,
                                      std::uint64_t master_seed) {
  require(!specs.empty(), "build_corpus: empty spec list", "specs");
  require(per_concept >= 1, "build_corpus: per_concept must be >= 1", "per_concept");
  std::vector<ImageSample> out;
  out.reserve(specs.size() * per_concept);
  for (std::size_t c = 0; c < specs.size(); ++c)
    for (std::size_t i = 0; i < per_concept; ++i) out.push_back(render_image(specs[c], corpus_seed(master_seed, c, i)));
  return out;
}

std::vector<CompositeConceptSpec> default_concept_suite(const Vocabulary& vocab, RenderJitter jitter) {
  return {
      CompositeConceptSpec::from_names(vocab, "gleeb", Shape::circle, Color::red, Texture::solid, jitter),
      CompositeConceptSpec::from_names(vocab, "snarf", Shape::square, Color::green, Texture::stripes, jitter),
      CompositeConceptSpec::from_names(vocab, "vorp", Shape::triangle, Color::blue, Texture::dots, jitter),
      CompositeConceptSpec::from_names(vocab, "blick", Shape::cross, Color::yellow, Texture::checker, jitter),
      CompositeConceptSpec::from_names(vocab, "zund", Shape::triangle, Color::red, Texture::checker, jitter),
  };
}

std::vector<CompositeConceptSpec> atom_grid(const Vocabulary& vocab, RenderJitter jitter) {
  std::vector<CompositeConceptSpec> out;
  for (int s = 0; s < 4; ++s)
    for (int c = 0; c < 4; ++c)
      for (int t = 0; t < 4; ++t) {
        std::array<AttributeAtom, 3> atoms{
            AttributeAtom{AttributeKind::shape, s, vocab.id(kShapeNames[s])},
            AttributeAtom{AttributeKind::color, c, vocab.id(kColorNames[c])},
            AttributeAtom{AttributeKind::texture, t, vocab.id(kTextureNames[t])}};
        out.emplace_back(vocab.null_id(), atoms, jitter);
      }
  return out;
}

std::vector<Image> pixels_of(const std::vector<ImageSample>& samples) {
  std::vector<Image> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.pixels);
  return out;
}

std::uint8_t quantize_pixel(double v) {
  const double q = std::round((std::clamp(v, -1.0, 1.0) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(q);
}

}  // namespace conceptor
