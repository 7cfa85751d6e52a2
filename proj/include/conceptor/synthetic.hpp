#pragma once

#include <array>
#include <string>
#include <vector>

#include "conceptor/attributes.hpp"
#include "conceptor/common.hpp"
#include "conceptor/vocabulary.hpp"

namespace conceptor {

inline constexpr int kImageSize = 32;
inline constexpr int kImageChannels = 3;
inline constexpr int kImageDim = kImageSize * kImageSize * kImageChannels;

/// Images are flattened HWC vectors of length kImageDim with values in [-1, 1].
using Image = Vector;

inline Eigen::Index pixel_index(int y, int x, int c) {
  return (static_cast<Eigen::Index>(y) * kImageSize + x) * kImageChannels + c;
}

/// RGB in [-1, 1].
std::array<double, 3> color_rgb(Color color);
inline constexpr std::array<double, 3> kBackgroundRgb{-1.0, -1.0, -1.0};

struct AttributeAtom {
  AttributeKind kind;
  int value;
  TokenId token_id;

  std::string_view name() const { return atom_name(kind, value); }
  friend bool operator==(const AttributeAtom&, const AttributeAtom&) = default;
};

struct RenderJitter {
  double position_px = 4.0;
  double scale = 0.15;
  double rotation_rad = 0.0;
  double pixel_noise = 0.02;

  static RenderJitter none() { return {0.0, 0.0, 0.0, 0.0}; }
};

/// A composition of one atom per kind named by `concept_token_id`. Unnamed
/// compositions (the subject-training grid) use the null token as their name.
class CompositeConceptSpec {
 public:
  /// Throws ValidationError unless the atoms cover shape, color and texture
  /// and the concept token differs from every atom token.
  CompositeConceptSpec(TokenId concept_token_id, std::array<AttributeAtom, 3> atoms, RenderJitter jitter = {});

  /// Looks the concept and atom tokens up by name.
  static CompositeConceptSpec from_names(const Vocabulary& vocab, std::string_view concept_token,
                                         Shape shape, Color color, Texture texture, RenderJitter jitter = {});

  TokenId concept_token_id() const { return concept_; }
  /// Indexed by AttributeKind.
  const std::array<AttributeAtom, 3>& atoms() const { return atoms_; }
  const RenderJitter& jitter() const { return jitter_; }
  CompositeConceptSpec with_jitter(RenderJitter jitter) const;

  Shape shape() const { return static_cast<Shape>(atoms_[0].value); }
  Color color() const { return static_cast<Color>(atoms_[1].value); }
  Texture texture() const { return static_cast<Texture>(atoms_[2].value); }
  std::vector<TokenId> atom_tokens() const;

 private:
  TokenId concept_;
  std::array<AttributeAtom, 3> atoms_;
  RenderJitter jitter_;
};

struct ImageSample {
  Image pixels;
  TokenId concept_token_id;
  std::array<AttributeAtom, 3> atoms;
  std::uint64_t seed;
};

/// Deterministic in (spec, seed).
ImageSample render_image(const CompositeConceptSpec& spec, std::uint64_t seed);

/// seed_i = master ^ (concept_index * 2^32 + i).
std::uint64_t corpus_seed(std::uint64_t master, std::size_t concept_index, std::size_t i);

/// `per_concept` images per spec, concept-major order.
std::vector<ImageSample> build_corpus(const std::vector<CompositeConceptSpec>& specs, std::size_t per_concept,
                                      std::uint64_t master_seed);

/// The five named concepts: gleeb (circle red solid), snarf (square green
/// stripes), vorp (triangle blue dots), blick (cross yellow checker),
/// zund (triangle red checker).
std::vector<CompositeConceptSpec> default_concept_suite(const Vocabulary& vocab, RenderJitter jitter = {});

/// All 64 shape x color x texture combinations, unnamed.
std::vector<CompositeConceptSpec> atom_grid(const Vocabulary& vocab, RenderJitter jitter = {});

std::vector<Image> pixels_of(const std::vector<ImageSample>& samples);

/// Stored 8-bit value for a pixel: round((v + 1) * 127.5).
std::uint8_t quantize_pixel(double v);

}  // namespace conceptor
