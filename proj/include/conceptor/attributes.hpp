#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace conceptor {

enum class AttributeKind { shape = 0, color = 1, texture = 2 };

enum class Shape { circle, square, triangle, cross };
enum class Color { red, green, blue, yellow };
enum class Texture { solid, stripes, dots, checker };

inline constexpr std::array<std::string_view, 4> kShapeNames{"circle", "square", "triangle", "cross"};
inline constexpr std::array<std::string_view, 4> kColorNames{"red", "green", "blue", "yellow"};
inline constexpr std::array<std::string_view, 4> kTextureNames{"solid", "stripes", "dots", "checker"};
inline constexpr std::array<std::string_view, 3> kKindNames{"shape", "color", "texture"};

/// Atom token names in vocabulary order: shapes, colors, textures.
inline constexpr std::array<std::string_view, 12> kAtomNames{
    "circle", "square", "triangle", "cross",  //
    "red",    "green",  "blue",     "yellow",  //
    "solid",  "stripes", "dots",    "checker"};

/// Composite concept names of the default suite. None of them is shown to the
/// subject model during training.
inline constexpr std::array<std::string_view, 5> kConceptNames{"gleeb", "snarf", "vorp", "blick",
                                                               "zund"};

inline constexpr std::string_view kNullToken = "<null>";
inline constexpr std::string_view kPhotoToken = "photo";

inline std::string_view atom_name(AttributeKind kind, int value) {
  switch (kind) {
    case AttributeKind::shape: return kShapeNames.at(value);
    case AttributeKind::color: return kColorNames.at(value);
    case AttributeKind::texture: return kTextureNames.at(value);
  }
  return {};
}

/// Resolves an atom name to (kind, value).
inline std::optional<std::pair<AttributeKind, int>> parse_atom(std::string_view name) {
  for (int v = 0; v < 4; ++v) {
    if (kShapeNames[v] == name) return std::pair{AttributeKind::shape, v};
    if (kColorNames[v] == name) return std::pair{AttributeKind::color, v};
    if (kTextureNames[v] == name) return std::pair{AttributeKind::texture, v};
  }
  return std::nullopt;
}

}  // namespace conceptor
