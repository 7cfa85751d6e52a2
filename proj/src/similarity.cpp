#include "conceptor/similarity.hpp"

#include <algorithm>
#include <cmath>

namespace conceptor {

namespace {
constexpr int kPooled = 8;
constexpr int kWindow = kImageSize / kPooled;
}  // namespace

Vector PooledCosineOracle::features(const Image& image) {
  require(image.size() == kImageDim, "similarity: image has wrong size");
  Vector f = Vector::Zero(kPooled * kPooled * kImageChannels);
  for (int y = 0; y < kImageSize; ++y)
    for (int x = 0; x < kImageSize; ++x)
      for (int c = 0; c < kImageChannels; ++c)
        f[((y / kWindow) * kPooled + x / kWindow) * kImageChannels + c] += image[pixel_index(y, x, c)];
  f /= static_cast<double>(kWindow * kWindow);
  f.array() -= f.mean();
  return f;
}

double PooledCosineOracle::similarity(const Image& a, const Image& b) const {
  if (a == b) return 1.0;
  const Vector fa = features(a), fb = features(b);
  const double na = fa.norm(), nb = fb.norm();
  constexpr double kTiny = 1e-12;
  if (na < kTiny && nb < kTiny) return 1.0;
  if (na < kTiny || nb < kTiny) return 0.5;
  const double cosine = std::clamp(fa.dot(fb) / (na * nb), -1.0, 1.0);
  return std::clamp(0.5 * (1.0 + cosine), 0.0, 1.0);
}

double mean_pairwise_similarity(const SimilarityOracle& oracle, const std::vector<Image>& a,
                                const std::vector<Image>& b) {
  require(!a.empty() && !b.empty(), "mean_pairwise_similarity: empty image set");
  double total = 0.0;
  for (const auto& x : a)
    for (const auto& y : b) total += oracle.similarity(x, y);
  return total / static_cast<double>(a.size() * b.size());
}

}  // namespace conceptor
