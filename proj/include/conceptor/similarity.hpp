#pragma once

#include <vector>

#include "conceptor/synthetic.hpp"

namespace conceptor {

/// Image similarity in [0, 1]; symmetric, sim(I, I) = 1.
class SimilarityOracle {
 public:
  virtual ~SimilarityOracle() = default;
  virtual double similarity(const Image& a, const Image& b) const = 0;
  virtual std::string name() const = 0;
};

/// Average-pools to 8x8x3, subtracts the mean, and maps the cosine of the two
/// feature vectors to [0, 1] via (1 + cos) / 2. Two constant images compare
/// as identical; a constant against a non-constant image scores 0.5.
class PooledCosineOracle final : public SimilarityOracle {
 public:
  double similarity(const Image& a, const Image& b) const override;
  std::string name() const override { return "pooled_cosine_8x8"; }

  static Vector features(const Image& image);
};

/// Mean of sim(a_i, b_j) over all pairs.
double mean_pairwise_similarity(const SimilarityOracle& oracle, const std::vector<Image>& a,
                                const std::vector<Image>& b);

}  // namespace conceptor
