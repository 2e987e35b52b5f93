#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "uap/rng.hpp"
#include "uap/tensor.hpp"

namespace uap {

enum class DirectionKind { PixelBasis, DctBasis };

DirectionKind direction_kind_from_string(const std::string& s);  // "pixel" | "dct"
std::string direction_kind_to_string(DirectionKind k);

/// Enumerable orthonormal search directions over an image shape: the standard
/// pixel basis, or the lowest k x k block of the 2D DCT-II basis per channel
/// with k = floor(freq_fraction * min(height, width)), k >= 1.
///
/// Directions are materialized on demand; the full basis is never stored.
class DirectionSet {
 public:
  static DirectionSet pixel(Shape3 shape);
  static DirectionSet dct(Shape3 shape, double freq_fraction);

  DirectionKind kind() const { return kind_; }
  Shape3 shape() const { return shape_; }
  int size() const { return size_; }
  double freq_fraction() const { return freq_fraction_; }
  int dct_side() const { return k_; }  // k; 0 for the pixel basis

  /// Dense unit-L2 tensor for the given index.
  /// Pixel basis: one-hot at the decoded (row, col, channel) coordinate.
  /// DCT basis: index decodes to (channel, u, v); the direction is zero
  /// outside that channel and holds the separable cosine plane inside it.
  std::vector<double> materialize(int index) const;

 private:
  DirectionSet(DirectionKind kind, Shape3 shape, double fd, int k, int size);

  DirectionKind kind_;
  Shape3 shape_;
  double freq_fraction_ = 1.0;
  int k_ = 0;
  int size_ = 0;
};

/// Uniform sampling over a direction set, by default with replacement.
/// Without replacement it walks a seeded permutation and reshuffles on
/// exhaustion. One sampler per attack loop; not shared across threads.
class DirectionSampler {
 public:
  DirectionSampler(const DirectionSet& set, std::uint64_t seed,
                   bool without_replacement = false);

  std::pair<int, std::vector<double>> next();

 private:
  const DirectionSet* set_;
  Rng rng_;
  bool without_replacement_;
  std::vector<int> order_;
  std::size_t pos_ = 0;
};

}  // namespace uap
