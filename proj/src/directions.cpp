#include "uap/directions.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace uap {

namespace {

void check_shape(Shape3 s) {
  if (s.height < 1 || s.width < 1 || s.channels < 1) {
    throw std::invalid_argument("invalid shape: " + to_string(s));
  }
}

// Orthonormal DCT-II basis function over d samples.
double dct_basis(int freq, int pos, int d) {
  if (freq == 0) return 1.0 / std::sqrt(static_cast<double>(d));
  return std::sqrt(2.0 / static_cast<double>(d)) *
         std::cos(std::numbers::pi * (2.0 * pos + 1.0) * freq / (2.0 * d));
}

}  // namespace

DirectionKind direction_kind_from_string(const std::string& s) {
  if (s == "pixel") return DirectionKind::PixelBasis;
  if (s == "dct") return DirectionKind::DctBasis;
  throw std::invalid_argument("unknown direction kind: " + s);
}

std::string direction_kind_to_string(DirectionKind k) {
  return k == DirectionKind::PixelBasis ? "pixel" : "dct";
}

DirectionSet::DirectionSet(DirectionKind kind, Shape3 shape, double fd, int k,
                           int size)
    : kind_(kind), shape_(shape), freq_fraction_(fd), k_(k), size_(size) {}

DirectionSet DirectionSet::pixel(Shape3 shape) {
  check_shape(shape);
  return DirectionSet(DirectionKind::PixelBasis, shape, 1.0, 0, shape.count());
}

DirectionSet DirectionSet::dct(Shape3 shape, double freq_fraction) {
  check_shape(shape);
  if (!(freq_fraction > 0.0) || freq_fraction > 1.0) {
    throw std::invalid_argument("invalid frequency fraction");
  }
  const int side = std::min(shape.height, shape.width);
  // Guard against 28/299 * 299 style round-off landing just below an integer.
  int k = static_cast<int>(std::floor(freq_fraction * side + 1e-9));
  k = std::clamp(k, 1, side);
  return DirectionSet(DirectionKind::DctBasis, shape, freq_fraction, k,
                      k * k * shape.channels);
}

std::vector<double> DirectionSet::materialize(int index) const {
  if (index < 0 || index >= size_) {
    throw std::out_of_range("direction index out of range");
  }
  std::vector<double> q(static_cast<std::size_t>(shape_.count()), 0.0);
  if (kind_ == DirectionKind::PixelBasis) {
    q[static_cast<std::size_t>(index)] = 1.0;
    return q;
  }
  const int per_channel = k_ * k_;
  const int channel = index / per_channel;
  const int rem = index % per_channel;
  const int u = rem / k_;  // row frequency
  const int v = rem % k_;  // column frequency
  for (int r = 0; r < shape_.height; ++r) {
    const double row_term = dct_basis(u, r, shape_.height);
    for (int col = 0; col < shape_.width; ++col) {
      const std::size_t at =
          (static_cast<std::size_t>(r) * shape_.width + col) * shape_.channels +
          channel;
      q[at] = row_term * dct_basis(v, col, shape_.width);
    }
  }
  return q;
}

DirectionSampler::DirectionSampler(const DirectionSet& set, std::uint64_t seed,
                                   bool without_replacement)
    : set_(&set), rng_(seed), without_replacement_(without_replacement) {
  if (set.size() < 1) throw std::invalid_argument("empty direction set");
  if (without_replacement_) {
    order_.resize(static_cast<std::size_t>(set.size()));
    std::iota(order_.begin(), order_.end(), 0);
    rng_.shuffle(order_);
  }
}

std::pair<int, std::vector<double>> DirectionSampler::next() {
  int index;
  if (without_replacement_) {
    if (pos_ == order_.size()) {
      rng_.shuffle(order_);
      pos_ = 0;
    }
    index = order_[pos_++];
  } else {
    index = static_cast<int>(
        rng_.uniform_index(static_cast<std::uint64_t>(set_->size())));
  }
  return {index, set_->materialize(index)};
}

}  // namespace uap
