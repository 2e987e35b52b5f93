#pragma once

#include <span>
#include <vector>

#include "uap/tensor.hpp"

namespace uap {

/// L2-closest point of the Lp ball of radius xi. Returns the input unchanged
/// (bitwise) when it is already inside the ball.
std::vector<double> project(std::span<const double> v, Norm p, double xi);

}  // namespace uap
