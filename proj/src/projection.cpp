#include "uap/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace uap {

namespace {

// Sort-based exact Euclidean projection onto the L1 ball (simplex method).
// Ties fall out of the cumulative-sum threshold; no randomness.
void project_l1(std::vector<double>& v, double xi) {
  std::vector<double> mag(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) mag[i] = std::fabs(v[i]);
  std::sort(mag.begin(), mag.end(), std::greater<>());

  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < mag.size(); ++j) {
    cumulative += mag[j];
    const double candidate = (cumulative - xi) / static_cast<double>(j + 1);
    if (mag[j] > candidate) {
      theta = candidate;
    } else {
      break;
    }
  }
  for (double& x : v) {
    const double shrunk = std::max(std::fabs(x) - theta, 0.0);
    x = std::copysign(shrunk, x);
    if (shrunk == 0.0) x = 0.0;  // avoid -0
  }
}

}  // namespace

std::vector<double> project(std::span<const double> v, Norm p, double xi) {
  if (xi < 0.0) throw std::invalid_argument("negative budget");
  const double n = lp_norm(v, p);  // also rejects non-finite input
  std::vector<double> out(v.begin(), v.end());
  if (n <= xi) return out;  // identity inside the ball

  if (xi == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }

  switch (p) {
    case Norm::L2: {
      const double scale = xi / n;
      for (double& x : out) x *= scale;
      break;
    }
    case Norm::LInf:
      for (double& x : out) x = std::clamp(x, -xi, xi);
      break;
    case Norm::L1:
      project_l1(out, xi);
      break;
  }
  return out;
}

}  // namespace uap
