#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uap/attack.hpp"
#include "uap/oracle.hpp"
#include "uap/tensor.hpp"

namespace uap {

struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::vector<std::int64_t>> counts;  // true class x predicted
  std::vector<std::vector<double>> normalized;    // rows sum to 1, or all zero
};

/// Fraction of images whose predicted label changes under the perturbation.
/// Costs 2|X| queries: one clean pass and one perturbed pass.
double fooling_rate(ScoreOracle& oracle, std::span<const ImageTensor> X,
                    const Perturbation& delta, bool clip = true);

/// Fraction of perturbed images classified as target_class. With a zero
/// perturbation this is the baseline rate. Costs |X| queries.
double targeted_success_rate(ScoreOracle& oracle,
                             std::span<const ImageTensor> X,
                             const Perturbation& delta, int target_class,
                             bool clip = true);

/// Perturbation drawn uniformly from the Lp sphere of radius xi:
/// L2 via a scaled Gaussian draw, Linf via a uniform cube draw rescaled so
/// the largest magnitude is exactly xi, L1 via exponential magnitudes scaled
/// to sum xi, with independent random signs.
Perturbation random_uap(Shape3 shape, Norm p, double xi, std::uint64_t seed);

/// Counts of (true class, predicted class) over perturbed images, plus
/// row-normalized fractions. Costs |X| queries.
ConfusionMatrix confusion_matrix(ScoreOracle& oracle,
                                 std::span<const ImageTensor> X,
                                 std::span<const int> true_labels,
                                 const Perturbation& delta, bool clip = true);

struct SweepRow {
  int n = 0;
  double rf_input = 0.0;
  double rf_validation = 0.0;
};

/// For each N: draw N input images and a disjoint validation set of fixed
/// size from the pool, run the attack on the input set, and report the
/// fooling rate on both. Splits and attack seeds derive from (seed, N), so
/// rows do not depend on the order of sizes.
std::vector<SweepRow> size_sweep(ScoreOracle& oracle,
                                 const std::vector<ImageTensor>& pool,
                                 std::span<const int> sizes,
                                 int validation_size, std::uint64_t seed,
                                 const AttackConfig& attack_config);

}  // namespace uap
