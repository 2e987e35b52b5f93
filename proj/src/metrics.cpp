#include "uap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "uap/rng.hpp"

namespace uap {

namespace {

std::vector<int> predicted_labels(ScoreOracle& oracle,
                                  std::span<const ImageTensor> X,
                                  const Perturbation& delta, bool clip) {
  std::vector<int> labels;
  labels.reserve(X.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t i = 0; i < X.size();) {
    const std::size_t n = std::min(kChunk, X.size() - i);
    std::vector<ImageTensor> perturbed;
    perturbed.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      perturbed.push_back(apply_perturbation(X[i + j], delta, clip));
    }
    for (const auto& row : oracle.scores(perturbed)) {
      labels.push_back(argmax_row(row));
    }
    i += n;
  }
  return labels;
}

}  // namespace

double fooling_rate(ScoreOracle& oracle, std::span<const ImageTensor> X,
                    const Perturbation& delta, bool clip) {
  if (X.empty()) throw std::invalid_argument("empty dataset");
  const Perturbation zero =
      Perturbation::zeros(delta.shape, delta.norm_type, 0.0);
  const std::vector<int> clean = predicted_labels(oracle, X, zero, clip);
  const std::vector<int> adversarial = predicted_labels(oracle, X, delta, clip);
  std::size_t fooled = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (clean[i] != adversarial[i]) ++fooled;
  }
  return static_cast<double>(fooled) / static_cast<double>(X.size());
}

double targeted_success_rate(ScoreOracle& oracle,
                             std::span<const ImageTensor> X,
                             const Perturbation& delta, int target_class,
                             bool clip) {
  if (X.empty()) throw std::invalid_argument("empty dataset");
  if (target_class < 0 || target_class >= oracle.num_classes()) {
    throw std::invalid_argument("unknown class");
  }
  const std::vector<int> adversarial = predicted_labels(oracle, X, delta, clip);
  const std::size_t hits = static_cast<std::size_t>(
      std::count(adversarial.begin(), adversarial.end(), target_class));
  return static_cast<double>(hits) / static_cast<double>(X.size());
}

Perturbation random_uap(Shape3 shape, Norm p, double xi, std::uint64_t seed) {
  if (!(xi > 0.0)) throw std::invalid_argument("invalid radius");
  const std::size_t n = static_cast<std::size_t>(shape.count());
  Rng rng(seed);
  std::vector<double> v(n);
  switch (p) {
    case Norm::L2: {
      double norm = 0.0;
      while (norm == 0.0) {
        for (auto& x : v) x = rng.gaussian();
        norm = lp_norm(v, Norm::L2);
      }
      for (auto& x : v) x *= xi / norm;
      break;
    }
    case Norm::LInf: {
      double max_mag = 0.0;
      std::vector<double> signs(n);
      while (max_mag == 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          v[i] = rng.uniform01();
          signs[i] = rng.coin() ? 1.0 : -1.0;
          max_mag = std::max(max_mag, v[i]);
        }
      }
      for (std::size_t i = 0; i < n; ++i) v[i] *= signs[i] * xi / max_mag;
      break;
    }
    case Norm::L1: {
      double sum = 0.0;
      std::vector<double> signs(n);
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = rng.exponential();
        signs[i] = rng.coin() ? 1.0 : -1.0;
        sum += v[i];
      }
      for (std::size_t i = 0; i < n; ++i) v[i] *= signs[i] * xi / sum;
      break;
    }
  }
  return Perturbation{shape, std::move(v), p, xi};
}

ConfusionMatrix confusion_matrix(ScoreOracle& oracle,
                                 std::span<const ImageTensor> X,
                                 std::span<const int> true_labels,
                                 const Perturbation& delta, bool clip) {
  if (X.empty()) throw std::invalid_argument("empty dataset");
  if (true_labels.size() != X.size()) {
    throw std::invalid_argument("label count mismatch");
  }
  const int k = oracle.num_classes();
  for (int t : true_labels) {
    if (t < 0 || t >= k) throw std::invalid_argument("unknown class");
  }
  ConfusionMatrix m;
  m.num_classes = k;
  m.counts.assign(k, std::vector<std::int64_t>(k, 0));
  const std::vector<int> predicted = predicted_labels(oracle, X, delta, clip);
  for (std::size_t i = 0; i < X.size(); ++i) {
    ++m.counts[static_cast<std::size_t>(true_labels[i])]
              [static_cast<std::size_t>(predicted[i])];
  }
  m.normalized.assign(k, std::vector<double>(k, 0.0));
  for (int t = 0; t < k; ++t) {
    std::int64_t row_total = 0;
    for (int c = 0; c < k; ++c) row_total += m.counts[t][c];
    if (row_total == 0) continue;  // class absent: row stays all zero
    for (int c = 0; c < k; ++c) {
      m.normalized[t][c] =
          static_cast<double>(m.counts[t][c]) / static_cast<double>(row_total);
    }
  }
  return m;
}

std::vector<SweepRow> size_sweep(ScoreOracle& oracle,
                                 const std::vector<ImageTensor>& pool,
                                 std::span<const int> sizes,
                                 int validation_size, std::uint64_t seed,
                                 const AttackConfig& attack_config) {
  if (sizes.empty()) throw std::invalid_argument("no sizes");
  if (validation_size < 1) throw std::invalid_argument("invalid validation size");
  int max_n = 0;
  for (int n : sizes) {
    if (n < 1) throw std::invalid_argument("invalid size");
    max_n = std::max(max_n, n);
  }
  if (static_cast<std::size_t>(max_n + validation_size) > pool.size()) {
    throw std::invalid_argument("insufficient images");
  }

  std::vector<SweepRow> rows;
  rows.reserve(sizes.size());
  for (int n : sizes) {
    const std::uint64_t salt = static_cast<std::uint64_t>(n);
    Rng split_rng(Rng::derive(seed, 2 * salt));
    std::vector<int> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    split_rng.shuffle(order);

    std::vector<int> input_idx(order.begin(), order.begin() + n);
    std::vector<int> val_idx(order.begin() + n,
                             order.begin() + n + validation_size);
    std::sort(input_idx.begin(), input_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    std::vector<ImageTensor> input, validation;
    input.reserve(input_idx.size());
    validation.reserve(val_idx.size());
    for (int i : input_idx) input.push_back(pool[static_cast<std::size_t>(i)]);
    for (int i : val_idx) validation.push_back(pool[static_cast<std::size_t>(i)]);

    AttackConfig cfg = attack_config;
    cfg.seed = Rng::derive(seed, 2 * salt + 1);
    const AttackReport report = run_attack(oracle, input, cfg);

    SweepRow row;
    row.n = n;
    row.rf_input = fooling_rate(oracle, input, report.uap, cfg.clip);
    row.rf_validation = fooling_rate(oracle, validation, report.uap, cfg.clip);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace uap
