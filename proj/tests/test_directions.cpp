#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "uap/directions.hpp"
#include "uap/tensor.hpp"

using namespace uap;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("pixel basis enumerates one-hot directions") {
  const Shape3 shape{3, 4, 2};
  const DirectionSet set = DirectionSet::pixel(shape);
  CHECK(set.size() == 24);

  std::vector<double> sum(24, 0.0);
  for (int i = 0; i < set.size(); ++i) {
    const auto q = set.materialize(i);
    int nonzero = 0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (q[j] != 0.0) {
        ++nonzero;
        CHECK(q[j] == 1.0);
        CHECK(static_cast<int>(j) == i);
      }
      sum[j] += q[j];
    }
    CHECK(nonzero == 1);
  }
  // The pixel directions partition the coordinates.
  for (double v : sum) CHECK(v == 1.0);
}

TEST_CASE("dct size follows the frequency fraction") {
  CHECK(DirectionSet::dct({299, 299, 1}, 28.0 / 299.0).size() == 28 * 28);
  CHECK(DirectionSet::dct({299, 299, 3}, 28.0 / 299.0).size() == 28 * 28 * 3);
  CHECK(DirectionSet::dct({299, 299, 1}, 28.0 / 299.0).dct_side() == 28);
  // Fraction too small for one frequency still keeps k >= 1.
  CHECK(DirectionSet::dct({8, 8, 1}, 0.01).size() == 1);
  // Full fraction covers the whole side.
  CHECK(DirectionSet::dct({8, 8, 1}, 1.0).size() == 64);
  // Non-square shapes use the shorter side.
  CHECK(DirectionSet::dct({8, 4, 1}, 1.0).dct_side() == 4);
}

TEST_CASE("dct rejects bad fractions and shapes") {
  CHECK_THROWS_WITH_AS(DirectionSet::dct({8, 8, 1}, 0.0),
                       "invalid frequency fraction", std::invalid_argument);
  CHECK_THROWS_WITH_AS(DirectionSet::dct({8, 8, 1}, -0.5),
                       "invalid frequency fraction", std::invalid_argument);
  CHECK_THROWS_WITH_AS(DirectionSet::dct({8, 8, 1}, 1.5),
                       "invalid frequency fraction", std::invalid_argument);
  CHECK_THROWS_AS(DirectionSet::pixel({0, 4, 1}), std::invalid_argument);
}

TEST_CASE("materialize rejects out-of-range indices") {
  const DirectionSet set = DirectionSet::dct({8, 8, 1}, 0.5);
  CHECK_THROWS_WITH_AS(set.materialize(-1), "direction index out of range",
                       std::out_of_range);
  CHECK_THROWS_WITH_AS(set.materialize(set.size()),
                       "direction index out of range", std::out_of_range);
}

TEST_CASE("dct directions are pairwise orthonormal") {
  for (int d : {4, 8}) {
    const DirectionSet set = DirectionSet::dct({d, d, 1}, 1.0);
    std::vector<std::vector<double>> qs;
    for (int i = 0; i < set.size(); ++i) qs.push_back(set.materialize(i));
    for (int i = 0; i < set.size(); ++i) {
      for (int j = i; j < set.size(); ++j) {
        const double expected = i == j ? 1.0 : 0.0;
        CHECK(dot(qs[i], qs[j]) == doctest::Approx(expected).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("multi-channel dct directions live on their own channel") {
  const DirectionSet set = DirectionSet::dct({4, 4, 3}, 1.0);
  REQUIRE(set.size() == 48);
  // Direction 17 = channel 1, frequency (0,1).
  const auto q = set.materialize(16 + 1);
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (j % 3 != 1) CHECK(q[j] == 0.0);
  }
  CHECK(std::sqrt(dot(q, q)) == doctest::Approx(1.0).epsilon(1e-12));

  // Same frequency on different channels is orthogonal, unit norm each.
  const auto q0 = set.materialize(1);
  CHECK(dot(q, q0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dct directions on non-square shapes are unit-norm") {
  const DirectionSet set = DirectionSet::dct({6, 4, 1}, 1.0);
  for (int i = 0; i < set.size(); ++i) {
    const auto q = set.materialize(i);
    CHECK(std::sqrt(dot(q, q)) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("with-replacement sampling is uniform") {
  const DirectionSet set = DirectionSet::pixel({4, 4, 1});
  DirectionSampler sampler(set, 2024);
  std::vector<int> hits(16, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++hits[sampler.next().first];
  for (int h : hits) {
    const double frequency = static_cast<double>(h) / draws;
    CHECK(frequency > 0.055);  // fair share is 0.0625
    CHECK(frequency < 0.070);
  }
}

TEST_CASE("sampling is deterministic per seed") {
  const DirectionSet set = DirectionSet::dct({8, 8, 1}, 0.5);
  DirectionSampler a(set, 99), b(set, 99), c(set, 100);
  std::vector<int> seq_a, seq_b, seq_c;
  for (int i = 0; i < 50; ++i) {
    seq_a.push_back(a.next().first);
    seq_b.push_back(b.next().first);
    seq_c.push_back(c.next().first);
  }
  CHECK(seq_a == seq_b);
  CHECK(seq_a != seq_c);
}

TEST_CASE("without-replacement covers every direction before repeating") {
  const DirectionSet set = DirectionSet::pixel({4, 4, 1});
  DirectionSampler sampler(set, 7, true);
  std::set<int> first_pass;
  for (int i = 0; i < set.size(); ++i) first_pass.insert(sampler.next().first);
  CHECK(static_cast<int>(first_pass.size()) == set.size());

  // The next cycle is again a full permutation.
  std::set<int> second_pass;
  for (int i = 0; i < set.size(); ++i) second_pass.insert(sampler.next().first);
  CHECK(static_cast<int>(second_pass.size()) == set.size());
}

TEST_CASE("direction kind strings") {
  CHECK(direction_kind_from_string("pixel") == DirectionKind::PixelBasis);
  CHECK(direction_kind_from_string("dct") == DirectionKind::DctBasis);
  CHECK(direction_kind_to_string(DirectionKind::DctBasis) == "dct");
  CHECK_THROWS_AS(direction_kind_from_string("fourier"),
                  std::invalid_argument);
}
