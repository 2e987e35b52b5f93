#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

#include "test_util.hpp"
#include "uap/attack.hpp"
#include "uap/oracle.hpp"
#include "uap/projection.hpp"
#include "uap/rng.hpp"
#include "uap/tensor.hpp"

using namespace uap;

namespace {

std::vector<ImageTensor> random_images(Shape3 shape, int n,
                                       std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ImageTensor> out;
  for (int i = 0; i < n; ++i) {
    ImageTensor x = ImageTensor::zeros(shape);
    for (auto& v : x.data) v = rng.uniform01();
    out.push_back(std::move(x));
  }
  return out;
}

// Replays every image through the wrapped oracle while tallying how many
// images were actually submitted, independent of the built-in counter.
class CountingOracle final : public ScoreOracle {
 public:
  explicit CountingOracle(ScoreOracle& inner) : inner_(&inner) {}

  Shape3 input_shape() const override { return inner_->input_shape(); }
  int num_classes() const override { return inner_->num_classes(); }
  std::uint64_t images_seen = 0;

 protected:
  ScoreMatrix score_batch(std::span<const ImageTensor> batch) override {
    images_seen += batch.size();
    return inner_->scores(batch);
  }

 private:
  ScoreOracle* inner_;
};

// Succeeds for the first `budget` images, then reports the backend as gone.
class FailingOracle final : public ScoreOracle {
 public:
  FailingOracle(ScoreOracle& inner, std::uint64_t budget)
      : inner_(&inner), budget_(budget) {}

  Shape3 input_shape() const override { return inner_->input_shape(); }
  int num_classes() const override { return inner_->num_classes(); }

 protected:
  ScoreMatrix score_batch(std::span<const ImageTensor> batch) override {
    if (served_ + batch.size() > budget_) {
      throw std::runtime_error("oracle unavailable");
    }
    served_ += batch.size();
    return inner_->scores(batch);
  }

 private:
  ScoreOracle* inner_;
  std::uint64_t budget_;
  std::uint64_t served_ = 0;
};

// Returns rows from a fixed table keyed by the first value of each image.
class ScriptedOracle final : public ScoreOracle {
 public:
  ScriptedOracle(Shape3 shape, std::vector<std::vector<double>> table)
      : shape_(shape), table_(std::move(table)) {}

  Shape3 input_shape() const override { return shape_; }
  int num_classes() const override {
    return static_cast<int>(table_.front().size());
  }

 protected:
  ScoreMatrix score_batch(std::span<const ImageTensor> batch) override {
    ScoreMatrix out;
    for (const auto& x : batch) {
      const auto idx = static_cast<std::size_t>(std::lround(x.data[0] * 10.0));
      out.push_back(table_.at(idx));
    }
    return out;
  }

 private:
  Shape3 shape_;
  std::vector<std::vector<double>> table_;
};

ImageTensor constant_image(Shape3 shape, double v) {
  ImageTensor x = ImageTensor::zeros(shape);
  for (auto& d : x.data) d = v;
  return x;
}

// Clean-room rerun of the published search contract, written from the
// documented behavior: zero start, one clean pass fixing base labels, then
// per iteration one sampled direction tried at -epsilon first and +epsilon
// second, each candidate projected onto the budget ball and accepted only on
// strict improvement, with the success rate read off the scores already in
// hand. Query counts are tallied by hand here.
struct ReferenceRun {
  Perturbation uap;
  std::vector<TraceRow> trace;
  std::uint64_t queries = 0;
};

ReferenceRun reference_attack(ScoreOracle& oracle,
                              const std::vector<ImageTensor>& X,
                              const AttackConfig& cfg) {
  const Shape3 shape = oracle.input_shape();
  const DirectionSet set = cfg.directions == DirectionKind::PixelBasis
                               ? DirectionSet::pixel(shape)
                               : DirectionSet::dct(shape, cfg.freq_fraction);
  DirectionSampler sampler(set, cfg.seed, cfg.sample_without_replacement);

  ReferenceRun run;
  run.uap = Perturbation::zeros(shape, cfg.norm, cfg.xi);

  auto evaluate = [&](const Perturbation& delta) {
    std::vector<ImageTensor> shifted;
    shifted.reserve(X.size());
    for (const auto& x : X) shifted.push_back(apply_perturbation(x, delta, cfg.clip));
    run.queries += X.size();
    return oracle.scores(shifted);
  };

  ScoreMatrix current = evaluate(run.uap);
  std::vector<int> base(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) {
    base[i] = cfg.mode == AttackMode::Targeted ? cfg.target_class
                                               : argmax_row(current[i]);
  }
  auto objective_of = [&](const ScoreMatrix& rows) {
    double s = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      s += rows[i][static_cast<std::size_t>(base[i])];
    }
    return s;
  };
  auto rate_of = [&](const ScoreMatrix& rows) {
    int hits = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      const int pred = argmax_row(rows[i]);
      if (cfg.mode == AttackMode::Targeted ? pred == base[i]
                                           : pred != base[i]) {
        ++hits;
      }
    }
    return static_cast<double>(hits) / static_cast<double>(X.size());
  };

  double objective = objective_of(current);
  double rate = 0.0;
  int iteration = 0;
  while (rate < 1.0 && iteration < cfg.max_iterations) {
    auto [index, q] = sampler.next();
    bool accepted = false;
    int sign_used = 0;
    for (int sign : {-1, +1}) {
      std::vector<double> cand = run.uap.data;
      for (std::size_t j = 0; j < cand.size(); ++j) {
        cand[j] += sign * cfg.epsilon * q[j];
      }
      cand = project(cand, cfg.norm, cfg.xi);
      Perturbation trial{shape, std::move(cand), cfg.norm, cfg.xi};
      ScoreMatrix rows = evaluate(trial);
      const double s = objective_of(rows);
      const bool improves = cfg.mode == AttackMode::NonTargeted ? s < objective
                                                                : s > objective;
      if (improves) {
        run.uap = std::move(trial);
        objective = s;
        current = std::move(rows);
        accepted = true;
        sign_used = sign;
        break;
      }
    }
    rate = rate_of(current);
    ++iteration;
    run.trace.push_back(TraceRow{iteration, run.queries, objective, rate,
                                 accepted, index, sign_used});
  }
  return run;
}

}  // namespace

TEST_CASE("config validation rejects bad parameters") {
  AttackConfig cfg;
  cfg.xi = 0.5;

  AttackConfig bad = cfg;
  bad.epsilon = 0.0;
  CHECK_THROWS_WITH_AS(bad.validate(2), "invalid epsilon",
                       std::invalid_argument);
  bad = cfg;
  bad.xi = -0.1;
  CHECK_THROWS_WITH_AS(bad.validate(2), "negative budget",
                       std::invalid_argument);
  bad = cfg;
  bad.max_iterations = 0;
  CHECK_THROWS_WITH_AS(bad.validate(2), "invalid max iterations",
                       std::invalid_argument);
  bad = cfg;
  bad.mode = AttackMode::Targeted;
  bad.target_class = 2;
  CHECK_THROWS_WITH_AS(bad.validate(2), "unknown class",
                       std::invalid_argument);
  bad.target_class = 1;
  CHECK_NOTHROW(bad.validate(2));
}

TEST_CASE("mode strings round-trip") {
  CHECK(attack_mode_from_string("nontargeted") == AttackMode::NonTargeted);
  CHECK(attack_mode_from_string("targeted") == AttackMode::Targeted);
  CHECK(attack_mode_to_string(AttackMode::Targeted) == "targeted");
  CHECK_THROWS_AS(attack_mode_from_string("both"), std::invalid_argument);
  CHECK(stop_reason_to_string(StopReason::SuccessRateOne) ==
        "success_rate_one");
  CHECK(stop_reason_to_string(StopReason::MaxIterations) == "max_iterations");
}

TEST_CASE("objective_sum adds the labeled confidences") {
  const Shape3 shape{1, 1, 1};
  // Image value k/10 selects table row k.
  ScriptedOracle oracle(shape, {{0.9, 0.1}, {0.2, 0.8}});
  std::vector<ImageTensor> X{constant_image(shape, 0.0),
                             constant_image(shape, 0.1)};
  const Perturbation zero = Perturbation::zeros(shape, Norm::L2, 0.0);

  const std::vector<int> labels{0, 1};
  auto result = objective_sum(oracle, X, labels, zero, true);
  CHECK(result.sum == doctest::Approx(0.9 + 0.8).epsilon(1e-12));
  CHECK(result.scores.size() == 2);
  CHECK(oracle.query_count() == 2);

  // Cross-check against a per-image lookup of the same score rows.
  double manual = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    manual += result.scores[i][static_cast<std::size_t>(labels[i])];
  }
  CHECK(result.sum == doctest::Approx(manual).epsilon(1e-15));

  const std::vector<int> target_labels{1, 1};
  CHECK(objective_sum(oracle, X, target_labels, zero, true).sum ==
        doctest::Approx(0.1 + 0.8).epsilon(1e-12));
}

TEST_CASE("objective_sum validates inputs") {
  const Shape3 shape{2, 2, 1};
  auto oracle = LinearSoftmaxOracle::random(shape, 2, 3);
  const Perturbation zero = Perturbation::zeros(shape, Norm::L2, 0.0);
  const auto X = random_images(shape, 2, 4);

  CHECK_THROWS_WITH_AS(
      objective_sum(oracle, std::span<const ImageTensor>{}, std::span<const int>{},
                    zero, true),
      "empty dataset", std::invalid_argument);
  const std::vector<int> short_labels{0};
  CHECK_THROWS_WITH_AS(objective_sum(oracle, X, short_labels, zero, true),
                       "label count mismatch", std::invalid_argument);
  const std::vector<int> bad_labels{0, 2};
  CHECK_THROWS_WITH_AS(objective_sum(oracle, X, bad_labels, zero, true),
                       "unknown class", std::invalid_argument);
}

TEST_CASE("attack matches an independent replay of the search contract") {
  const Shape3 shape{6, 6, 1};
  const auto X = random_images(shape, 8, 51);

  AttackConfig cfg;
  cfg.epsilon = 0.4;
  cfg.xi = 0.8;
  cfg.norm = Norm::L2;
  cfg.max_iterations = 120;
  cfg.directions = DirectionKind::PixelBasis;
  cfg.seed = 9;

  auto oracle = LinearSoftmaxOracle::random(shape, 3, 77);
  auto report = run_attack(oracle, X, cfg);

  auto mirror = LinearSoftmaxOracle::random(shape, 3, 77);
  auto ref = reference_attack(mirror, X, cfg);

  REQUIRE(report.trace.size() == ref.trace.size());
  for (std::size_t i = 0; i < ref.trace.size(); ++i) {
    CAPTURE(i);
    CHECK(report.trace[i] == ref.trace[i]);
  }
  CHECK(report.uap.data == ref.uap.data);  // bitwise
  CHECK(report.queries == ref.queries);
  CHECK(report.accepted_updates > 0);
}

TEST_CASE("targeted attack matches the replay and climbs") {
  const Shape3 shape{5, 5, 1};
  const auto X = random_images(shape, 6, 61);

  AttackConfig cfg;
  cfg.mode = AttackMode::Targeted;
  cfg.target_class = 2;
  cfg.epsilon = 0.5;
  cfg.xi = 1.0;
  cfg.norm = Norm::L2;
  cfg.max_iterations = 150;
  cfg.directions = DirectionKind::DctBasis;
  cfg.freq_fraction = 0.6;
  cfg.seed = 13;

  auto oracle = MlpOracle::random(shape, 3, 6, 55);
  auto report = run_attack(oracle, X, cfg);

  auto mirror = MlpOracle::random(shape, 3, 6, 55);
  auto ref = reference_attack(mirror, X, cfg);
  REQUIRE(report.trace.size() == ref.trace.size());
  for (std::size_t i = 0; i < ref.trace.size(); ++i) {
    CAPTURE(i);
    CHECK(report.trace[i] == ref.trace[i]);
  }
  CHECK(report.uap.data == ref.uap.data);

  // Accepted objectives must strictly increase toward the target.
  double last = -1.0;
  int accepted = 0;
  for (const auto& row : report.trace) {
    if (!row.accepted) continue;
    if (accepted > 0) CHECK(row.objective > last);
    last = row.objective;
    ++accepted;
  }
  CHECK(accepted == report.accepted_updates);
  CHECK(accepted > 0);
  CHECK(report.base_labels == std::vector<int>(X.size(), 2));
}

TEST_CASE("same seed reproduces the run; different seed diverges") {
  const Shape3 shape{4, 4, 1};
  const auto X = random_images(shape, 5, 71);

  AttackConfig cfg;
  cfg.epsilon = 0.3;
  cfg.xi = 0.5;
  cfg.max_iterations = 60;
  cfg.directions = DirectionKind::PixelBasis;
  cfg.seed = 42;

  auto a = LinearSoftmaxOracle::random(shape, 2, 5);
  auto b = LinearSoftmaxOracle::random(shape, 2, 5);
  const auto r1 = run_attack(a, X, cfg);
  const auto r2 = run_attack(b, X, cfg);
  CHECK(r1.trace == r2.trace);
  CHECK(r1.uap.data == r2.uap.data);

  cfg.seed = 43;
  auto c = LinearSoftmaxOracle::random(shape, 2, 5);
  const auto r3 = run_attack(c, X, cfg);
  CHECK(r3.trace != r1.trace);
}

TEST_CASE("query accounting follows the per-iteration cost rule") {
  const Shape3 shape{4, 4, 1};
  const auto X = random_images(shape, 7, 81);

  AttackConfig cfg;
  cfg.epsilon = 0.4;
  cfg.xi = 0.6;
  cfg.max_iterations = 80;
  cfg.directions = DirectionKind::PixelBasis;
  cfg.seed = 3;

  auto inner = LinearSoftmaxOracle::random(shape, 2, 15);
  CountingOracle counter(inner);
  const auto report = run_attack(counter, X, cfg);

  CHECK(report.queries == counter.images_seen);
  const auto n = static_cast<std::uint64_t>(X.size());
  CHECK(report.queries <=
        n * (1 + 2 * static_cast<std::uint64_t>(report.iterations)));

  // Row-by-row: the clean pass costs |X|; an iteration costs |X| when the
  // first candidate is accepted and 2|X| otherwise.
  std::uint64_t prev = n;
  for (const auto& row : report.trace) {
    const std::uint64_t cost =
        (row.accepted && row.alpha_sign == -1) ? n : 2 * n;
    CHECK(row.queries == prev + cost);
    prev = row.queries;
  }
  CHECK(report.queries == prev);
}

TEST_CASE("zero budget yields a zero perturbation and no accepted steps") {
  const Shape3 shape{4, 4, 1};
  const auto X = random_images(shape, 4, 91);

  AttackConfig cfg;
  cfg.xi = 0.0;
  cfg.epsilon = 0.5;
  cfg.max_iterations = 30;
  cfg.directions = DirectionKind::PixelBasis;
  cfg.seed = 2;

  auto oracle = LinearSoftmaxOracle::random(shape, 2, 25);
  const auto report = run_attack(oracle, X, cfg);
  CHECK(report.accepted_updates == 0);
  CHECK(report.iterations == 30);
  CHECK(report.uap.data == std::vector<double>(16, 0.0));
  CHECK(report.final_success_rate == 0.0);
  CHECK(report.reason == StopReason::MaxIterations);
}

TEST_CASE("a flat-score oracle never accepts a step") {
  const Shape3 shape{4, 4, 1};
  const auto X = random_images(shape, 4, 95);

  // All-zero weights: every image scores exactly uniform, so no candidate
  // can strictly improve the objective.
  LinearSoftmaxOracle oracle(shape, 3, std::vector<float>(16 * 3, 0.0f),
                             std::vector<float>(3, 0.0f));
  AttackConfig cfg;
  cfg.xi = 0.5;
  cfg.max_iterations = 40;
  cfg.directions = DirectionKind::PixelBasis;
  cfg.seed = 6;

  const auto report = run_attack(oracle, X, cfg);
  CHECK(report.accepted_updates == 0);
  CHECK(report.iterations == 40);
  CHECK(report.uap.data == std::vector<double>(16, 0.0));
}

TEST_CASE("accepted objectives strictly decrease in non-targeted mode") {
  const Shape3 shape{6, 6, 1};
  const auto X = random_images(shape, 10, 101);

  AttackConfig cfg;
  cfg.epsilon = 0.4;
  cfg.xi = 0.9;
  cfg.max_iterations = 200;
  cfg.directions = DirectionKind::DctBasis;
  cfg.freq_fraction = 0.5;
  cfg.seed = 17;

  auto oracle = LinearSoftmaxOracle::random(shape, 4, 33);
  const auto report = run_attack(oracle, X, cfg);
  REQUIRE(report.accepted_updates > 1);

  double last = 1e300;
  for (const auto& row : report.trace) {
    if (!row.accepted) continue;
    CHECK(row.objective < last);
    last = row.objective;
  }
}

TEST_CASE("budget holds at every trace row") {
  const Shape3 shape{5, 5, 1};
  const auto X = random_images(shape, 6, 111);

  AttackConfig cfg;
  cfg.epsilon = 0.6;
  cfg.xi = 0.4;
  cfg.norm = Norm::LInf;
  cfg.max_iterations = 120;
  cfg.directions = DirectionKind::PixelBasis;
  cfg.seed = 23;

  // Rebuild the perturbation row by row from the accepted steps and check
  // the norm after each accepted update.
  auto oracle = LinearSoftmaxOracle::random(shape, 3, 29);
  const auto report = run_attack(oracle, X, cfg);

  const DirectionSet set = DirectionSet::pixel(shape);
  std::vector<double> delta(static_cast<std::size_t>(shape.count()), 0.0);
  for (const auto& row : report.trace) {
    if (row.accepted) {
      const auto q = set.materialize(row.direction_index);
      for (std::size_t j = 0; j < delta.size(); ++j) {
        delta[j] += row.alpha_sign * cfg.epsilon * q[j];
      }
      delta = project(delta, cfg.norm, cfg.xi);
    }
    CHECK(lp_norm(delta, cfg.norm) <= cfg.xi + 1e-9);
  }
  CHECK(delta == report.uap.data);  // replay reconstructs the result exactly
}

TEST_CASE("success rate one stops the run early") {
  const Shape3 shape{3, 3, 1};
  // A single image and a pliable linear model: flipping one image's label
  // is quick, after which the loop must stop with the success reason.
  const auto X = random_images(shape, 1, 121);

  AttackConfig cfg;
  cfg.epsilon = 0.5;
  cfg.xi = 3.0;
  cfg.max_iterations = 400;
  cfg.directions = DirectionKind::PixelBasis;
  cfg.seed = 31;

  auto oracle = LinearSoftmaxOracle::random(shape, 2, 13);
  const auto report = run_attack(oracle, X, cfg);
  CHECK(report.reason == StopReason::SuccessRateOne);
  CHECK(report.final_success_rate == 1.0);
  CHECK(report.iterations < cfg.max_iterations);
  CHECK(report.trace.back().success_rate == 1.0);
}

TEST_CASE("oracle failure mid-run aborts with the partial report") {
  const Shape3 shape{4, 4, 1};
  const auto X = random_images(shape, 5, 131);

  AttackConfig cfg;
  cfg.epsilon = 0.4;
  cfg.xi = 0.7;
  cfg.max_iterations = 100;
  cfg.directions = DirectionKind::PixelBasis;
  cfg.seed = 37;

  auto inner = LinearSoftmaxOracle::random(shape, 2, 19);
  // Enough budget for the clean pass plus a handful of iterations.
  FailingOracle flaky(inner, 5 * 9);

  try {
    run_attack(flaky, X, cfg);
    FAIL("expected AttackAborted");
  } catch (const AttackAborted& e) {
    CHECK(std::string(e.what()) == "oracle unavailable");
    const AttackReport& partial = e.partial();
    CHECK(partial.trace.size() >= 1);
    CHECK(partial.trace.size() < 100);
    CHECK(partial.queries == flaky.query_count());
    // Completed rows are intact.
    for (const auto& row : partial.trace) {
      CHECK(row.iteration >= 1);
      CHECK(row.queries <= partial.queries);
    }
  }
}

TEST_CASE("empty dataset is rejected") {
  const Shape3 shape{4, 4, 1};
  auto oracle = LinearSoftmaxOracle::random(shape, 2, 7);
  AttackConfig cfg;
  cfg.xi = 0.5;
  CHECK_THROWS_WITH_AS(run_attack(oracle, {}, cfg), "empty dataset",
                       std::invalid_argument);
}

TEST_CASE("trace sink observes every row in order") {
  const Shape3 shape{4, 4, 1};
  const auto X = random_images(shape, 4, 141);

  AttackConfig cfg;
  cfg.epsilon = 0.4;
  cfg.xi = 0.6;
  cfg.max_iterations = 25;
  cfg.directions = DirectionKind::PixelBasis;
  cfg.seed = 47;

  auto oracle = LinearSoftmaxOracle::random(shape, 2, 11);
  std::vector<TraceRow> streamed;
  const auto report =
      run_attack(oracle, X, cfg, [&](const TraceRow& r) { streamed.push_back(r); });
  CHECK(streamed == report.trace);
}

TEST_CASE("trace CSV round-trips the rows") {
  TempDir tmp;
  const std::vector<TraceRow> rows{
      TraceRow{1, 80, 34.598343968852397, 0.05, true, 22, -1},
      TraceRow{2, 160, 34.598343968852397, 0.0, false, 7, 0},
  };
  const auto path = tmp.file("trace.csv");
  write_trace_csv(path, rows);

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == kTraceCsvHeader);
  REQUIRE(std::getline(in, line));
  CHECK(line == "1,80,34.598343968852397,0.050000000000000003,1,22,-1");
  REQUIRE(std::getline(in, line));
  CHECK(line == "2,160,34.598343968852397,0,0,7,0");
  CHECK_FALSE(std::getline(in, line));

  // Full-precision doubles survive a parse back.
  double objective = 0.0;
  std::sscanf("34.598343968852397", "%lf", &objective);
  CHECK(objective == rows[0].objective);
}
