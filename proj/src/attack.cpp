#include "uap/attack.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "uap/projection.hpp"

namespace uap {

namespace {

// Bound on perturbed images materialized at once; oracle chunking by
// batch_cap happens inside ScoreOracle::scores.
constexpr std::size_t kMaterializeChunk = 256;

ObjectiveResult score_and_sum(ScoreOracle& oracle,
                              std::span<const ImageTensor> X,
                              std::span<const int> labels,
                              const Perturbation& delta, bool clip) {
  ObjectiveResult result;
  result.scores.reserve(X.size());
  for (std::size_t i = 0; i < X.size();) {
    const std::size_t n = std::min(kMaterializeChunk, X.size() - i);
    std::vector<ImageTensor> perturbed;
    perturbed.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      perturbed.push_back(apply_perturbation(X[i + j], delta, clip));
    }
    ScoreMatrix rows = oracle.scores(perturbed);
    for (auto& row : rows) result.scores.push_back(std::move(row));
    i += n;
  }
  for (std::size_t i = 0; i < X.size(); ++i) {
    result.sum += result.scores[i][static_cast<std::size_t>(labels[i])];
  }
  return result;
}

double success_rate(const ScoreMatrix& scores, std::span<const int> labels,
                    AttackMode mode) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool match = argmax_row(scores[i]) == labels[i];
    if (mode == AttackMode::NonTargeted ? !match : match) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

}  // namespace

AttackMode attack_mode_from_string(const std::string& s) {
  if (s == "nontargeted") return AttackMode::NonTargeted;
  if (s == "targeted") return AttackMode::Targeted;
  throw std::invalid_argument("unknown attack mode: " + s);
}

std::string attack_mode_to_string(AttackMode m) {
  return m == AttackMode::NonTargeted ? "nontargeted" : "targeted";
}

std::string stop_reason_to_string(StopReason r) {
  return r == StopReason::SuccessRateOne ? "success_rate_one" : "max_iterations";
}

void AttackConfig::validate(int num_classes) const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("invalid epsilon");
  if (xi < 0.0) throw std::invalid_argument("negative budget");
  if (max_iterations < 1) throw std::invalid_argument("invalid max iterations");
  if (mode == AttackMode::Targeted &&
      (target_class < 0 || target_class >= num_classes)) {
    throw std::invalid_argument("unknown class");
  }
}

ObjectiveResult objective_sum(ScoreOracle& oracle,
                              std::span<const ImageTensor> X,
                              std::span<const int> labels,
                              const Perturbation& delta, bool clip) {
  if (X.empty()) throw std::invalid_argument("empty dataset");
  if (labels.size() != X.size()) throw std::invalid_argument("label count mismatch");
  for (int label : labels) {
    if (label < 0 || label >= oracle.num_classes()) {
      throw std::invalid_argument("unknown class");
    }
  }
  return score_and_sum(oracle, X, labels, delta, clip);
}

AttackReport run_attack(ScoreOracle& oracle, const std::vector<ImageTensor>& X,
                        const AttackConfig& config, const TraceSink& on_row) {
  if (X.empty()) throw std::invalid_argument("empty dataset");
  config.validate(oracle.num_classes());

  const Shape3 shape = oracle.input_shape();
  const DirectionSet set =
      config.directions == DirectionKind::PixelBasis
          ? DirectionSet::pixel(shape)
          : DirectionSet::dct(shape, config.freq_fraction);
  DirectionSampler sampler(set, config.seed, config.sample_without_replacement);

  const std::uint64_t queries_before = oracle.query_count();
  AttackReport report;
  report.uap = Perturbation::zeros(shape, config.norm, config.xi);

  try {
    // One clean pass fixes the base labels and the objective for delta = 0.
    ScoreMatrix current_scores;
    {
      auto initial = score_and_sum(oracle, X, std::vector<int>(X.size(), 0),
                                   report.uap, config.clip);
      current_scores = std::move(initial.scores);
    }
    report.base_labels.resize(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
      report.base_labels[i] = config.mode == AttackMode::Targeted
                                  ? config.target_class
                                  : argmax_row(current_scores[i]);
    }
    double current_objective = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      current_objective +=
          current_scores[i][static_cast<std::size_t>(report.base_labels[i])];
    }

    double rate = 0.0;
    while (rate < 1.0 && report.iterations < config.max_iterations) {
      auto [direction_index, direction] = sampler.next();

      bool accepted = false;
      int alpha_sign = 0;
      for (int sign : {-1, +1}) {
        const double alpha = sign * config.epsilon;
        std::vector<double> candidate = report.uap.data;
        for (std::size_t j = 0; j < candidate.size(); ++j) {
          candidate[j] += alpha * direction[j];
        }
        candidate = project(candidate, config.norm, config.xi);
        Perturbation trial{shape, std::move(candidate), config.norm, config.xi};
        auto evaluated = score_and_sum(oracle, X, report.base_labels, trial,
                                       config.clip);
        const bool improves = config.mode == AttackMode::NonTargeted
                                  ? evaluated.sum < current_objective
                                  : evaluated.sum > current_objective;
        if (improves) {
          report.uap = std::move(trial);
          current_objective = evaluated.sum;
          current_scores = std::move(evaluated.scores);
          accepted = true;
          alpha_sign = sign;
          break;
        }
      }

      rate = success_rate(current_scores, report.base_labels, config.mode);
      ++report.iterations;
      if (accepted) ++report.accepted_updates;

      TraceRow row{report.iterations, oracle.query_count() - queries_before,
                   current_objective, rate, accepted, direction_index,
                   alpha_sign};
      report.trace.push_back(row);
      if (on_row) on_row(row);
    }

    report.queries = oracle.query_count() - queries_before;
    report.final_objective = current_objective;
    report.final_success_rate = rate;
    report.reason = rate >= 1.0 ? StopReason::SuccessRateOne
                                : StopReason::MaxIterations;
    return report;
  } catch (const std::exception& e) {
    report.queries = oracle.query_count() - queries_before;
    throw AttackAborted(e.what(), std::move(report));
  }
}

std::string format_trace_row(const TraceRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d,%llu,%.17g,%.17g,%d,%d,%d", r.iteration,
                static_cast<unsigned long long>(r.queries), r.objective,
                r.success_rate, r.accepted ? 1 : 0, r.direction_index,
                r.alpha_sign);
  return buf;
}

void write_trace_csv(const std::filesystem::path& path,
                     std::span<const TraceRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << kTraceCsvHeader << "\n";
  for (const TraceRow& r : rows) out << format_trace_row(r) << "\n";
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
}

}  // namespace uap
