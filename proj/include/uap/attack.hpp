#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uap/directions.hpp"
#include "uap/oracle.hpp"
#include "uap/tensor.hpp"

namespace uap {

enum class AttackMode { NonTargeted, Targeted };

AttackMode attack_mode_from_string(const std::string& s);
std::string attack_mode_to_string(AttackMode m);

struct AttackConfig {
  AttackMode mode = AttackMode::NonTargeted;
  int target_class = -1;  // required when mode == Targeted
  double epsilon = 0.5;
  double xi = 0.0;
  Norm norm = Norm::L2;
  int max_iterations = 5000;
  DirectionKind directions = DirectionKind::DctBasis;
  double freq_fraction = 28.0 / 299.0;
  bool sample_without_replacement = false;
  std::uint64_t seed = 1;
  bool clip = true;

  void validate(int num_classes) const;
};

enum class StopReason { SuccessRateOne, MaxIterations };

std::string stop_reason_to_string(StopReason r);

struct TraceRow {
  int iteration = 0;            // 1-based
  std::uint64_t queries = 0;    // cumulative since the run started
  double objective = 0.0;       // cached sum for the current perturbation
  double success_rate = 0.0;
  bool accepted = false;
  int direction_index = -1;
  int alpha_sign = 0;           // -1 / +1 for the accepted step, 0 if none

  bool operator==(const TraceRow&) const = default;
};

struct AttackReport {
  Perturbation uap;
  int iterations = 0;
  int accepted_updates = 0;
  std::uint64_t queries = 0;
  double final_objective = 0.0;
  double final_success_rate = 0.0;
  StopReason reason = StopReason::MaxIterations;
  std::vector<int> base_labels;  // clean labels, or the target class per image
  std::vector<TraceRow> trace;
};

/// Oracle failure mid-run; carries whatever the run completed.
class AttackAborted : public std::runtime_error {
 public:
  AttackAborted(const std::string& what, AttackReport partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const AttackReport& partial() const { return partial_; }

 private:
  AttackReport partial_;
};

struct ObjectiveResult {
  double sum = 0.0;
  ScoreMatrix scores;
};

/// Sum over X of the probability assigned to labels[i] under x_i + delta,
/// together with the full score matrix (so callers can derive predictions
/// without extra queries). Costs |X| queries.
ObjectiveResult objective_sum(ScoreOracle& oracle,
                              std::span<const ImageTensor> X,
                              std::span<const int> labels,
                              const Perturbation& delta, bool clip);

using TraceSink = std::function<void(const TraceRow&)>;

/// Hill-climbing search for a universal perturbation.
///
/// Starts from zero, repeatedly samples a direction and tries steps of
/// -epsilon then +epsilon projected onto the budget ball, accepting a step
/// only when it strictly lowers (non-targeted) or raises (targeted) the
/// objective sum. Stops when the per-set success rate reaches 1 or after
/// max_iterations. Base labels are captured from a single clean pass and
/// never recomputed; the success rate is derived from the score matrix
/// already held for the current perturbation, so each iteration costs |X|
/// queries plus |X| more only when the first candidate is rejected.
AttackReport run_attack(ScoreOracle& oracle,
                        const std::vector<ImageTensor>& X,
                        const AttackConfig& config,
                        const TraceSink& on_row = {});

constexpr const char* kTraceCsvHeader =
    "iteration,queries,objective,success_rate,accepted,direction_index,alpha_sign";

/// One CSV line (no newline), doubles at full round-trip precision.
std::string format_trace_row(const TraceRow& row);

void write_trace_csv(const std::filesystem::path& path,
                     std::span<const TraceRow> rows);

}  // namespace uap
