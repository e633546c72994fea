// SPDX-License-Identifier: Apache-2.0
//
// Swap-based local search for splits with few unrepresented cases.
//
// The objective is a constructed one (there is no agreed definition of an
// optimal split):
//
//   score = sum over categories c and active sets s of w[c][s] * |unrepresented(c, s)|
//         + w_div  * mean over active sets of TV(phase distribution of s, overall)
//         + w_disp * (max - min of per-set mean frames per surgery) / overall mean
//
// A move swaps two surgeries from different sets, so set sizes never change.
// Each step evaluates a random sample of swaps and takes the best improving
// one; once a full neighbourhood's worth of samples fails to improve, the
// chain restarts from a fresh random split. Independent chains share the
// evaluation budget and may run in parallel.

#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "splitaudit/coverage.hpp"
#include "splitaudit/signatures.hpp"
#include "splitaudit/splits.hpp"

namespace splitaudit::optimize {

class OptimizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Objective {
  /// [category][set], default 1.0 everywhere.
  std::array<std::array<double, kSetCount>, 3> category_weights{{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}}};
  double divergence_weight = 0.0;
  double disparity_weight = 0.0;

  /// Throws OptimizeError for negative weights or all-zero weights.
  void validate() const;
};

struct SearchConfig {
  PerSet sizes{};  // surgeries per set; val 0 means no validation set
  std::uint64_t seed = 0;
  std::int64_t budget = 5000;  // objective evaluations, shared by all chains
  int restarts = 1;            // independent chains
  int sample_size = 64;        // candidate swaps per step
  coverage::CoverageOptions coverage;

  [[nodiscard]] bool has_validation() const { return sizes[set_slot(SetLabel::Val)] > 0; }
};

struct TracePoint {
  std::int64_t evaluation = 0;  // 1-based, global across chains
  double score = 0.0;
  friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

struct Result {
  SplitAssignment assignment;
  double score = 0.0;
  double initial_score = 0.0;
  std::vector<TracePoint> trace;  // strictly decreasing scores
  std::int64_t evaluations = 0;
};

/// Direct evaluation from a full coverage report and set statistics.
/// Throws OptimizeError when the assignment fails validation.
[[nodiscard]] double score(const Dataset& dataset, const SplitAssignment& assignment, const Objective& objective,
                           const coverage::CoverageOptions& options = {});

/// Throws OptimizeError on a zero budget, sizes that do not partition the
/// dataset, or an initial split with the wrong sizes. `progress`, when
/// given, is incremented once per evaluation.
[[nodiscard]] Result optimize(const Dataset& dataset, const SearchConfig& config, const Objective& objective,
                              const std::optional<SplitAssignment>& initial = std::nullopt,
                              std::atomic<std::int64_t>* progress = nullptr);

/// Incremental evaluator over entity signatures. Exposed for testing.
class SwapEvaluator {
 public:
  SwapEvaluator(const Dataset& dataset, const coverage::EntityTable& table, const Objective& objective,
                std::vector<SetLabel> labels, bool has_validation);

  [[nodiscard]] double score() const { return score_; }
  /// Score after swapping the sets of surgeries a and b, without applying it.
  [[nodiscard]] double score_after_swap(std::size_t a, std::size_t b) const;
  void apply_swap(std::size_t a, std::size_t b);
  [[nodiscard]] const std::vector<SetLabel>& labels() const { return labels_; }

 private:
  struct Terms {
    std::array<std::array<std::int64_t, kSetCount>, 3> unrepresented{};
    std::array<double, kSetCount> divergence{};
    PerSet frames{};
    PerSet surgeries{};
  };

  [[nodiscard]] double combine(const Terms& t) const;
  [[nodiscard]] double set_divergence(const std::vector<std::int64_t>& phase_frames, std::int64_t frames) const;
  [[nodiscard]] Terms swapped_terms(std::size_t a, std::size_t b,
                                    std::vector<std::int64_t>* phase_a, std::vector<std::int64_t>* phase_b) const;

  const coverage::EntityTable* table_;
  Objective objective_;
  std::vector<SetLabel> labels_;
  std::vector<SetLabel> active_;
  std::size_t phase_count_;
  std::vector<std::vector<std::int64_t>> surgery_phase_frames_;  // [surgery][phase]
  std::vector<std::int64_t> surgery_frames_;
  std::vector<double> overall_distribution_;
  double overall_mean_frames_ = 0.0;

  std::vector<PerSet> entity_counts_;                      // [entity][set]
  std::array<std::vector<std::int64_t>, kSetCount> set_phase_frames_;  // [set][phase]
  Terms terms_;
  double score_ = 0.0;
};

}  // namespace splitaudit::optimize
