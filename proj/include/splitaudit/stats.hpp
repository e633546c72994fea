// SPDX-License-Identifier: Apache-2.0
//
// Per-set aggregates over a split dataset: phase frame counts, transitions,
// instrument usage per phase, instrument combinations, set sizes.
//
// Every aggregate comes out of one Tally. tally() walks surgeries in
// parallel with per-thread dense accumulators; reference::tally() is the
// plain serial loop kept for tests and benchmarks. Both must agree exactly.

#pragma once

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "splitaudit/model.hpp"
#include "splitaudit/splits.hpp"

namespace splitaudit::stats {

class FilterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// User-facing filter, by name. Non-empty fields combine as a conjunction.
/// Phase references accept the phase name or a 1-based "P<k>" alias.
struct FilterCriteria {
  std::vector<std::string> phases;       // frame phase is one of these
  std::vector<std::string> instruments;  // all of these are visible
  std::vector<std::string> combination;  // visible set is exactly this
  std::optional<std::pair<std::string, std::string>> transition;  // surgery contains from->to

  [[nodiscard]] bool empty() const {
    return phases.empty() && instruments.empty() && combination.empty() && !transition;
  }
  friend bool operator==(const FilterCriteria&, const FilterCriteria&) = default;
};

/// Resolved filter. The transition criterion selects whole surgeries; the
/// others select individual frames.
class FramePredicate {
 public:
  /// Accepts every frame of `dataset`.
  static FramePredicate accept_all(const Dataset& dataset);

  [[nodiscard]] bool surgery_selected(std::size_t surgery) const {
    return surgeries_.empty() || surgeries_[surgery];
  }
  [[nodiscard]] bool accepts(std::size_t surgery, const FrameRecord& frame) const {
    if (!surgery_selected(surgery)) return false;
    if (!phases_.empty() && !phases_[frame.phase]) return false;
    if (!frame.instruments.contains_all(required_)) return false;
    if (exact_ && frame.instruments != *exact_) return false;
    return true;
  }

 private:
  friend FramePredicate filter_frames(const Dataset&, const FilterCriteria&);

  std::vector<bool> phases_;     // empty: any phase
  std::vector<bool> surgeries_;  // empty: every surgery
  InstrumentSet required_;
  std::optional<InstrumentSet> exact_;
};

/// Resolves criteria against the dataset vocabularies; throws FilterError
/// on unknown phase or instrument names.
[[nodiscard]] FramePredicate filter_frames(const Dataset& dataset, const FilterCriteria& criteria);

/// Resolves "P<k>" (1-based) or a literal phase name.
[[nodiscard]] std::optional<PhaseIndex> resolve_phase(const Dataset& dataset, std::string_view ref);

struct Tally {
  std::size_t phase_count = 0;
  std::size_t instrument_count = 0;

  std::vector<PerSet> phase_frames;     // [phase]
  std::vector<PerSet> phase_surgeries;  // [phase] surgeries with >= 1 accepted frame in the phase
  std::map<Transition, PerSet> transitions;
  std::map<Transition, std::vector<std::size_t>> transition_surgeries;  // ascending surgery index
  std::vector<PerSet> instrument_phase_frames;                          // [phase * instrument_count + instrument]
  std::vector<PerSet> instrument_frames;                                // [instrument]
  std::map<InstrumentSet, PerSet> combination_frames;                   // every non-empty exact set
  PerSet idle_frames{};
  PerSet total_frames{};
  std::vector<std::int64_t> surgery_frames;  // accepted frames per surgery

  friend bool operator==(const Tally&, const Tally&) = default;
};

/// Transitions count when both adjacent frames are accepted.
[[nodiscard]] Tally tally(const Dataset& dataset, const std::vector<SetLabel>& labels, const FramePredicate& filter);

namespace reference {
[[nodiscard]] Tally tally(const Dataset& dataset, const std::vector<SetLabel>& labels, const FramePredicate& filter);
}  // namespace reference

struct PhaseStats {
  std::vector<PerSet> frame_count;               // [phase][set]
  std::vector<std::int64_t> surgery_occurrence;  // [phase]
  std::vector<PerSet> surgery_occurrence_by_set;
};

struct TransitionEntry {
  Transition transition;
  PerSet count{};
  std::vector<std::string> surgeries;
};

struct TransitionStats {
  std::vector<TransitionEntry> entries;  // ascending (from, to)

  [[nodiscard]] const TransitionEntry* find(Transition t) const;
  /// Count for (t, set); zero when the transition never occurs.
  [[nodiscard]] std::int64_t count(Transition t, SetLabel set) const;
};

enum class Scaling { Absolute, PerPhase, PerInstrument };

[[nodiscard]] std::string_view to_string(Scaling s);
[[nodiscard]] std::optional<Scaling> parse_scaling(std::string_view text);

struct InstrumentPhaseStats {
  std::size_t phase_count = 0;
  std::size_t instrument_count = 0;
  std::vector<PerSet> frame_count;  // [phase * instrument_count + instrument]
  std::vector<PerSet> phase_frames;
  std::vector<PerSet> instrument_frames;

  [[nodiscard]] std::int64_t at(PhaseIndex p, InstrumentIndex i, SetLabel s) const {
    return frame_count[p * instrument_count + i][set_slot(s)];
  }
  /// Row-major [phase][instrument] matrix for one set. PerPhase divides by
  /// the phase's frames in that set; PerInstrument by the instrument's
  /// visible frames in that set. Empty denominators yield 0.
  [[nodiscard]] std::vector<double> rescaled(Scaling mode, SetLabel set) const;
};

struct CooccurrenceStats {
  std::map<CooccurrenceKey, PerSet> combinations;
  std::vector<PerSet> instrument_frames;  // one count per visible instrument per frame
  PerSet idle_frames{};
  PerSet total_frames{};
};

struct SetSizeStats {
  PerSet surgery_count{};
  PerSet frame_count{};
  std::array<std::optional<double>, kSetCount> mean_frames{};  // absent for empty sets
  std::vector<std::pair<std::string, std::int64_t>> surgery_frames;
};

[[nodiscard]] PhaseStats phase_stats(const Tally& t);
[[nodiscard]] TransitionStats transition_stats(const Dataset& dataset, const Tally& t);
[[nodiscard]] InstrumentPhaseStats instrument_phase_stats(const Tally& t);
[[nodiscard]] CooccurrenceStats cooccurrence_stats(const Tally& t);

[[nodiscard]] PhaseStats compute_phase_stats(const Dataset& dataset, const SplitAssignment& assignment,
                                             const FramePredicate& filter);
[[nodiscard]] TransitionStats compute_transition_stats(const Dataset& dataset, const SplitAssignment& assignment);
[[nodiscard]] TransitionStats compute_transition_stats(const Dataset& dataset, const SplitAssignment& assignment,
                                                       const FramePredicate& filter);
[[nodiscard]] CooccurrenceStats compute_cooccurrence_stats(const Dataset& dataset, const SplitAssignment& assignment,
                                                           const FramePredicate& filter);
[[nodiscard]] InstrumentPhaseStats compute_instrument_phase_stats(const Dataset& dataset,
                                                                  const SplitAssignment& assignment,
                                                                  const FramePredicate& filter);
/// Whole surgeries, unfiltered.
[[nodiscard]] SetSizeStats compute_set_sizes(const Dataset& dataset, const SplitAssignment& assignment);

}  // namespace splitaudit::stats
