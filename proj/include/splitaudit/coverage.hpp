// SPDX-License-Identifier: Apache-2.0
//
// Unrepresented-case detection. An entity (phase transition, instrument
// seen during a phase, exact instrument combination) that occurs somewhere
// in the dataset is unrepresented in a set when it has zero occurrences
// there.

#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "splitaudit/model.hpp"
#include "splitaudit/splits.hpp"
#include "splitaudit/stats.hpp"

namespace splitaudit::coverage {

class CoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EntityCategory : std::uint8_t { PhaseTransition = 0, InstrumentDuringPhase = 1, InstrumentCombination = 2 };
inline constexpr std::array<EntityCategory, 3> kCategories{
    EntityCategory::PhaseTransition, EntityCategory::InstrumentDuringPhase, EntityCategory::InstrumentCombination};

[[nodiscard]] std::string_view to_string(EntityCategory c);
[[nodiscard]] constexpr std::size_t category_slot(EntityCategory c) { return static_cast<std::size_t>(c); }

/// Only the fields of the entity's category are meaningful.
struct Entity {
  EntityCategory category = EntityCategory::PhaseTransition;
  Transition transition;
  PhaseIndex phase = 0;
  InstrumentIndex instrument = 0;
  InstrumentSet combination;

  static Entity of_transition(Transition t) { return {EntityCategory::PhaseTransition, t, 0, 0, {}}; }
  static Entity of_phase_instrument(PhaseIndex p, InstrumentIndex i) {
    return {EntityCategory::InstrumentDuringPhase, {}, p, i, {}};
  }
  static Entity of_combination(InstrumentSet s) { return {EntityCategory::InstrumentCombination, {}, 0, 0, s}; }

  friend bool operator==(const Entity&, const Entity&) = default;
  friend auto operator<=>(const Entity&, const Entity&) = default;
};

/// Human-readable label, e.g. "GallbladderRetraction -> CleaningCoagulation".
[[nodiscard]] std::string describe(const Dataset& dataset, const Entity& e);

struct CoverageOptions {
  /// Smallest instrument set counted as a combination.
  std::size_t min_combination_size = 2;
};

struct EntityCoverage {
  Entity entity;
  PerSet occurrences{};  // transitions: occurrences; others: frames
  PerSet surgeries{};    // surgeries containing the entity
};

struct CategoryCoverage {
  EntityCategory category = EntityCategory::PhaseTransition;
  std::vector<EntityCoverage> universe;                      // ascending entity order
  std::array<std::vector<Entity>, kSetCount> unrepresented;  // empty for inactive sets

  [[nodiscard]] PerSet unrepresented_count() const {
    return {static_cast<std::int64_t>(unrepresented[0].size()), static_cast<std::int64_t>(unrepresented[1].size()),
            static_cast<std::int64_t>(unrepresented[2].size())};
  }
};

/// Which surgeries start (or end) in a phase, per set.
struct BoundaryPhase {
  PhaseIndex phase = 0;
  PerSet surgery_count{};
  std::array<std::vector<std::string>, kSetCount> surgeries;
};

struct CoverageReport {
  std::string fingerprint;
  bool has_validation = false;
  std::size_t min_combination_size = 2;
  std::array<CategoryCoverage, 3> categories;
  std::vector<BoundaryPhase> start_phases;  // only phases some surgery starts in
  std::vector<BoundaryPhase> end_phases;

  [[nodiscard]] const CategoryCoverage& category(EntityCategory c) const { return categories[category_slot(c)]; }
  [[nodiscard]] std::vector<SetLabel> active_sets() const;
};

/// Entities of the category occurring at least once anywhere.
[[nodiscard]] std::vector<Entity> entity_universe(const Dataset& dataset, EntityCategory category,
                                                  const CoverageOptions& options = {});

/// Per set: universe entities with zero occurrences in that set. Inactive
/// sets (val without validation) get empty lists.
[[nodiscard]] std::array<std::vector<Entity>, kSetCount> unrepresented(const Dataset& dataset,
                                                                       const SplitAssignment& assignment,
                                                                       EntityCategory category,
                                                                       const CoverageOptions& options = {});

[[nodiscard]] CoverageReport coverage_report(const Dataset& dataset, const SplitAssignment& assignment,
                                             const CoverageOptions& options = {});

struct SetDelta {
  std::vector<Entity> newly_covered;
  std::vector<Entity> newly_uncovered;
};

struct BoundaryDelta {
  std::vector<PhaseIndex> newly_present;
  std::vector<PhaseIndex> newly_absent;
};

struct ReportDelta {
  std::array<std::array<SetDelta, kSetCount>, 3> categories;  // [category][set]
  std::array<BoundaryDelta, kSetCount> start_phases;
  std::array<BoundaryDelta, kSetCount> end_phases;

  [[nodiscard]] const SetDelta& at(EntityCategory c, SetLabel s) const {
    return categories[category_slot(c)][set_slot(s)];
  }
  [[nodiscard]] bool empty() const;
};

/// Throws CoverageError when the reports come from different datasets or
/// combination rules.
[[nodiscard]] ReportDelta diff_reports(const CoverageReport& before, const CoverageReport& after);

/// Plain-text table: one row, three column groups of train/val/test counts.
[[nodiscard]] std::string render_table(const CoverageReport& report, std::string_view split_name);

}  // namespace splitaudit::coverage
