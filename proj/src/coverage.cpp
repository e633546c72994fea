// SPDX-License-Identifier: Apache-2.0

#include "splitaudit/coverage.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "splitaudit/signatures.hpp"

#ifdef SPLITAUDIT_HAVE_OPENMP
#include <omp.h>
#endif

namespace splitaudit::coverage {

std::string_view to_string(EntityCategory c) {
  switch (c) {
    case EntityCategory::PhaseTransition: return "phase_transition";
    case EntityCategory::InstrumentDuringPhase: return "instrument_during_phase";
    case EntityCategory::InstrumentCombination: return "instrument_combination";
  }
  return "?";
}

std::string describe(const Dataset& dataset, const Entity& e) {
  switch (e.category) {
    case EntityCategory::PhaseTransition:
      return dataset.phase_name(e.transition.from) + " -> " + dataset.phase_name(e.transition.to);
    case EntityCategory::InstrumentDuringPhase:
      return dataset.instrument_name(e.instrument) + " @ " + dataset.phase_name(e.phase);
    case EntityCategory::InstrumentCombination: {
      std::string out;
      for (const auto& name : dataset.instrument_names(e.combination)) {
        if (!out.empty()) out += '+';
        out += name;
      }
      return out;
    }
  }
  return {};
}

std::vector<SetLabel> CoverageReport::active_sets() const {
  if (has_validation) return {SetLabel::Train, SetLabel::Val, SetLabel::Test};
  return {SetLabel::Train, SetLabel::Test};
}

bool ReportDelta::empty() const {
  for (const auto& per_set : categories) {
    for (const auto& d : per_set) {
      if (!d.newly_covered.empty() || !d.newly_uncovered.empty()) return false;
    }
  }
  for (std::size_t s = 0; s < kSetCount; ++s) {
    if (!start_phases[s].newly_present.empty() || !start_phases[s].newly_absent.empty()) return false;
    if (!end_phases[s].newly_present.empty() || !end_phases[s].newly_absent.empty()) return false;
  }
  return true;
}

EntityTable build_entity_table(const Dataset& dataset, const CoverageOptions& options) {
  const auto n = dataset.surgery_count();
  std::vector<std::map<Entity, std::int64_t>> per_surgery(n);

#ifdef SPLITAUDIT_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(n); ++k) {
    const auto& surgery = dataset.surgeries()[static_cast<std::size_t>(k)];
    auto& sig = per_surgery[static_cast<std::size_t>(k)];
    for (const auto& t : derive_transitions(surgery)) ++sig[Entity::of_transition(t)];
    for (const auto& f : surgery.frames()) {
      for (auto i : f.instruments.members()) ++sig[Entity::of_phase_instrument(f.phase, i)];
      if (!f.instruments.empty() && f.instruments.size() >= options.min_combination_size) {
        ++sig[Entity::of_combination(f.instruments)];
      }
    }
  }

  EntityTable table;
  std::map<Entity, EntityIndex> index;
  for (const auto& sig : per_surgery) {
    for (const auto& [e, _] : sig) index.emplace(e, 0);
  }
  for (auto& [e, idx] : index) {
    idx = static_cast<EntityIndex>(table.entities.size());
    table.entities.push_back(e);
  }
  table.signatures.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (const auto& [e, count] : per_surgery[s]) table.signatures[s].emplace_back(index.at(e), count);
    table.first_phases.push_back(first_phase(dataset.surgeries()[s]));
    table.last_phases.push_back(last_phase(dataset.surgeries()[s]));
  }
  return table;
}

namespace {

std::vector<BoundaryPhase> boundary_phases(const Dataset& dataset, const std::vector<PhaseIndex>& phase_of,
                                           const std::vector<SetLabel>& labels) {
  std::map<PhaseIndex, BoundaryPhase> by_phase;
  for (std::size_t s = 0; s < phase_of.size(); ++s) {
    auto& b = by_phase[phase_of[s]];
    b.phase = phase_of[s];
    ++b.surgery_count[set_slot(labels[s])];
    b.surgeries[set_slot(labels[s])].push_back(dataset.surgeries()[s].id());
  }
  std::vector<BoundaryPhase> out;
  for (auto& [_, b] : by_phase) out.push_back(std::move(b));
  return out;
}

}  // namespace

CoverageReport coverage_report(const Dataset& dataset, const SplitAssignment& assignment,
                               const CoverageOptions& options) {
  const auto labels = labels_by_index(dataset, assignment);
  const auto table = build_entity_table(dataset, options);

  std::vector<EntityCoverage> coverage(table.entities.size());
  for (std::size_t e = 0; e < table.entities.size(); ++e) coverage[e].entity = table.entities[e];
  for (std::size_t s = 0; s < table.signatures.size(); ++s) {
    const auto slot = set_slot(labels[s]);
    for (const auto& [e, count] : table.signatures[s]) {
      coverage[e].occurrences[slot] += count;
      ++coverage[e].surgeries[slot];
    }
  }

  CoverageReport report;
  report.fingerprint = dataset.fingerprint();
  report.has_validation = assignment.has_validation();
  report.min_combination_size = options.min_combination_size;
  for (auto c : kCategories) report.categories[category_slot(c)].category = c;
  const auto active = assignment.active_sets();
  for (auto& ec : coverage) {
    auto& cat = report.categories[category_slot(ec.entity.category)];
    for (auto set : active) {
      if (ec.occurrences[set_slot(set)] == 0) cat.unrepresented[set_slot(set)].push_back(ec.entity);
    }
    cat.universe.push_back(std::move(ec));
  }
  report.start_phases = boundary_phases(dataset, table.first_phases, labels);
  report.end_phases = boundary_phases(dataset, table.last_phases, labels);
  return report;
}

std::vector<Entity> entity_universe(const Dataset& dataset, EntityCategory category, const CoverageOptions& options) {
  std::vector<Entity> out;
  for (const auto& e : build_entity_table(dataset, options).entities) {
    if (e.category == category) out.push_back(e);
  }
  return out;
}

std::array<std::vector<Entity>, kSetCount> unrepresented(const Dataset& dataset, const SplitAssignment& assignment,
                                                         EntityCategory category, const CoverageOptions& options) {
  return coverage_report(dataset, assignment, options).category(category).unrepresented;
}

namespace {

BoundaryDelta diff_boundary(const std::vector<BoundaryPhase>& before, const std::vector<BoundaryPhase>& after,
                            std::size_t slot) {
  auto present = [slot](const std::vector<BoundaryPhase>& v) {
    std::vector<PhaseIndex> out;
    for (const auto& b : v) {
      if (b.surgery_count[slot] > 0) out.push_back(b.phase);
    }
    return out;
  };
  const auto b = present(before);
  const auto a = present(after);
  BoundaryDelta d;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(d.newly_present));
  std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(d.newly_absent));
  return d;
}

}  // namespace

ReportDelta diff_reports(const CoverageReport& before, const CoverageReport& after) {
  if (before.fingerprint != after.fingerprint) throw CoverageError("reports describe different datasets");
  if (before.min_combination_size != after.min_combination_size) {
    throw CoverageError("reports use different combination size rules");
  }
  ReportDelta delta;
  for (auto c : kCategories) {
    const auto& b = before.category(c).universe;
    const auto& a = after.category(c).universe;
    if (a.size() != b.size()) throw CoverageError("reports have different entity universes");
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (a[k].entity != b[k].entity) throw CoverageError("reports have different entity universes");
      for (std::size_t s = 0; s < kSetCount; ++s) {
        const bool was = b[k].occurrences[s] > 0;
        const bool is = a[k].occurrences[s] > 0;
        auto& d = delta.categories[category_slot(c)][s];
        if (is && !was) d.newly_covered.push_back(a[k].entity);
        if (was && !is) d.newly_uncovered.push_back(a[k].entity);
      }
    }
  }
  for (std::size_t s = 0; s < kSetCount; ++s) {
    delta.start_phases[s] = diff_boundary(before.start_phases, after.start_phases, s);
    delta.end_phases[s] = diff_boundary(before.end_phases, after.end_phases, s);
  }
  return delta;
}

std::string render_table(const CoverageReport& report, std::string_view split_name) {
  auto cell = [&](EntityCategory c, SetLabel s) -> std::string {
    if (s == SetLabel::Val && !report.has_validation) return "-";
    return std::to_string(report.category(c).unrepresented[set_slot(s)].size());
  };
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s | %-23s | %-23s | %-23s\n", "", "Phase transition", "Instrument during phase",
                "Instrument combination");
  out << line;
  std::snprintf(line, sizeof line, "%-10s | %-7s%-7s%-9s | %-7s%-7s%-9s | %-7s%-7s%-9s\n", "Split", "Train", "Val",
                "Test", "Train", "Val", "Test", "Train", "Val", "Test");
  out << line;
  out << std::string(10, '-') << "-+-" << std::string(23, '-') << "-+-" << std::string(23, '-') << "-+-"
      << std::string(23, '-') << '\n';
  std::string row = std::string(split_name);
  std::snprintf(line, sizeof line, "%-10s |", row.c_str());
  out << line;
  for (auto c : kCategories) {
    std::snprintf(line, sizeof line, " %-7s%-7s%-9s |", cell(c, SetLabel::Train).c_str(), cell(c, SetLabel::Val).c_str(),
                  cell(c, SetLabel::Test).c_str());
    out << line;
  }
  auto text = out.str();
  text.pop_back();  // trailing '|'
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text + "\n";
}

}  // namespace splitaudit::coverage
