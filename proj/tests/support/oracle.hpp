// SPDX-License-Identifier: Apache-2.0
//
// Brute-force full-scan oracle. Everything here works from the raw frame
// sequences with plain containers and nested loops; it shares no code with
// the library's tally, signature or coverage paths.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "splitaudit/model.hpp"
#include "splitaudit/splits.hpp"
#include "splitaudit/stats.hpp"

namespace oracle {

using splitaudit::Dataset;
using splitaudit::FrameRecord;
using splitaudit::SetLabel;
using splitaudit::SplitAssignment;
using Counts = std::array<std::int64_t, 3>;

inline int slot_of(SetLabel s) {
  switch (s) {
    case SetLabel::Train: return 0;
    case SetLabel::Val: return 1;
    case SetLabel::Test: return 2;
  }
  return -1;
}

inline std::vector<int> instruments_of(const FrameRecord& f, std::size_t instrument_count) {
  std::vector<int> out;
  for (std::size_t i = 0; i < instrument_count; ++i) {
    if ((f.instruments.bits() >> i) & 1U) out.push_back(static_cast<int>(i));
  }
  return out;
}

/// Phase reference by exact name or 1-based "P<k>".
inline std::optional<int> phase_ref(const Dataset& d, const std::string& ref) {
  for (std::size_t p = 0; p < d.phase_count(); ++p) {
    if (d.phases()[p].name == ref) return static_cast<int>(p);
  }
  if (ref.size() >= 2 && ref[0] == 'P') {
    int k = 0;
    for (std::size_t c = 1; c < ref.size(); ++c) {
      if (ref[c] < '0' || ref[c] > '9') return std::nullopt;
      k = k * 10 + (ref[c] - '0');
    }
    if (k >= 1 && k <= static_cast<int>(d.phase_count())) return k - 1;
  }
  return std::nullopt;
}

inline int instrument_ref(const Dataset& d, const std::string& name) {
  for (std::size_t i = 0; i < d.instrument_count(); ++i) {
    if (d.instruments()[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

/// Evaluates filter criteria directly against one frame.
struct Filter {
  const Dataset* dataset = nullptr;
  splitaudit::stats::FilterCriteria criteria;

  [[nodiscard]] bool surgery_selected(std::size_t s) const {
    if (!criteria.transition) return true;
    const int from = *phase_ref(*dataset, criteria.transition->first);
    const int to = *phase_ref(*dataset, criteria.transition->second);
    const auto& fr = dataset->surgeries()[s].frames();
    for (std::size_t k = 0; k + 1 < fr.size(); ++k) {
      if (fr[k].phase == from && fr[k + 1].phase == to) return true;
    }
    return false;
  }

  [[nodiscard]] bool accepts(std::size_t s, const FrameRecord& f) const {
    if (!surgery_selected(s)) return false;
    if (!criteria.phases.empty()) {
      bool hit = false;
      for (const auto& ref : criteria.phases) hit = hit || *phase_ref(*dataset, ref) == f.phase;
      if (!hit) return false;
    }
    const auto visible = instruments_of(f, dataset->instrument_count());
    auto is_visible = [&](int i) { return std::find(visible.begin(), visible.end(), i) != visible.end(); };
    for (const auto& name : criteria.instruments) {
      if (!is_visible(instrument_ref(*dataset, name))) return false;
    }
    if (!criteria.combination.empty()) {
      std::set<int> want;
      for (const auto& name : criteria.combination) want.insert(instrument_ref(*dataset, name));
      if (std::set<int>(visible.begin(), visible.end()) != want) return false;
    }
    return true;
  }
};

struct Stats {
  std::vector<Counts> phase_frames;
  std::vector<Counts> phase_surgeries;
  std::map<std::pair<int, int>, Counts> transitions;
  std::map<std::pair<int, int>, std::vector<std::string>> transition_surgeries;
  std::map<std::pair<int, int>, Counts> instrument_phase;  // (phase, instrument)
  std::vector<Counts> instrument_frames;
  std::map<std::vector<int>, Counts> combinations;  // exact sets, size >= 1
  Counts idle{};
  Counts total{};
  std::vector<std::int64_t> surgery_frames;
};

inline Stats full_scan(const Dataset& d, const SplitAssignment& a, const Filter& filter) {
  Stats st;
  st.phase_frames.assign(d.phase_count(), Counts{});
  st.phase_surgeries.assign(d.phase_count(), Counts{});
  st.instrument_frames.assign(d.instrument_count(), Counts{});
  for (std::size_t s = 0; s < d.surgery_count(); ++s) {
    const auto& surgery = d.surgeries()[s];
    const int set = slot_of(a.label_of(surgery.id()));
    const auto& fr = surgery.frames();
    std::int64_t accepted = 0;
    std::set<int> phases_seen;
    for (std::size_t k = 0; k < fr.size(); ++k) {
      if (!filter.accepts(s, fr[k])) continue;
      ++accepted;
      ++st.total[set];
      ++st.phase_frames[fr[k].phase][set];
      phases_seen.insert(fr[k].phase);
      const auto visible = instruments_of(fr[k], d.instrument_count());
      if (visible.empty()) ++st.idle[set];
      if (!visible.empty()) ++st.combinations[visible][set];
      for (int i : visible) {
        ++st.instrument_frames[i][set];
        ++st.instrument_phase[{fr[k].phase, i}][set];
      }
    }
    for (int p : phases_seen) ++st.phase_surgeries[p][set];
    for (std::size_t k = 0; k + 1 < fr.size(); ++k) {
      if (fr[k].phase == fr[k + 1].phase) continue;
      if (!filter.accepts(s, fr[k]) || !filter.accepts(s, fr[k + 1])) continue;
      const std::pair<int, int> key{fr[k].phase, fr[k + 1].phase};
      ++st.transitions[key][set];
      auto& ids = st.transition_surgeries[key];
      if (ids.empty() || ids.back() != surgery.id()) ids.push_back(surgery.id());
    }
    st.surgery_frames.push_back(accepted);
  }
  return st;
}

// Coverage entities, keyed by category: 0 transition (from, to), 1 instrument
// during phase (phase, instrument), 2 combination (sorted member list).
using EntityKey = std::vector<int>;

struct Coverage {
  std::array<std::set<EntityKey>, 3> universe;
  std::array<std::array<std::set<EntityKey>, 3>, 3> unrepresented;  // [category][set]
  std::map<int, Counts> start_phases;
  std::map<int, Counts> end_phases;
};

inline std::array<std::set<EntityKey>, 3> entities_of(const splitaudit::Surgery& s, std::size_t instrument_count,
                                                      std::size_t min_combination) {
  std::array<std::set<EntityKey>, 3> out;
  const auto& fr = s.frames();
  for (std::size_t k = 0; k < fr.size(); ++k) {
    if (k + 1 < fr.size() && fr[k].phase != fr[k + 1].phase) out[0].insert({fr[k].phase, fr[k + 1].phase});
    const auto visible = instruments_of(fr[k], instrument_count);
    for (int i : visible) out[1].insert({fr[k].phase, i});
    if (!visible.empty() && visible.size() >= min_combination) out[2].insert(visible);
  }
  return out;
}

inline Coverage coverage(const Dataset& d, const SplitAssignment& a, std::size_t min_combination = 2) {
  Coverage cov;
  std::array<std::array<std::set<EntityKey>, 3>, 3> present;
  for (const auto& s : d.surgeries()) {
    const int set = slot_of(a.label_of(s.id()));
    const auto ents = entities_of(s, d.instrument_count(), min_combination);
    for (int c = 0; c < 3; ++c) {
      for (const auto& e : ents[c]) {
        cov.universe[c].insert(e);
        present[c][set].insert(e);
      }
    }
    ++cov.start_phases[s.frames().front().phase][set];
    ++cov.end_phases[s.frames().back().phase][set];
  }
  for (int c = 0; c < 3; ++c) {
    for (int set = 0; set < 3; ++set) {
      if (set == 1 && !a.has_validation()) continue;
      for (const auto& e : cov.universe[c]) {
        if (!present[c][set].count(e)) cov.unrepresented[c][set].insert(e);
      }
    }
  }
  return cov;
}

/// Unit-weight objective: total unrepresented entities over all active sets.
inline std::int64_t unit_score(const Dataset& d, const SplitAssignment& a, std::size_t min_combination = 2) {
  const auto cov = coverage(d, a, min_combination);
  std::int64_t total = 0;
  for (const auto& cat : cov.unrepresented) {
    for (const auto& set : cat) total += static_cast<std::int64_t>(set.size());
  }
  return total;
}

}  // namespace oracle
