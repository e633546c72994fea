// SPDX-License-Identifier: Apache-2.0
//
// Serial reference tally: one pass over frames in dataset order, ordered
// maps everywhere. The parallel kernel is tested and benchmarked against it.

#include <algorithm>

#include "splitaudit/stats.hpp"

namespace splitaudit::stats::reference {

Tally tally(const Dataset& dataset, const std::vector<SetLabel>& labels, const FramePredicate& filter) {
  const std::size_t phases = dataset.phase_count();
  const std::size_t instruments = dataset.instrument_count();

  Tally t;
  t.phase_count = phases;
  t.instrument_count = instruments;
  t.phase_frames.assign(phases, PerSet{});
  t.phase_surgeries.assign(phases, PerSet{});
  t.instrument_phase_frames.assign(phases * instruments, PerSet{});
  t.instrument_frames.assign(instruments, PerSet{});
  t.surgery_frames.assign(dataset.surgery_count(), 0);

  for (std::size_t s = 0; s < dataset.surgery_count(); ++s) {
    const auto& frames = dataset.surgeries()[s].frames();
    const auto slot = set_slot(labels.at(s));
    std::vector<bool> seen(phases, false);

    for (std::size_t k = 0; k < frames.size(); ++k) {
      const auto& f = frames[k];
      if (!filter.accepts(s, f)) continue;
      ++t.surgery_frames[s];
      ++t.total_frames[slot];
      ++t.phase_frames[f.phase][slot];
      seen[f.phase] = true;
      if (f.idle()) ++t.idle_frames[slot];
      if (!f.instruments.empty()) ++t.combination_frames[f.instruments][slot];
      for (auto i : f.instruments.members()) {
        ++t.instrument_frames[i][slot];
        ++t.instrument_phase_frames[f.phase * instruments + i][slot];
      }
      if (k > 0 && filter.accepts(s, frames[k - 1]) && frames[k - 1].phase != f.phase) {
        const Transition tr{frames[k - 1].phase, f.phase};
        ++t.transitions[tr][slot];
        auto& list = t.transition_surgeries[tr];
        if (list.empty() || list.back() != s) list.push_back(s);
      }
    }
    for (std::size_t p = 0; p < phases; ++p) {
      if (seen[p]) ++t.phase_surgeries[p][slot];
    }
  }
  return t;
}

}  // namespace splitaudit::stats::reference
