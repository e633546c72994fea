// SPDX-License-Identifier: Apache-2.0

#include "splitaudit/stats.hpp"

#include <algorithm>
#include <charconv>
#include <unordered_map>

#ifdef SPLITAUDIT_HAVE_OPENMP
#include <omp.h>
#endif

namespace splitaudit::stats {

std::optional<PhaseIndex> resolve_phase(const Dataset& dataset, std::string_view ref) {
  if (auto p = dataset.find_phase(ref)) return p;
  if (ref.size() >= 2 && (ref[0] == 'P' || ref[0] == 'p')) {
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(ref.data() + 1, ref.data() + ref.size(), k);
    if (ec == std::errc{} && ptr == ref.data() + ref.size() && k >= 1 && k <= dataset.phase_count()) {
      return static_cast<PhaseIndex>(k - 1);
    }
  }
  return std::nullopt;
}

FramePredicate FramePredicate::accept_all(const Dataset&) { return FramePredicate{}; }

FramePredicate filter_frames(const Dataset& dataset, const FilterCriteria& criteria) {
  FramePredicate pred;
  if (!criteria.phases.empty()) {
    pred.phases_.assign(dataset.phase_count(), false);
    for (const auto& ref : criteria.phases) {
      auto p = resolve_phase(dataset, ref);
      if (!p) throw FilterError("unknown phase '" + ref + "'");
      pred.phases_[*p] = true;
    }
  }
  for (const auto& name : criteria.instruments) {
    auto i = dataset.find_instrument(name);
    if (!i) throw FilterError("unknown instrument '" + name + "'");
    pred.required_.insert(*i);
  }
  if (!criteria.combination.empty()) {
    InstrumentSet exact;
    for (const auto& name : criteria.combination) {
      auto i = dataset.find_instrument(name);
      if (!i) throw FilterError("unknown instrument '" + name + "'");
      exact.insert(*i);
    }
    pred.exact_ = exact;
  }
  if (criteria.transition) {
    auto from = resolve_phase(dataset, criteria.transition->first);
    auto to = resolve_phase(dataset, criteria.transition->second);
    if (!from) throw FilterError("unknown phase '" + criteria.transition->first + "'");
    if (!to) throw FilterError("unknown phase '" + criteria.transition->second + "'");
    if (*from == *to) throw FilterError("a transition needs two different phases");
    pred.surgeries_.assign(dataset.surgery_count(), false);
    const Transition wanted{*from, *to};
    for (std::size_t s = 0; s < dataset.surgery_count(); ++s) {
      const auto& frames = dataset.surgeries()[s].frames();
      for (std::size_t k = 1; k < frames.size(); ++k) {
        if (Transition{frames[k - 1].phase, frames[k].phase} == wanted) {
          pred.surgeries_[s] = true;
          break;
        }
      }
    }
  }
  return pred;
}

namespace {

void add(PerSet& into, const PerSet& from) {
  for (std::size_t k = 0; k < kSetCount; ++k) into[k] += from[k];
}

/// Dense per-thread accumulator; transitions live in a phase x phase grid.
struct DenseTally {
  std::size_t phases;
  std::size_t instruments;
  std::vector<PerSet> phase_frames;
  std::vector<PerSet> phase_surgeries;
  std::vector<PerSet> transitions;
  std::vector<std::vector<std::size_t>> transition_surgeries;
  std::vector<PerSet> instrument_phase;
  std::vector<PerSet> instrument_frames;
  std::unordered_map<std::uint64_t, PerSet> combinations;
  PerSet idle{};
  PerSet total{};

  DenseTally(std::size_t p, std::size_t i)
      : phases(p),
        instruments(i),
        phase_frames(p),
        phase_surgeries(p),
        transitions(p * p),
        transition_surgeries(p * p),
        instrument_phase(p * i),
        instrument_frames(i) {}

  void merge(const DenseTally& o) {
    for (std::size_t k = 0; k < phase_frames.size(); ++k) add(phase_frames[k], o.phase_frames[k]);
    for (std::size_t k = 0; k < phase_surgeries.size(); ++k) add(phase_surgeries[k], o.phase_surgeries[k]);
    for (std::size_t k = 0; k < transitions.size(); ++k) {
      add(transitions[k], o.transitions[k]);
      transition_surgeries[k].insert(transition_surgeries[k].end(), o.transition_surgeries[k].begin(),
                                     o.transition_surgeries[k].end());
    }
    for (std::size_t k = 0; k < instrument_phase.size(); ++k) add(instrument_phase[k], o.instrument_phase[k]);
    for (std::size_t k = 0; k < instrument_frames.size(); ++k) add(instrument_frames[k], o.instrument_frames[k]);
    for (const auto& [bits, counts] : o.combinations) add(combinations[bits], counts);
    add(idle, o.idle);
    add(total, o.total);
  }
};

void accumulate_surgery(DenseTally& t, const Surgery& surgery, std::size_t index, std::size_t slot,
                        const FramePredicate& filter, std::vector<char>& phase_seen,
                        std::vector<std::size_t>& touched_transitions, std::int64_t& accepted) {
  std::fill(phase_seen.begin(), phase_seen.end(), 0);
  touched_transitions.clear();
  const auto& frames = surgery.frames();
  bool previous_accepted = false;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = frames[k];
    const bool ok = filter.accepts(index, f);
    if (ok) {
      ++accepted;
      ++t.total[slot];
      ++t.phase_frames[f.phase][slot];
      phase_seen[f.phase] = 1;
      if (f.instruments.empty()) {
        ++t.idle[slot];
      } else {
        ++t.combinations[f.instruments.bits()][slot];
        for (std::uint64_t b = f.instruments.bits(); b != 0; b &= b - 1) {
          const auto inst = static_cast<std::size_t>(std::countr_zero(b));
          ++t.instrument_frames[inst][slot];
          ++t.instrument_phase[f.phase * t.instruments + inst][slot];
        }
      }
      if (previous_accepted && frames[k - 1].phase != f.phase) {
        const auto cell = frames[k - 1].phase * t.phases + f.phase;
        ++t.transitions[cell][slot];
        touched_transitions.push_back(cell);
      }
    }
    previous_accepted = ok;
  }
  for (std::size_t p = 0; p < t.phases; ++p) {
    if (phase_seen[p] != 0) ++t.phase_surgeries[p][slot];
  }
  std::sort(touched_transitions.begin(), touched_transitions.end());
  touched_transitions.erase(std::unique(touched_transitions.begin(), touched_transitions.end()),
                            touched_transitions.end());
  for (auto cell : touched_transitions) t.transition_surgeries[cell].push_back(index);
}

}  // namespace

Tally tally(const Dataset& dataset, const std::vector<SetLabel>& labels, const FramePredicate& filter) {
  const std::size_t phases = dataset.phase_count();
  const std::size_t instruments = dataset.instrument_count();
  const auto n = static_cast<std::int64_t>(dataset.surgery_count());
  if (labels.size() != dataset.surgery_count()) throw std::invalid_argument("one label per surgery required");

  DenseTally merged(phases, instruments);
  std::vector<std::int64_t> surgery_frames(dataset.surgery_count(), 0);

#ifdef SPLITAUDIT_HAVE_OPENMP
#pragma omp parallel
#endif
  {
    DenseTally local(phases, instruments);
    std::vector<char> phase_seen(phases);
    std::vector<std::size_t> touched;
#ifdef SPLITAUDIT_HAVE_OPENMP
#pragma omp for schedule(dynamic, 4) nowait
#endif
    for (std::int64_t s = 0; s < n; ++s) {
      const auto idx = static_cast<std::size_t>(s);
      accumulate_surgery(local, dataset.surgeries()[idx], idx, set_slot(labels[idx]), filter, phase_seen, touched,
                         surgery_frames[idx]);
    }
#ifdef SPLITAUDIT_HAVE_OPENMP
#pragma omp critical(splitaudit_tally_merge)
#endif
    merged.merge(local);
  }

  Tally out;
  out.phase_count = phases;
  out.instrument_count = instruments;
  out.phase_frames = std::move(merged.phase_frames);
  out.phase_surgeries = std::move(merged.phase_surgeries);
  out.instrument_phase_frames = std::move(merged.instrument_phase);
  out.instrument_frames = std::move(merged.instrument_frames);
  out.idle_frames = merged.idle;
  out.total_frames = merged.total;
  out.surgery_frames = std::move(surgery_frames);
  for (std::size_t cell = 0; cell < merged.transitions.size(); ++cell) {
    auto& surgeries = merged.transition_surgeries[cell];
    if (surgeries.empty()) continue;
    const Transition t{static_cast<PhaseIndex>(cell / phases), static_cast<PhaseIndex>(cell % phases)};
    out.transitions.emplace(t, merged.transitions[cell]);
    std::sort(surgeries.begin(), surgeries.end());
    out.transition_surgeries.emplace(t, std::move(surgeries));
  }
  for (const auto& [bits, counts] : merged.combinations) out.combination_frames.emplace(InstrumentSet(bits), counts);
  return out;
}

const TransitionEntry* TransitionStats::find(Transition t) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), t,
                             [](const TransitionEntry& e, const Transition& key) { return e.transition < key; });
  if (it == entries.end() || it->transition != t) return nullptr;
  return &*it;
}

std::int64_t TransitionStats::count(Transition t, SetLabel set) const {
  const auto* e = find(t);
  return e == nullptr ? 0 : e->count[set_slot(set)];
}

std::string_view to_string(Scaling s) {
  switch (s) {
    case Scaling::Absolute: return "absolute";
    case Scaling::PerPhase: return "per_phase";
    case Scaling::PerInstrument: return "per_instrument";
  }
  return "?";
}

std::optional<Scaling> parse_scaling(std::string_view text) {
  if (text == "absolute") return Scaling::Absolute;
  if (text == "per_phase") return Scaling::PerPhase;
  if (text == "per_instrument") return Scaling::PerInstrument;
  return std::nullopt;
}

std::vector<double> InstrumentPhaseStats::rescaled(Scaling mode, SetLabel set) const {
  const auto slot = set_slot(set);
  std::vector<double> out(phase_count * instrument_count, 0.0);
  for (std::size_t p = 0; p < phase_count; ++p) {
    for (std::size_t i = 0; i < instrument_count; ++i) {
      const auto v = static_cast<double>(frame_count[p * instrument_count + i][slot]);
      double denom = 1.0;
      if (mode == Scaling::PerPhase) denom = static_cast<double>(phase_frames[p][slot]);
      if (mode == Scaling::PerInstrument) denom = static_cast<double>(instrument_frames[i][slot]);
      out[p * instrument_count + i] = denom > 0 ? v / denom : 0.0;
    }
  }
  return out;
}

PhaseStats phase_stats(const Tally& t) {
  PhaseStats out;
  out.frame_count = t.phase_frames;
  out.surgery_occurrence_by_set = t.phase_surgeries;
  for (const auto& per_set : t.phase_surgeries) {
    out.surgery_occurrence.push_back(per_set[0] + per_set[1] + per_set[2]);
  }
  return out;
}

TransitionStats transition_stats(const Dataset& dataset, const Tally& t) {
  TransitionStats out;
  for (const auto& [transition, counts] : t.transitions) {
    TransitionEntry e{transition, counts, {}};
    for (auto s : t.transition_surgeries.at(transition)) e.surgeries.push_back(dataset.surgeries()[s].id());
    out.entries.push_back(std::move(e));
  }
  return out;
}

InstrumentPhaseStats instrument_phase_stats(const Tally& t) {
  return {t.phase_count, t.instrument_count, t.instrument_phase_frames, t.phase_frames, t.instrument_frames};
}

CooccurrenceStats cooccurrence_stats(const Tally& t) {
  CooccurrenceStats out;
  for (const auto& [set, counts] : t.combination_frames) {
    if (set.size() >= 2) out.combinations.emplace(CooccurrenceKey(set), counts);
  }
  out.instrument_frames = t.instrument_frames;
  out.idle_frames = t.idle_frames;
  out.total_frames = t.total_frames;
  return out;
}

PhaseStats compute_phase_stats(const Dataset& dataset, const SplitAssignment& assignment,
                               const FramePredicate& filter) {
  return phase_stats(tally(dataset, labels_by_index(dataset, assignment), filter));
}

TransitionStats compute_transition_stats(const Dataset& dataset, const SplitAssignment& assignment) {
  return compute_transition_stats(dataset, assignment, FramePredicate::accept_all(dataset));
}

TransitionStats compute_transition_stats(const Dataset& dataset, const SplitAssignment& assignment,
                                         const FramePredicate& filter) {
  return transition_stats(dataset, tally(dataset, labels_by_index(dataset, assignment), filter));
}

CooccurrenceStats compute_cooccurrence_stats(const Dataset& dataset, const SplitAssignment& assignment,
                                             const FramePredicate& filter) {
  return cooccurrence_stats(tally(dataset, labels_by_index(dataset, assignment), filter));
}

InstrumentPhaseStats compute_instrument_phase_stats(const Dataset& dataset, const SplitAssignment& assignment,
                                                    const FramePredicate& filter) {
  return instrument_phase_stats(tally(dataset, labels_by_index(dataset, assignment), filter));
}

SetSizeStats compute_set_sizes(const Dataset& dataset, const SplitAssignment& assignment) {
  SetSizeStats out;
  for (const auto& s : dataset.surgeries()) {
    const auto slot = set_slot(assignment.label_of(s.id()));
    const auto frames = static_cast<std::int64_t>(s.frame_count());
    ++out.surgery_count[slot];
    out.frame_count[slot] += frames;
    out.surgery_frames.emplace_back(s.id(), frames);
  }
  for (std::size_t k = 0; k < kSetCount; ++k) {
    if (out.surgery_count[k] > 0) {
      out.mean_frames[k] = static_cast<double>(out.frame_count[k]) / static_cast<double>(out.surgery_count[k]);
    }
  }
  return out;
}

}  // namespace splitaudit::stats
