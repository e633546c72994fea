// SPDX-License-Identifier: Apache-2.0
//
// Synthetic datasets, assignments and on-disk fixtures for tests.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "splitaudit/model.hpp"
#include "splitaudit/splits.hpp"
#include "splitaudit/stats.hpp"

namespace fixtures {

using splitaudit::Dataset;
using splitaudit::FrameRecord;
using splitaudit::InstrumentSet;
using splitaudit::SetLabel;
using splitaudit::SplitAssignment;
using splitaudit::Surgery;

inline std::string surgery_id(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%02zu", k);
  return buf;
}

inline std::vector<std::string> names(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(prefix + std::to_string(k));
  return out;
}

struct RandomShape {
  std::size_t max_surgeries = 10;
  std::size_t max_frames = 100;
  std::size_t max_phases = 5;
  std::size_t max_instruments = 5;
};

/// Phases drift forward with occasional jumps back; instruments are sparse.
inline Dataset random_dataset(std::mt19937_64& rng, const RandomShape& shape = {}) {
  auto uniform = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  const auto phases = uniform(1, shape.max_phases);
  const auto instruments = uniform(1, shape.max_instruments);
  const auto surgeries = uniform(2, shape.max_surgeries);
  std::bernoulli_distribution change(0.15);
  std::bernoulli_distribution visible(0.35);
  std::vector<Surgery> out;
  for (std::size_t s = 0; s < surgeries; ++s) {
    const auto frames = uniform(1, shape.max_frames);
    std::vector<FrameRecord> fr;
    auto phase = static_cast<splitaudit::PhaseIndex>(uniform(0, phases - 1));
    std::int64_t t = static_cast<std::int64_t>(uniform(0, 3));
    for (std::size_t k = 0; k < frames; ++k) {
      if (change(rng)) phase = static_cast<splitaudit::PhaseIndex>(uniform(0, phases - 1));
      InstrumentSet set;
      for (std::size_t i = 0; i < instruments; ++i) {
        if (visible(rng)) set.insert(static_cast<splitaudit::InstrumentIndex>(i));
      }
      fr.push_back({t, phase, set});
      t += static_cast<std::int64_t>(uniform(1, 2));
    }
    out.emplace_back(surgery_id(s), std::move(fr));
  }
  return Dataset(names("phase", phases), names("inst", instruments), std::move(out));
}

/// Random total assignment with non-empty train and test (and val if asked).
inline SplitAssignment random_assignment(std::mt19937_64& rng, const Dataset& d, bool with_val) {
  const auto n = d.surgery_count();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::map<std::string, SetLabel> labels;
  const bool val = with_val && n >= 3;
  for (std::size_t k = 0; k < n; ++k) {
    SetLabel l;
    if (k == 0) {
      l = SetLabel::Train;
    } else if (k == 1) {
      l = SetLabel::Test;
    } else if (k == 2 && val) {
      l = SetLabel::Val;
    } else {
      const auto r = std::uniform_int_distribution<int>(0, val ? 2 : 1)(rng);
      l = r == 0 ? SetLabel::Train : (r == 1 ? SetLabel::Test : SetLabel::Val);
    }
    labels.emplace(d.surgeries()[order[k]].id(), l);
  }
  return {std::move(labels), val};
}

/// Random conjunction of filter criteria; phases are sometimes given as "P<k>".
inline splitaudit::stats::FilterCriteria random_criteria(std::mt19937_64& rng, const Dataset& d) {
  splitaudit::stats::FilterCriteria c;
  std::bernoulli_distribution coin(0.35);
  auto phase = [&] { return std::uniform_int_distribution<std::size_t>(0, d.phase_count() - 1)(rng); };
  auto instrument = [&] { return std::uniform_int_distribution<std::size_t>(0, d.instrument_count() - 1)(rng); };
  if (coin(rng)) {
    const auto p = phase();
    c.phases.push_back(coin(rng) ? "P" + std::to_string(p + 1) : d.phase_name(static_cast<splitaudit::PhaseIndex>(p)));
    if (coin(rng)) c.phases.push_back(d.phase_name(static_cast<splitaudit::PhaseIndex>(phase())));
  }
  if (coin(rng)) c.instruments.push_back(d.instrument_name(static_cast<splitaudit::InstrumentIndex>(instrument())));
  if (coin(rng)) {
    std::set<std::string> members;
    const auto k = std::uniform_int_distribution<std::size_t>(1, d.instrument_count())(rng);
    for (std::size_t n = 0; n < k; ++n) {
      members.insert(d.instrument_name(static_cast<splitaudit::InstrumentIndex>(instrument())));
    }
    c.combination.assign(members.begin(), members.end());
  }
  if (d.phase_count() >= 2 && coin(rng)) {
    const auto from = phase();
    auto to = phase();
    while (to == from) to = phase();
    c.transition = std::pair{d.phase_name(static_cast<splitaudit::PhaseIndex>(from)),
                             d.phase_name(static_cast<splitaudit::PhaseIndex>(to))};
  }
  return c;
}

/// Eighty surgeries named like Cholec80 ("video01".."video80") with the
/// Cholec80 phase and instrument vocabularies and short, mostly ordered
/// phase sequences.
inline Dataset cholec_like_dataset(std::uint64_t seed, std::size_t max_frames = 40) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> phases{"Preparation",          "CalotTriangleDissection", "ClippingCutting",
                                        "GallbladderDissection", "GallbladderPackaging",    "CleaningCoagulation",
                                        "GallbladderRetraction"};
  const std::vector<std::string> tools{"Grasper", "Bipolar", "Hook", "Scissors", "Clipper", "Irrigator", "SpecimenBag"};
  std::bernoulli_distribution advance(0.3);
  std::bernoulli_distribution visible(0.25);
  std::bernoulli_distribution skip(0.1);
  std::vector<Surgery> out;
  for (int k = 1; k <= 80; ++k) {
    const auto frames = std::uniform_int_distribution<std::size_t>(8, max_frames)(rng);
    std::vector<FrameRecord> fr;
    splitaudit::PhaseIndex phase = skip(rng) ? 1 : 0;
    for (std::size_t t = 0; t < frames; ++t) {
      if (advance(rng)) phase = static_cast<splitaudit::PhaseIndex>(std::min<std::size_t>(6, phase + (skip(rng) ? 2 : 1)));
      InstrumentSet set;
      for (std::size_t i = 0; i < tools.size(); ++i) {
        if (visible(rng)) set.insert(static_cast<splitaudit::InstrumentIndex>(i));
      }
      fr.push_back({static_cast<std::int64_t>(t), phase, set});
    }
    out.emplace_back(splitaudit::cholec80_id(k), std::move(fr));
  }
  return {phases, tools, std::move(out)};
}

struct PlantedInstance {
  Dataset dataset;
  SplitAssignment planted;  // scores zero under unit category weights
  splitaudit::PerSet sizes{};
};

/// Ten surgeries sharing a common backbone (every phase in order, every
/// instrument alone in every phase) plus rare entities that each occur in
/// exactly one surgery of every planted set. Only splits that keep each rare
/// entity's carriers apart score zero.
inline PlantedInstance planted_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  constexpr std::size_t kSurgeries = 10;
  constexpr std::size_t kPhases = 5;
  constexpr std::size_t kInstruments = 5;
  const splitaudit::PerSet sizes{4, 2, 4};

  std::vector<std::size_t> order(kSurgeries);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> groups(3);
  std::size_t k = 0;
  for (std::size_t set = 0; set < 3; ++set) {
    for (std::int64_t c = 0; c < sizes[set]; ++c) groups[set].push_back(order[k++]);
  }

  std::vector<std::vector<FrameRecord>> frames(kSurgeries);
  for (auto& fr : frames) {
    std::int64_t t = 0;
    for (std::size_t p = 0; p < kPhases; ++p) {
      for (std::size_t i = 0; i < kInstruments; ++i) {
        fr.push_back({t++, static_cast<splitaudit::PhaseIndex>(p),
                      InstrumentSet::of({static_cast<splitaudit::InstrumentIndex>(i)})});
      }
    }
  }
  // Rare entities: instrument pairs (a, b) appended as a final frame in the
  // last phase, and backward transitions from the last phase to an earlier one.
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < static_cast<int>(kInstruments); ++a) {
    for (int b = a + 1; b < static_cast<int>(kInstruments); ++b) pairs.emplace_back(a, b);
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  auto carriers = [&] {
    std::vector<std::size_t> out;
    for (const auto& g : groups) out.push_back(g[std::uniform_int_distribution<std::size_t>(0, g.size() - 1)(rng)]);
    return out;
  };
  constexpr int kRarePairs = 5;
  for (int r = 0; r < kRarePairs; ++r) {
    for (auto s : carriers()) {
      auto& fr = frames[s];
      fr.push_back({fr.back().time_index + 1, static_cast<splitaudit::PhaseIndex>(kPhases - 1),
                    InstrumentSet::of({static_cast<splitaudit::InstrumentIndex>(pairs[r].first),
                                       static_cast<splitaudit::InstrumentIndex>(pairs[r].second)})});
    }
  }
  constexpr int kRareTransitions = 2;
  for (int r = 0; r < kRareTransitions; ++r) {
    const auto back_to = static_cast<splitaudit::PhaseIndex>(r);  // P4 -> P0 or P4 -> P1
    for (auto s : carriers()) {
      auto& fr = frames[s];
      const auto t = fr.back().time_index + 1;
      fr.push_back({t, back_to, InstrumentSet::of({0})});
      fr.push_back({t + 1, static_cast<splitaudit::PhaseIndex>(kPhases - 1), InstrumentSet::of({0})});
    }
  }

  std::vector<Surgery> surgeries;
  for (std::size_t s = 0; s < kSurgeries; ++s) surgeries.emplace_back(surgery_id(s), std::move(frames[s]));
  std::map<std::string, SetLabel> labels;
  for (std::size_t set = 0; set < 3; ++set) {
    for (auto s : groups[set]) labels.emplace(surgery_id(s), splitaudit::kAllSets[set]);
  }
  return {Dataset(names("phase", kPhases), names("inst", kInstruments), std::move(surgeries)),
          SplitAssignment(std::move(labels), true), sizes};
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng{std::random_device{}()};
  auto dir = std::filesystem::temp_directory_path() / ("splitaudit-" + tag + "-" + std::to_string(rng()));
  std::filesystem::create_directories(dir);
  return dir;
}

/// Writes the dataset in the Cholec80 layout: phase files at `fps` frames per
/// time index, tool files with one row per time index numbered at `fps`.
inline void write_cholec80(const Dataset& d, const std::filesystem::path& root, int fps = 25) {
  std::filesystem::create_directories(root / "phase_annotations");
  std::filesystem::create_directories(root / "tool_annotations");
  for (const auto& s : d.surgeries()) {
    std::ofstream ph(root / "phase_annotations" / (s.id() + "-phase.txt"));
    std::ofstream tl(root / "tool_annotations" / (s.id() + "-tool.txt"));
    ph << "Frame\tPhase\n";
    tl << "Frame";
    for (const auto& i : d.instruments()) tl << '\t' << i.name;
    tl << '\n';
    const auto& fr = s.frames();
    for (std::size_t k = 0; k < fr.size(); ++k) {
      const auto first = fr[k].time_index * fps;
      const auto next = k + 1 < fr.size() ? fr[k + 1].time_index * fps : first + fps;
      for (auto f = first; f < next; ++f) ph << f << '\t' << d.phase_name(fr[k].phase) << '\n';
      tl << first;
      for (std::size_t i = 0; i < d.instrument_count(); ++i) tl << '\t' << (fr[k].instruments.contains(i) ? 1 : 0);
      tl << '\n';
    }
  }
}

}  // namespace fixtures
