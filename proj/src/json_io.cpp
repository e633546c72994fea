// SPDX-License-Identifier: Apache-2.0

#include "splitaudit/json_io.hpp"

#include <cstdio>

namespace splitaudit::json_io {

namespace {

json names(const Dataset& dataset, InstrumentSet set) { return dataset.instrument_names(set); }

std::vector<SetLabel> active(bool has_validation) {
  if (has_validation) return {SetLabel::Train, SetLabel::Val, SetLabel::Test};
  return {SetLabel::Train, SetLabel::Test};
}

template <typename T, typename Fn>
json per_set_of(const std::array<T, kSetCount>& values, bool has_validation, Fn&& convert) {
  json out = json::object();
  for (auto s : active(has_validation)) out[std::string(to_string(s))] = convert(values[set_slot(s)]);
  return out;
}

json boundary_to_json(const Dataset& dataset, const std::vector<coverage::BoundaryPhase>& phases,
                      bool has_validation) {
  json out = json::array();
  for (const auto& b : phases) {
    out.push_back({{"phase", dataset.phase_name(b.phase)},
                   {"count", per_set(b.surgery_count, has_validation)},
                   {"surgeries", per_set_of(b.surgeries, has_validation, [](const auto& v) { return json(v); })}});
  }
  return out;
}

std::vector<std::string> string_list(const json& doc, const char* key) {
  if (!doc.contains(key)) return {};
  const auto& v = doc.at(key);
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) throw stats::FilterError(std::string("'") + key + "' must be a string or an array of strings");
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) throw stats::FilterError(std::string("'") + key + "' entries must be strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

json per_set(const PerSet& values, bool has_validation) {
  return per_set_of(values, has_validation, [](std::int64_t v) { return json(v); });
}

json entity_to_json(const Dataset& dataset, const coverage::Entity& e) {
  json out;
  out["label"] = coverage::describe(dataset, e);
  switch (e.category) {
    case coverage::EntityCategory::PhaseTransition:
      out["from"] = dataset.phase_name(e.transition.from);
      out["to"] = dataset.phase_name(e.transition.to);
      out["direction"] = std::string(to_string(e.transition.direction()));
      break;
    case coverage::EntityCategory::InstrumentDuringPhase:
      out["phase"] = dataset.phase_name(e.phase);
      out["instrument"] = dataset.instrument_name(e.instrument);
      break;
    case coverage::EntityCategory::InstrumentCombination:
      out["instruments"] = names(dataset, e.combination);
      break;
  }
  return out;
}

json coverage_to_json(const Dataset& dataset, const coverage::CoverageReport& report) {
  json out;
  out["schema_version"] = kSchemaVersion;
  out["fingerprint"] = report.fingerprint;
  out["has_validation"] = report.has_validation;
  out["min_combination_size"] = report.min_combination_size;
  json categories = json::object();
  for (auto c : coverage::kCategories) {
    const auto& cat = report.category(c);
    json universe = json::array();
    for (const auto& ec : cat.universe) {
      auto e = entity_to_json(dataset, ec.entity);
      e["occurrences"] = per_set(ec.occurrences, report.has_validation);
      e["surgeries"] = per_set(ec.surgeries, report.has_validation);
      universe.push_back(std::move(e));
    }
    categories[std::string(coverage::to_string(c))] = {
        {"unrepresented_count", per_set(cat.unrepresented_count(), report.has_validation)},
        {"unrepresented", per_set_of(cat.unrepresented, report.has_validation,
                                     [&](const std::vector<coverage::Entity>& list) {
                                       json arr = json::array();
                                       for (const auto& e : list) arr.push_back(entity_to_json(dataset, e));
                                       return arr;
                                     })},
        {"universe", std::move(universe)},
    };
  }
  out["categories"] = std::move(categories);
  out["start_phases"] = boundary_to_json(dataset, report.start_phases, report.has_validation);
  out["end_phases"] = boundary_to_json(dataset, report.end_phases, report.has_validation);
  return out;
}

json delta_to_json(const Dataset& dataset, const coverage::ReportDelta& delta, bool has_validation) {
  auto entities = [&](const std::vector<coverage::Entity>& list) {
    json arr = json::array();
    for (const auto& e : list) arr.push_back(entity_to_json(dataset, e));
    return arr;
  };
  auto phases = [&](const std::vector<PhaseIndex>& list) {
    json arr = json::array();
    for (auto p : list) arr.push_back(dataset.phase_name(p));
    return arr;
  };
  json out;
  out["schema_version"] = kSchemaVersion;
  json categories = json::object();
  for (auto c : coverage::kCategories) {
    json sets = json::object();
    for (auto s : active(has_validation)) {
      const auto& d = delta.at(c, s);
      sets[std::string(to_string(s))] = {{"newly_covered", entities(d.newly_covered)},
                                         {"newly_uncovered", entities(d.newly_uncovered)}};
    }
    categories[std::string(coverage::to_string(c))] = std::move(sets);
  }
  out["categories"] = std::move(categories);
  for (const auto& [key, boundary] : {std::pair{"start_phases", &delta.start_phases}, {"end_phases", &delta.end_phases}}) {
    json sets = json::object();
    for (auto s : active(has_validation)) {
      const auto& d = (*boundary)[set_slot(s)];
      sets[std::string(to_string(s))] = {{"newly_present", phases(d.newly_present)},
                                         {"newly_absent", phases(d.newly_absent)}};
    }
    out[key] = std::move(sets);
  }
  return out;
}

json set_sizes_to_json(const stats::SetSizeStats& sizes, const SplitAssignment& assignment) {
  const bool hv = assignment.has_validation();
  json out;
  out["surgery_count"] = per_set(sizes.surgery_count, hv);
  out["frame_count"] = per_set(sizes.frame_count, hv);
  out["mean_frames"] = per_set_of(sizes.mean_frames, hv, [](const std::optional<double>& m) {
    return m ? json(*m) : json(nullptr);
  });
  json surgeries = json::array();
  for (const auto& [id, frames] : sizes.surgery_frames) {
    surgeries.push_back({{"id", id}, {"set", std::string(to_string(assignment.label_of(id)))}, {"frames", frames}});
  }
  out["surgeries"] = std::move(surgeries);
  return out;
}

json assignment_to_json(const SplitAssignment& assignment) {
  json out;
  out["schema_version"] = kSchemaVersion;
  out["has_validation"] = assignment.has_validation();
  for (auto s : kAllSets) out[std::string(to_string(s))] = assignment.members(s);
  return out;
}

json load_report_to_json(const ingest::LoadReport& report) {
  json errors = json::array();
  for (const auto& e : report.errors) errors.push_back({{"surgery", e.surgery_id}, {"message", e.message}});
  std::int64_t phase_only = 0;
  std::int64_t tool_only = 0;
  for (const auto& [_, d] : report.diagnostics) {
    phase_only += d.dropped_phase_only;
    tool_only += d.dropped_tool_only;
  }
  return {{"errors", std::move(errors)},
          {"dropped_phase_only", phase_only},
          {"dropped_tool_only", tool_only}};
}

stats::FilterCriteria criteria_from_json(const json& doc) {
  if (doc.is_null()) return {};
  if (!doc.is_object()) throw stats::FilterError("filter criteria must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "phases" && key != "instruments" && key != "combination" && key != "transition" &&
        key != "schema_version") {
      throw stats::FilterError("unknown filter key '" + key + "'");
    }
  }
  stats::FilterCriteria c;
  c.phases = string_list(doc, "phases");
  c.instruments = string_list(doc, "instruments");
  c.combination = string_list(doc, "combination");
  if (doc.contains("transition") && !doc.at("transition").is_null()) {
    auto t = string_list(doc, "transition");
    if (t.size() != 2) throw stats::FilterError("'transition' must be [from, to]");
    c.transition = std::pair{t[0], t[1]};
  }
  return c;
}

json criteria_to_json(const stats::FilterCriteria& criteria) {
  json out = json::object();
  if (!criteria.phases.empty()) out["phases"] = criteria.phases;
  if (!criteria.instruments.empty()) out["instruments"] = criteria.instruments;
  if (!criteria.combination.empty()) out["combination"] = criteria.combination;
  if (criteria.transition) out["transition"] = {criteria.transition->first, criteria.transition->second};
  return out;
}

optimize::Objective objective_from_json(const json& doc) {
  optimize::Objective o;
  try {
    if (doc.contains("weights")) {
      for (const auto& [key, sets] : doc.at("weights").items()) {
        std::optional<coverage::EntityCategory> cat;
        for (auto c : coverage::kCategories) {
          if (coverage::to_string(c) == key) cat = c;
        }
        if (!cat) throw optimize::OptimizeError("unknown category '" + key + "' in objective weights");
        if (sets.is_number()) {
          o.category_weights[coverage::category_slot(*cat)].fill(sets.get<double>());
          continue;
        }
        for (const auto& [set_name, w] : sets.items()) {
          auto s = parse_set_label(set_name);
          if (!s) throw optimize::OptimizeError("unknown set '" + set_name + "' in objective weights");
          o.category_weights[coverage::category_slot(*cat)][set_slot(*s)] = w.get<double>();
        }
      }
    }
    if (doc.contains("divergence_weight")) o.divergence_weight = doc.at("divergence_weight").get<double>();
    if (doc.contains("disparity_weight")) o.disparity_weight = doc.at("disparity_weight").get<double>();
  } catch (const json::exception& e) {
    throw optimize::OptimizeError(std::string("malformed objective: ") + e.what());
  }
  o.validate();
  return o;
}

json objective_to_json(const optimize::Objective& objective) {
  json weights = json::object();
  for (auto c : coverage::kCategories) {
    json sets = json::object();
    for (auto s : kAllSets) {
      sets[std::string(to_string(s))] = objective.category_weights[coverage::category_slot(c)][set_slot(s)];
    }
    weights[std::string(coverage::to_string(c))] = std::move(sets);
  }
  return {{"weights", std::move(weights)},
          {"divergence_weight", objective.divergence_weight},
          {"disparity_weight", objective.disparity_weight}};
}

json optimize_result_to_json(const optimize::Result& result, const optimize::SearchConfig& config) {
  json trace = json::array();
  for (const auto& p : result.trace) trace.push_back({{"evaluation", p.evaluation}, {"score", p.score}});
  return {{"schema_version", kSchemaVersion},
          {"objective_note", "constructed objective: weighted unrepresented-case counts plus optional "
                             "phase-distribution divergence and mean-frame disparity terms"},
          {"score", result.score},
          {"initial_score", result.initial_score},
          {"evaluations", result.evaluations},
          {"budget", config.budget},
          {"seed", config.seed},
          {"restarts", config.restarts},
          {"assignment", assignment_to_json(result.assignment)},
          {"trace", std::move(trace)}};
}

json build_view_model(const Dataset& dataset, const SplitAssignment& assignment,
                      const stats::FilterCriteria& criteria, const coverage::CoverageOptions& options) {
  const bool hv = assignment.has_validation();
  const auto predicate = stats::filter_frames(dataset, criteria);
  const auto labels = labels_by_index(dataset, assignment);
  const auto t = stats::tally(dataset, labels, predicate);
  const auto phases = stats::phase_stats(t);
  const auto transitions = stats::transition_stats(dataset, t);
  const auto inst_phase = stats::instrument_phase_stats(t);
  const auto cooc = stats::cooccurrence_stats(t);
  const auto sizes = stats::compute_set_sizes(dataset, assignment);
  const auto report = coverage::coverage_report(dataset, assignment, options);

  json vm;
  vm["schema_version"] = kSchemaVersion;
  vm["fingerprint"] = dataset.fingerprint();
  vm["has_validation"] = hv;
  json set_names = json::array();
  for (auto s : assignment.active_sets()) set_names.push_back(std::string(to_string(s)));
  vm["sets"] = std::move(set_names);
  json phase_names = json::array();
  for (const auto& p : dataset.phases()) phase_names.push_back(p.name);
  vm["phases"] = std::move(phase_names);
  json instrument_names = json::array();
  for (const auto& i : dataset.instruments()) instrument_names.push_back(i.name);
  vm["instruments"] = std::move(instrument_names);
  vm["filter_state"] = criteria_to_json(criteria);

  json nodes = json::array();
  json frame_bars = json::array();
  for (std::size_t p = 0; p < dataset.phase_count(); ++p) {
    const auto& fc = phases.frame_count[p];
    nodes.push_back({{"phase", dataset.phase_name(static_cast<PhaseIndex>(p))},
                     {"index", p},
                     {"frames", per_set(fc, hv)},
                     {"surgery_occurrence", phases.surgery_occurrence[p]},
                     {"surgery_occurrence_by_set", per_set(phases.surgery_occurrence_by_set[p], hv)}});
    frame_bars.push_back({{"phase", dataset.phase_name(static_cast<PhaseIndex>(p))}, {"frames", fc[0] + fc[1] + fc[2]}});
  }
  json arcs = json::array();
  for (const auto& e : transitions.entries) {
    arcs.push_back({{"from", dataset.phase_name(e.transition.from)},
                    {"to", dataset.phase_name(e.transition.to)},
                    {"direction", std::string(to_string(e.transition.direction()))},
                    {"count", per_set(e.count, hv)},
                    {"total", e.count[0] + e.count[1] + e.count[2]},
                    {"surgeries", e.surgeries}});
  }
  json bars = json::array();
  for (std::size_t p = 0; p < inst_phase.phase_count; ++p) {
    for (std::size_t i = 0; i < inst_phase.instrument_count; ++i) {
      bars.push_back({{"phase", dataset.phase_name(static_cast<PhaseIndex>(p))},
                      {"instrument", dataset.instrument_name(static_cast<InstrumentIndex>(i))},
                      {"frames", per_set(inst_phase.frame_count[p * inst_phase.instrument_count + i], hv)}});
    }
  }
  vm["phase_view"] = {{"nodes", std::move(nodes)},
                      {"arcs", std::move(arcs)},
                      {"phase_frame_bars", std::move(frame_bars)},
                      {"instrument_bars", std::move(bars)}};

  json instruments = json::array();
  for (std::size_t i = 0; i < dataset.instrument_count(); ++i) {
    instruments.push_back({{"instrument", dataset.instrument_name(static_cast<InstrumentIndex>(i))},
                           {"frames", per_set(cooc.instrument_frames[i], hv)}});
  }
  json combinations = json::array();
  for (const auto& [key, counts] : cooc.combinations) {
    combinations.push_back({{"instruments", names(dataset, key.members())},
                            {"frames", per_set(counts, hv)},
                            {"total", counts[0] + counts[1] + counts[2]}});
  }
  vm["instrument_view"] = {{"instruments", std::move(instruments)},
                           {"idle", per_set(cooc.idle_frames, hv)},
                           {"total_frames", per_set(cooc.total_frames, hv)},
                           {"combinations", std::move(combinations)}};

  auto supplementary = set_sizes_to_json(sizes, assignment);
  for (std::size_t s = 0; s < dataset.surgery_count(); ++s) {
    supplementary["surgeries"][s]["filtered_frames"] = t.surgery_frames[s];
  }
  supplementary["assignment"] = assignment_to_json(assignment);
  vm["supplementary"] = std::move(supplementary);
  vm["coverage"] = coverage_to_json(dataset, report);
  return vm;
}

std::string fixed3(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", value);
  return buf;
}

}  // namespace splitaudit::json_io
