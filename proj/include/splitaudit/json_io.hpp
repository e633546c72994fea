// SPDX-License-Identifier: Apache-2.0
//
// JSON encodings shared by the CLI and the HTTP service. Every top-level
// document carries "schema_version". Per-set objects list only the active
// sets of the split, so a split without validation has no "val" keys.

#pragma once

#include <string>

#include <json.hpp>

#include "splitaudit/coverage.hpp"
#include "splitaudit/ingest.hpp"
#include "splitaudit/optimizer.hpp"
#include "splitaudit/stats.hpp"

namespace splitaudit::json_io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// {"train": a, "test": c} (plus "val" when has_validation).
[[nodiscard]] json per_set(const PerSet& values, bool has_validation);

[[nodiscard]] json entity_to_json(const Dataset& dataset, const coverage::Entity& e);
[[nodiscard]] json coverage_to_json(const Dataset& dataset, const coverage::CoverageReport& report);
[[nodiscard]] json delta_to_json(const Dataset& dataset, const coverage::ReportDelta& delta, bool has_validation);
[[nodiscard]] json set_sizes_to_json(const stats::SetSizeStats& sizes, const SplitAssignment& assignment);
[[nodiscard]] json assignment_to_json(const SplitAssignment& assignment);
[[nodiscard]] json load_report_to_json(const ingest::LoadReport& report);

/// {"phases": [...], "instruments": [...], "combination": [...], "transition": [from, to]};
/// all keys optional. Throws stats::FilterError on a malformed document.
[[nodiscard]] stats::FilterCriteria criteria_from_json(const json& doc);
[[nodiscard]] json criteria_to_json(const stats::FilterCriteria& criteria);

/// {"weights": {"phase_transition": {"train": 1, ...}, ...},
///  "divergence_weight": 0, "disparity_weight": 0}; missing keys keep defaults.
[[nodiscard]] optimize::Objective objective_from_json(const json& doc);
[[nodiscard]] json objective_to_json(const optimize::Objective& objective);
[[nodiscard]] json optimize_result_to_json(const optimize::Result& result, const optimize::SearchConfig& config);

/// Everything the explorer views draw for one (dataset, assignment, filter) state.
[[nodiscard]] json build_view_model(const Dataset& dataset, const SplitAssignment& assignment,
                                    const stats::FilterCriteria& criteria,
                                    const coverage::CoverageOptions& options = {});

/// Fixed three-decimal rendering used by text output.
[[nodiscard]] std::string fixed3(double value);

}  // namespace splitaudit::json_io
