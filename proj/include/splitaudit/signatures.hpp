// SPDX-License-Identifier: Apache-2.0
//
// Per-surgery entity signatures: for each surgery, the entities it contains
// and how often. Coverage reports aggregate them per set; the optimizer
// uses them to re-score a swap from the two surgeries involved.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "splitaudit/coverage.hpp"

namespace splitaudit::coverage {

using EntityIndex = std::uint32_t;

struct EntityTable {
  std::vector<Entity> entities;  // dataset-wide universe, ascending (category-major)
  /// [surgery] -> (entity index, occurrences) ascending by entity index.
  std::vector<std::vector<std::pair<EntityIndex, std::int64_t>>> signatures;
  std::vector<PhaseIndex> first_phases;
  std::vector<PhaseIndex> last_phases;

  [[nodiscard]] EntityCategory category_of(EntityIndex e) const { return entities[e].category; }
};

[[nodiscard]] EntityTable build_entity_table(const Dataset& dataset, const CoverageOptions& options = {});

}  // namespace splitaudit::coverage
