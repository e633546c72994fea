// SPDX-License-Identifier: Apache-2.0
//
// Split assignments: which set each surgery belongs to.

#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "splitaudit/model.hpp"

namespace splitaudit {

class SplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable mapping surgery id -> set. A split without a validation set
/// never maps anything to Val.
class SplitAssignment {
 public:
  SplitAssignment() = default;
  /// Throws SplitError when a surgery maps to Val without a validation set.
  SplitAssignment(std::map<std::string, SetLabel> labels, bool has_validation);

  /// Builds from per-set id lists; throws SplitError on duplicates.
  static SplitAssignment from_lists(const std::vector<std::string>& train, const std::vector<std::string>& val,
                                    const std::vector<std::string>& test, bool has_validation);

  [[nodiscard]] bool has_validation() const { return has_validation_; }
  [[nodiscard]] const std::map<std::string, SetLabel>& labels() const { return labels_; }
  [[nodiscard]] std::size_t size() const { return labels_.size(); }
  [[nodiscard]] bool contains(std::string_view id) const;
  /// Throws SplitError for unknown ids.
  [[nodiscard]] SetLabel label_of(std::string_view id) const;
  [[nodiscard]] std::vector<std::string> members(SetLabel set) const;
  [[nodiscard]] std::vector<SetLabel> active_sets() const;

  /// Copy with one surgery moved. Throws SplitError for an unknown id or a
  /// Val target on a split without validation.
  [[nodiscard]] SplitAssignment reassign(std::string_view id, SetLabel target) const;

  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;

 private:
  std::map<std::string, SetLabel> labels_;
  bool has_validation_ = false;
};

/// Dense per-surgery labels aligned with dataset.surgeries(); precondition:
/// the assignment covers every surgery (throws SplitError otherwise).
[[nodiscard]] std::vector<SetLabel> labels_by_index(const Dataset& dataset, const SplitAssignment& assignment);

struct SplitPreset {
  std::string name;
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

/// Names of the built-in Cholec80 splits.
[[nodiscard]] const std::vector<std::string>& preset_names();
[[nodiscard]] const SplitPreset& preset_definition(std::string_view name);
/// Throws SplitError("unknown preset ...") for unrecognized names.
[[nodiscard]] SplitAssignment preset(std::string_view name);

/// Cholec80 surgery id for a 1-based video number ("video07").
[[nodiscard]] std::string cholec80_id(int number);

struct Violation {
  std::string code;  // missing_surgery, unknown_surgery, empty_set, empty_validation
  std::string detail;
  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Empty result means the assignment is total over the dataset, refers only
/// to known surgeries, and has non-empty train and test sets (and a
/// non-empty val set when it declares one).
[[nodiscard]] std::vector<Violation> validate(const SplitAssignment& assignment, const Dataset& dataset);

/// Assignment file: {"has_validation": bool, "train": [...], "val": [...], "test": [...]}.
[[nodiscard]] std::string to_json(const SplitAssignment& assignment);
/// Throws SplitError on malformed documents.
[[nodiscard]] SplitAssignment assignment_from_json(std::string_view text);

}  // namespace splitaudit
