// SPDX-License-Identifier: Apache-2.0

#include "splitaudit/splits.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

namespace splitaudit {

SplitAssignment::SplitAssignment(std::map<std::string, SetLabel> labels, bool has_validation)
    : labels_(std::move(labels)), has_validation_(has_validation) {
  if (!has_validation_) {
    for (const auto& [id, set] : labels_) {
      if (set == SetLabel::Val) throw SplitError("surgery '" + id + "' is in val but the split has no validation set");
    }
  }
}

SplitAssignment SplitAssignment::from_lists(const std::vector<std::string>& train, const std::vector<std::string>& val,
                                            const std::vector<std::string>& test, bool has_validation) {
  std::map<std::string, SetLabel> labels;
  auto add = [&](const std::vector<std::string>& ids, SetLabel set) {
    for (const auto& id : ids) {
      if (!labels.emplace(id, set).second) throw SplitError("surgery '" + id + "' is listed in more than one set");
    }
  };
  add(train, SetLabel::Train);
  add(val, SetLabel::Val);
  add(test, SetLabel::Test);
  return {std::move(labels), has_validation};
}

bool SplitAssignment::contains(std::string_view id) const { return labels_.find(std::string(id)) != labels_.end(); }

SetLabel SplitAssignment::label_of(std::string_view id) const {
  auto it = labels_.find(std::string(id));
  if (it == labels_.end()) throw SplitError("unknown surgery '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::string> SplitAssignment::members(SetLabel set) const {
  std::vector<std::string> out;
  for (const auto& [id, s] : labels_) {
    if (s == set) out.push_back(id);
  }
  return out;
}

std::vector<SetLabel> SplitAssignment::active_sets() const {
  if (has_validation_) return {SetLabel::Train, SetLabel::Val, SetLabel::Test};
  return {SetLabel::Train, SetLabel::Test};
}

SplitAssignment SplitAssignment::reassign(std::string_view id, SetLabel target) const {
  auto it = labels_.find(std::string(id));
  if (it == labels_.end()) throw SplitError("unknown surgery '" + std::string(id) + "'");
  if (target == SetLabel::Val && !has_validation_) throw SplitError("split has no validation set");
  SplitAssignment copy = *this;
  copy.labels_[it->first] = target;
  return copy;
}

std::vector<SetLabel> labels_by_index(const Dataset& dataset, const SplitAssignment& assignment) {
  std::vector<SetLabel> out;
  out.reserve(dataset.surgery_count());
  for (const auto& s : dataset.surgeries()) out.push_back(assignment.label_of(s.id()));
  return out;
}

std::string cholec80_id(int number) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "video%02d", number);
  return buf;
}

namespace {

std::vector<std::string> id_range(int first, int last) {
  std::vector<std::string> out;
  for (int i = first; i <= last; ++i) out.push_back(cholec80_id(i));
  return out;
}

const std::vector<SplitPreset>& presets() {
  static const std::vector<SplitPreset> all{
      {"40/-/40", id_range(1, 40), {}, id_range(41, 80)},
      {"32/8/40", id_range(1, 32), id_range(33, 40), id_range(41, 80)},
      {"40/8/32", id_range(1, 40), id_range(41, 48), id_range(49, 80)},
      {"40/24/16", id_range(1, 40), id_range(41, 64), id_range(65, 80)},
  };
  return all;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& p : presets()) n.push_back(p.name);
    return n;
  }();
  return names;
}

const SplitPreset& preset_definition(std::string_view name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p;
  }
  throw SplitError("unknown preset '" + std::string(name) + "'");
}

SplitAssignment preset(std::string_view name) {
  const auto& p = preset_definition(name);
  return SplitAssignment::from_lists(p.train, p.val, p.test, !p.val.empty());
}

std::vector<Violation> validate(const SplitAssignment& assignment, const Dataset& dataset) {
  std::vector<Violation> out;
  for (const auto& s : dataset.surgeries()) {
    if (!assignment.contains(s.id())) out.push_back({"missing_surgery", s.id()});
  }
  for (const auto& [id, _] : assignment.labels()) {
    if (!dataset.find_surgery(id)) out.push_back({"unknown_surgery", id});
  }
  PerSet sizes{};
  for (const auto& [id, set] : assignment.labels()) {
    if (dataset.find_surgery(id)) ++sizes[set_slot(set)];
  }
  if (sizes[set_slot(SetLabel::Train)] == 0) out.push_back({"empty_set", "train"});
  if (sizes[set_slot(SetLabel::Test)] == 0) out.push_back({"empty_set", "test"});
  if (assignment.has_validation() && sizes[set_slot(SetLabel::Val)] == 0) {
    out.push_back({"empty_validation", "has_validation is true but the val set is empty"});
  }
  return out;
}

std::string to_json(const SplitAssignment& assignment) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["has_validation"] = assignment.has_validation();
  for (auto set : kAllSets) doc[std::string(to_string(set))] = assignment.members(set);
  return doc.dump(2) + "\n";
}

SplitAssignment assignment_from_json(std::string_view text) {
  try {
    auto doc = nlohmann::json::parse(text);
    auto list = [&](const char* key) {
      if (!doc.contains(key)) return std::vector<std::string>{};
      return doc.at(key).get<std::vector<std::string>>();
    };
    auto val = list("val");
    bool has_validation = doc.contains("has_validation") ? doc.at("has_validation").get<bool>() : !val.empty();
    return SplitAssignment::from_lists(list("train"), val, list("test"), has_validation);
  } catch (const nlohmann::json::exception& e) {
    throw SplitError(std::string("malformed assignment: ") + e.what());
  }
}

}  // namespace splitaudit
