// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <chrono>
#include <random>
#include <thread>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "splitaudit/json_io.hpp"
#include "splitaudit/service.hpp"

namespace splitaudit::service {
namespace {

std::shared_ptr<const Dataset> demo_dataset() {
  // Phases A..D. s1 and s2 run A->B->C->D; s3 starts in B and ends D->C;
  // s4 runs A->B->D.
  auto run = [](std::vector<PhaseIndex> phases, std::vector<InstrumentSet> sets) {
    std::vector<FrameRecord> out;
    for (std::size_t k = 0; k < phases.size(); ++k) out.push_back({static_cast<std::int64_t>(k), phases[k], sets[k]});
    return out;
  };
  const auto x = InstrumentSet::of({0});
  const auto xy = InstrumentSet::of({0, 1});
  const auto yz = InstrumentSet::of({1, 2});
  return std::make_shared<const Dataset>(
      std::vector<std::string>{"A", "B", "C", "D"}, std::vector<std::string>{"x", "y", "z"},
      std::vector<Surgery>{Surgery("s1", run({0, 1, 2, 3}, {x, xy, {}, x})),
                           Surgery("s2", run({0, 1, 2, 3}, {x, x, x, {}})),
                           Surgery("s3", run({1, 2, 3, 2}, {yz, x, {}, x})),
                           Surgery("s4", run({0, 1, 3}, {xy, {}, x}))});
}

SplitAssignment demo_split() { return SplitAssignment::from_lists({"s1", "s2"}, {}, {"s3", "s4"}, false); }

Response call(Service& svc, const std::string& method, const std::string& path, const std::string& body = "",
              const std::string& token = "") {
  return svc.handle({method, path, body, token});
}

TEST(Session, ReassignUndoRedo) {
  Session s(demo_dataset(), demo_split(), {});
  const auto before = s.view_model().dump();
  s.reassign("s3", SetLabel::Train);
  EXPECT_NE(s.view_model().dump(), before);
  EXPECT_EQ(s.assignment().label_of("s3"), SetLabel::Train);
  EXPECT_TRUE(s.undo());
  EXPECT_EQ(s.view_model().dump(), before);
  EXPECT_TRUE(s.redo());
  EXPECT_EQ(s.assignment().label_of("s3"), SetLabel::Train);
  EXPECT_TRUE(s.undo());
  EXPECT_FALSE(s.undo());
  EXPECT_EQ(s.view_model().dump(), before);
}

TEST(Session, Errors) {
  Session s(demo_dataset(), demo_split(), {});
  EXPECT_THROW(s.reassign("nope", SetLabel::Train), NotFound);
  EXPECT_THROW(s.reassign("s1", SetLabel::Val), ValidationError);
  s.reassign("s1", SetLabel::Test);
  EXPECT_THROW(s.reassign("s2", SetLabel::Test), ValidationError);  // would empty train
  EXPECT_THROW(s.set_filter({{"Q"}, {}, {}, {}}), stats::FilterError);
  EXPECT_THROW(Session(demo_dataset(), SplitAssignment::from_lists({"s1"}, {}, {"s2"}, false), {}), ValidationError);
}

/// Every number in the view model equals a direct computation.
void expect_view_model_consistent(const Dataset& d, const SplitAssignment& a, const stats::FilterCriteria& c,
                                  const json& vm) {
  const auto o = oracle::full_scan(d, a, {&d, c});
  const auto cov = oracle::coverage(d, a);
  std::vector<std::string> sets;
  for (auto s : a.active_sets()) sets.emplace_back(to_string(s));
  ASSERT_EQ(vm["sets"].get<std::vector<std::string>>(), sets);
  EXPECT_EQ(vm["fingerprint"], d.fingerprint());
  for (std::size_t p = 0; p < d.phase_count(); ++p) {
    const auto& node = vm["phase_view"]["nodes"][p];
    EXPECT_EQ(node["phase"], d.phase_name(static_cast<PhaseIndex>(p)));
    std::int64_t occ = 0;
    for (auto s : a.active_sets()) {
      const auto slot = oracle::slot_of(s);
      EXPECT_EQ(node["frames"][std::string(to_string(s))], o.phase_frames[p][slot]);
      occ += o.phase_surgeries[p][slot];
    }
    EXPECT_EQ(node["surgery_occurrence"], occ);
  }
  std::size_t arc_count = 0;
  for (const auto& arc : vm["phase_view"]["arcs"]) {
    const auto from = static_cast<int>(*d.find_phase(arc["from"].get<std::string>()));
    const auto to = static_cast<int>(*d.find_phase(arc["to"].get<std::string>()));
    const auto& expected = o.transitions.at({from, to});
    for (auto s : a.active_sets()) EXPECT_EQ(arc["count"][std::string(to_string(s))], expected[oracle::slot_of(s)]);
    EXPECT_EQ(arc["direction"], to > from ? "forward" : "backward");
    EXPECT_EQ(arc["surgeries"].get<std::vector<std::string>>(), o.transition_surgeries.at({from, to}));
    ++arc_count;
  }
  EXPECT_EQ(arc_count, o.transitions.size());
  for (const auto& bar : vm["phase_view"]["instrument_bars"]) {
    const int p = *d.find_phase(bar["phase"].get<std::string>());
    const int i = *d.find_instrument(bar["instrument"].get<std::string>());
    const auto it = o.instrument_phase.find({p, i});
    for (auto s : a.active_sets()) {
      EXPECT_EQ(bar["frames"][std::string(to_string(s))],
                it == o.instrument_phase.end() ? 0 : it->second[oracle::slot_of(s)]);
    }
  }
  for (auto s : a.active_sets()) {
    const auto key = std::string(to_string(s));
    EXPECT_EQ(vm["instrument_view"]["idle"][key], o.idle[oracle::slot_of(s)]);
    EXPECT_EQ(vm["instrument_view"]["total_frames"][key], o.total[oracle::slot_of(s)]);
    for (std::size_t i = 0; i < d.instrument_count(); ++i) {
      EXPECT_EQ(vm["instrument_view"]["instruments"][i]["frames"][key], o.instrument_frames[i][oracle::slot_of(s)]);
    }
    for (int c = 0; c < 3; ++c) {
      const auto& cat = vm["coverage"]["categories"][std::string(coverage::to_string(coverage::kCategories[c]))];
      EXPECT_EQ(cat["unrepresented_count"][key], cov.unrepresented[c][oracle::slot_of(s)].size());
    }
  }
  std::size_t combos = 0;
  for (const auto& node : vm["instrument_view"]["combinations"]) {
    std::vector<int> members;
    for (const auto& name : node["instruments"]) members.push_back(*d.find_instrument(name.get<std::string>()));
    for (auto s : a.active_sets()) {
      EXPECT_EQ(node["frames"][std::string(to_string(s))], o.combinations.at(members)[oracle::slot_of(s)]);
    }
    ++combos;
  }
  std::size_t expected_combos = 0;
  for (const auto& [members, _] : o.combinations) expected_combos += members.size() >= 2 ? 1 : 0;
  EXPECT_EQ(combos, expected_combos);
  for (std::size_t s = 0; s < d.surgery_count(); ++s) {
    const auto& row = vm["supplementary"]["surgeries"][s];
    EXPECT_EQ(row["id"], d.surgeries()[s].id());
    EXPECT_EQ(row["frames"], d.surgeries()[s].frame_count());
    EXPECT_EQ(row["filtered_frames"], o.surgery_frames[s]);
  }
  EXPECT_EQ(vm["filter_state"], json_io::criteria_to_json(c));
}

TEST(ViewModel, GoldenPathEquivalence) {
  std::mt19937_64 rng(401);
  for (int round = 0; round < 60; ++round) {
    const auto d = fixtures::random_dataset(rng);
    const auto a = fixtures::random_assignment(rng, d, round % 2 == 0);
    const auto c = round % 3 == 0 ? stats::FilterCriteria{} : fixtures::random_criteria(rng, d);
    SCOPED_TRACE("round " + std::to_string(round));
    expect_view_model_consistent(d, a, c, json_io::build_view_model(d, a, c));
  }
}

TEST(Service, ViewModelStableAcrossCalls) {
  Service svc(demo_dataset(), demo_split());
  const auto a = call(svc, "GET", "/api/viewmodel");
  const auto b = call(svc, "GET", "/api/viewmodel");
  EXPECT_EQ(a.status, 200);
  EXPECT_EQ(a.body.dump(), b.body.dump());
  EXPECT_EQ(a.body["schema_version"], json_io::kSchemaVersion);
}

TEST(Service, ReassignShowsDeltaAndUndoRestores) {
  const auto d = demo_dataset();
  Service svc(d, demo_split());
  const auto before = call(svc, "GET", "/api/viewmodel").body.dump();
  // Moving s3 (starts in B, ends D->C) into train covers both there.
  const auto r = call(svc, "POST", "/api/split/reassign", R"({"surgery_id":"s3","set":"train"})");
  ASSERT_EQ(r.status, 200) << r.body.dump();
  const auto cov = call(svc, "GET", "/api/coverage").body;
  const auto& covered = cov["delta_from_previous"]["categories"]["phase_transition"]["train"]["newly_covered"];
  bool found = false;
  for (const auto& e : covered) found = found || (e["from"] == "D" && e["to"] == "C");
  EXPECT_TRUE(found) << cov.dump(2);
  EXPECT_EQ(cov["delta_from_previous"]["start_phases"]["train"]["newly_present"], json::array({"B"}));
  EXPECT_EQ(cov["delta_from_baseline"], cov["delta_from_previous"]);
  ASSERT_EQ(call(svc, "POST", "/api/split/undo").status, 200);
  EXPECT_EQ(call(svc, "GET", "/api/viewmodel").body.dump(), before);
  EXPECT_TRUE(call(svc, "GET", "/api/coverage").body["delta_from_previous"].is_null());
  ASSERT_EQ(call(svc, "POST", "/api/split/redo").status, 200);
  EXPECT_EQ(call(svc, "GET", "/api/split").body["train"], json::array({"s1", "s2", "s3"}));
}

TEST(Service, FilterByTransitionMatchesOracle) {
  const auto d = demo_dataset();
  Service svc(d, demo_split());
  const auto r = call(svc, "POST", "/api/filter", R"({"transition":["P2","P4"]})");
  ASSERT_EQ(r.status, 200) << r.body.dump();
  stats::FilterCriteria c;
  c.transition = std::pair<std::string, std::string>{"P2", "P4"};
  expect_view_model_consistent(*d, demo_split(), c, r.body);
  for (const auto& row : r.body["supplementary"]["surgeries"]) {
    const bool selected = row["id"] == "s4";
    EXPECT_EQ(row["filtered_frames"].get<std::int64_t>() > 0, selected);
  }
  const auto cleared = call(svc, "DELETE", "/api/filter");
  EXPECT_EQ(cleared.body["filter_state"], json::object());
}

TEST(Service, ErrorStatuses) {
  Service svc(demo_dataset(), demo_split());
  auto r = call(svc, "POST", "/api/split/reassign", R"({"surgery_id":"zz","set":"train"})");
  EXPECT_EQ(r.status, 404);
  r = call(svc, "POST", "/api/split/reassign", R"({"surgery_id":"s1","set":"holdout"})");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["violations"][0]["code"], "unknown_set");
  r = call(svc, "PUT", "/api/split", R"({"has_validation":false,"train":["s1"],"test":["s2"]})");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["violations"][0]["code"], "missing_surgery");
  r = call(svc, "PUT", "/api/split", R"({"preset":"99/1/0"})");
  EXPECT_EQ(r.status, 404);
  r = call(svc, "POST", "/api/filter", R"({"phases":["nope"]})");
  EXPECT_EQ(r.status, 400);
  r = call(svc, "POST", "/api/filter", R"({"colour":"red"})");
  EXPECT_EQ(r.status, 400);
  r = call(svc, "POST", "/api/filter", "{not json");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(call(svc, "GET", "/api/nothing").status, 404);
  EXPECT_EQ(call(svc, "GET", "/api/optimize/job-99").status, 404);
}

TEST(Service, PutSplitAndPresets) {
  Service svc(demo_dataset(), demo_split());
  auto r = call(svc, "PUT", "/api/split",
                R"({"has_validation":true,"train":["s1","s2"],"val":["s3"],"test":["s4"]})");
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["sets"], json::array({"train", "val", "test"}));
  const auto presets = call(svc, "GET", "/api/presets").body["presets"];
  ASSERT_EQ(presets.size(), 4U);
  EXPECT_EQ(presets[0]["name"], "40/-/40");
  // Presets name Cholec80 ids, so they do not fit this dataset.
  EXPECT_EQ(call(svc, "PUT", "/api/split", R"({"preset":"40/-/40"})").status, 400);
}

TEST(Service, SessionsAreIndependent) {
  Service svc(demo_dataset(), demo_split());
  ASSERT_EQ(call(svc, "POST", "/api/split/reassign", R"({"surgery_id":"s3","set":"train"})", "alice").status, 200);
  EXPECT_EQ(call(svc, "GET", "/api/split", "", "alice").body["train"].size(), 3U);
  EXPECT_EQ(call(svc, "GET", "/api/split", "", "bob").body["train"].size(), 2U);
  EXPECT_EQ(call(svc, "GET", "/api/split").body["train"].size(), 2U);
}

json wait_for(Service& svc, const std::string& id) {
  for (int k = 0; k < 2000; ++k) {
    auto r = call(svc, "GET", "/api/optimize/" + id);
    if (r.body["status"] != "running") return r.body;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return {};
}

TEST(Service, OptimizeJobLifecycle) {
  const auto inst = fixtures::planted_instance(9);
  auto d = std::make_shared<const Dataset>(inst.dataset);
  std::map<std::string, SetLabel> labels;
  std::size_t k = 0;
  for (const auto& s : d->surgeries()) labels.emplace(s.id(), k++ < 4 ? SetLabel::Train : (k <= 6 ? SetLabel::Val : SetLabel::Test));
  Service svc(d, SplitAssignment(labels, true));
  auto r = call(svc, "POST", "/api/optimize", R"({"seed":3,"budget":3000})");
  ASSERT_EQ(r.status, 202) << r.body.dump();
  const auto id = r.body["job_id"].get<std::string>();
  const auto done = wait_for(svc, id);
  ASSERT_EQ(done["status"], "done") << done.dump();
  EXPECT_LE(done["evaluations"].get<std::int64_t>(), 3000);
  const auto& result = done["result"];
  EXPECT_TRUE(result.contains("assignment"));
  EXPECT_TRUE(result.contains("trace"));

  EXPECT_EQ(call(svc, "POST", "/api/optimize", R"({"budget":0})").status, 400);
  EXPECT_EQ(call(svc, "POST", "/api/optimize", R"({"sizes":[1,1,1]})").status, 400);
}

TEST(Service, OptimizeConflictWhileRunning) {
  std::mt19937_64 rng(402);
  auto d = std::make_shared<const Dataset>(fixtures::random_dataset(rng, {40, 300, 7, 7}));
  const auto a = fixtures::random_assignment(rng, *d, true);
  Service svc(d, a);
  const auto first = call(svc, "POST", "/api/optimize", R"({"budget":200000,"restarts":1})");
  ASSERT_EQ(first.status, 202);
  const auto second = call(svc, "POST", "/api/optimize", R"({"budget":10})");
  const auto status = call(svc, "GET", "/api/optimize/" + first.body["job_id"].get<std::string>()).body;
  if (status["status"] == "running") {
    EXPECT_EQ(second.status, 409);
  }
  // Reads are never blocked by the job.
  EXPECT_EQ(call(svc, "GET", "/api/viewmodel").status, 200);
  svc.wait_for_jobs();
}

}  // namespace
}  // namespace splitaudit::service
