// SPDX-License-Identifier: Apache-2.0

#include "splitaudit/service.hpp"

#include "splitaudit/json_io.hpp"

namespace splitaudit::service {

namespace {

json violations_to_json(const std::vector<Violation>& violations) {
  json out = json::array();
  for (const auto& v : violations) out.push_back({{"code", v.code}, {"detail", v.detail}});
  return out;
}

Response error(int status, const std::string& message, const std::vector<Violation>& violations = {}) {
  json body{{"error", message}};
  if (!violations.empty()) body["violations"] = violations_to_json(violations);
  return {status, std::move(body)};
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  return json::parse(body);
}

}  // namespace

Session::Session(std::shared_ptr<const Dataset> dataset, SplitAssignment initial, coverage::CoverageOptions options)
    : dataset_(std::move(dataset)), options_(options), baseline_(initial), assignment_(std::move(initial)) {
  if (auto v = validate(assignment_, *dataset_); !v.empty()) throw ValidationError("invalid assignment", v);
  baseline_ = assignment_;
  refresh();
}

void Session::refresh() { view_model_ = json_io::build_view_model(*dataset_, assignment_, filter_, options_); }

void Session::commit(SplitAssignment next) {
  if (next == assignment_) return;
  undo_.push_back(std::move(assignment_));
  redo_.clear();
  assignment_ = std::move(next);
  refresh();
}

void Session::set_assignment(SplitAssignment assignment) {
  if (auto v = validate(assignment, *dataset_); !v.empty()) throw ValidationError("invalid assignment", v);
  commit(std::move(assignment));
}

void Session::reassign(const std::string& surgery_id, SetLabel target) {
  if (!assignment_.contains(surgery_id)) throw NotFound("unknown surgery '" + surgery_id + "'");
  if (target == SetLabel::Val && !assignment_.has_validation()) {
    throw ValidationError("split has no validation set", {{"no_validation_set", surgery_id}});
  }
  auto next = assignment_.reassign(surgery_id, target);
  if (auto v = validate(next, *dataset_); !v.empty()) throw ValidationError("reassignment empties a set", v);
  commit(std::move(next));
}

bool Session::undo() {
  if (undo_.empty()) return false;
  redo_.push_back(std::move(assignment_));
  assignment_ = std::move(undo_.back());
  undo_.pop_back();
  refresh();
  return true;
}

bool Session::redo() {
  if (redo_.empty()) return false;
  undo_.push_back(std::move(assignment_));
  assignment_ = std::move(redo_.back());
  redo_.pop_back();
  refresh();
  return true;
}

void Session::set_filter(stats::FilterCriteria criteria) {
  (void)stats::filter_frames(*dataset_, criteria);
  filter_ = std::move(criteria);
  refresh();
}

void Session::clear_filter() {
  filter_ = {};
  refresh();
}

json Session::coverage() const {
  const auto current = coverage::coverage_report(*dataset_, assignment_, options_);
  json out = json_io::coverage_to_json(*dataset_, current);
  const bool hv = assignment_.has_validation();
  if (!undo_.empty()) {
    const auto previous = coverage::coverage_report(*dataset_, undo_.back(), options_);
    out["delta_from_previous"] = json_io::delta_to_json(*dataset_, coverage::diff_reports(previous, current), hv);
  } else {
    out["delta_from_previous"] = nullptr;
  }
  const auto base = coverage::coverage_report(*dataset_, baseline_, options_);
  out["delta_from_baseline"] = json_io::delta_to_json(*dataset_, coverage::diff_reports(base, current), hv);
  return out;
}

Service::Service(std::shared_ptr<const Dataset> dataset, SplitAssignment default_assignment,
                 coverage::CoverageOptions options)
    : dataset_(std::move(dataset)), default_assignment_(std::move(default_assignment)), options_(options) {
  if (auto v = validate(default_assignment_, *dataset_); !v.empty()) {
    throw ValidationError("default assignment does not fit the dataset", v);
  }
}

Service::~Service() { wait_for_jobs(); }

void Service::wait_for_jobs() {
  std::vector<std::thread*> workers;
  {
    std::lock_guard lock(jobs_mutex_);
    for (auto& [_, job] : jobs_) {
      if (job->worker.joinable()) workers.push_back(&job->worker);
    }
  }
  for (auto* w : workers) {
    if (w->joinable()) w->join();
  }
}

Service::SessionSlot& Service::session(const std::string& token) {
  const std::string key = token.empty() ? "default" : token;
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(key);
  if (it == sessions_.end()) {
    auto slot = std::unique_ptr<SessionSlot>(new SessionSlot{{}, Session(dataset_, default_assignment_, options_), {}});
    it = sessions_.emplace(key, std::move(slot)).first;
  }
  return *it->second;
}

Response Service::start_optimize(const std::string& token, SessionSlot& slot, const std::string& body) {
  const auto doc = parse_body(body);
  optimize::SearchConfig config;
  std::optional<SplitAssignment> initial;
  {
    std::lock_guard lock(jobs_mutex_);
    if (!slot.running_job.empty()) {
      auto it = jobs_.find(slot.running_job);
      if (it != jobs_.end() && !it->second->done.load()) {
        return error(409, "an optimization job is already running for this session");
      }
    }
  }
  const auto& current = slot.session.assignment();
  for (auto s : kAllSets) config.sizes[set_slot(s)] = static_cast<std::int64_t>(current.members(s).size());
  if (doc.contains("sizes")) {
    auto sizes = doc.at("sizes").get<std::vector<std::int64_t>>();
    if (sizes.size() != kSetCount) return error(400, "'sizes' must list train, val and test counts");
    std::copy(sizes.begin(), sizes.end(), config.sizes.begin());
  }
  config.seed = doc.value("seed", std::uint64_t{0});
  config.budget = doc.value("budget", std::int64_t{5000});
  config.restarts = doc.value("restarts", 1);
  config.sample_size = doc.value("sample_size", 64);
  config.coverage = options_;
  const auto objective =
      doc.contains("objective") ? json_io::objective_from_json(doc.at("objective")) : optimize::Objective{};
  const bool from_current = doc.value("start_from_current", true);
  if (from_current && config.has_validation() == current.has_validation()) {
    PerSet sizes{};
    for (auto s : kAllSets) sizes[set_slot(s)] = static_cast<std::int64_t>(current.members(s).size());
    if (sizes == config.sizes) initial = current;
  }
  // Surface configuration errors synchronously.
  if (config.budget < 1) return error(400, "evaluation budget must be at least 1");
  std::int64_t total = 0;
  for (auto s : config.sizes) total += s;
  if (total != static_cast<std::int64_t>(dataset_->surgery_count())) {
    return error(400, "set sizes must sum to the number of surgeries");
  }

  std::lock_guard lock(jobs_mutex_);
  auto job = std::make_unique<Job>();
  job->id = "job-" + std::to_string(next_job_++);
  job->session_token = token;
  job->config = config;
  Job* raw = job.get();
  auto dataset = dataset_;
  raw->worker = std::thread([raw, dataset, objective, initial] {
    try {
      auto result = optimize::optimize(*dataset, raw->config, objective, initial, &raw->evaluations);
      std::lock_guard l(raw->mutex);
      raw->result = json_io::optimize_result_to_json(result, raw->config);
    } catch (const std::exception& e) {
      std::lock_guard l(raw->mutex);
      raw->error = e.what();
    }
    raw->done.store(true);
  });
  slot.running_job = raw->id;
  json body_out{{"job_id", raw->id}};
  jobs_.emplace(raw->id, std::move(job));
  return {202, std::move(body_out)};
}

Response Service::job_status(const std::string& id) {
  std::lock_guard lock(jobs_mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return error(404, "unknown job '" + id + "'");
  auto& job = *it->second;
  json out{{"job_id", job.id},
           {"evaluations", job.evaluations.load()},
           {"budget", job.config.budget}};
  if (!job.done.load()) {
    out["status"] = "running";
    return {200, out};
  }
  std::lock_guard l(job.mutex);
  if (!job.error.empty()) {
    out["status"] = "failed";
    out["error"] = job.error;
  } else {
    out["status"] = "done";
    out["result"] = job.result;
  }
  return {200, out};
}

Response Service::handle(const Request& request) {
  const auto& m = request.method;
  const auto& path = request.path;
  try {
    if (m == "GET" && path == "/api/presets") {
      json presets = json::array();
      for (const auto& name : preset_names()) {
        const auto& p = preset_definition(name);
        presets.push_back({{"name", p.name}, {"train", p.train}, {"val", p.val}, {"test", p.test},
                           {"has_validation", !p.val.empty()}});
      }
      return {200, {{"schema_version", json_io::kSchemaVersion}, {"presets", std::move(presets)}}};
    }
    if (m == "GET" && path.starts_with("/api/optimize/")) return job_status(path.substr(std::string("/api/optimize/").size()));

    auto& slot = session(request.session_token);
    if (m == "POST" && path == "/api/optimize") {
      std::lock_guard lock(slot.mutex);
      return start_optimize(request.session_token, slot, request.body);
    }

    std::lock_guard lock(slot.mutex);
    auto& s = slot.session;
    if (m == "GET" && path == "/api/viewmodel") return {200, s.view_model()};
    if (m == "GET" && path == "/api/coverage") return {200, s.coverage()};
    if (m == "GET" && path == "/api/split") return {200, json_io::assignment_to_json(s.assignment())};
    if (m == "PUT" && path == "/api/split") {
      const auto doc = parse_body(request.body);
      if (doc.contains("preset")) {
        const auto name = doc.at("preset").get<std::string>();
        const auto& names = preset_names();
        if (std::find(names.begin(), names.end(), name) == names.end()) {
          return error(404, "unknown preset '" + name + "'");
        }
        s.set_assignment(preset(name));
      } else {
        s.set_assignment(assignment_from_json(request.body));
      }
      return {200, s.view_model()};
    }
    if (m == "POST" && path == "/api/split/reassign") {
      const auto doc = parse_body(request.body);
      const auto id = doc.at("surgery_id").get<std::string>();
      const auto set_name = doc.at("set").get<std::string>();
      auto target = parse_set_label(set_name);
      if (!target) return error(400, "unknown set '" + set_name + "'", {{"unknown_set", set_name}});
      s.reassign(id, *target);
      return {200, s.view_model()};
    }
    if (m == "POST" && path == "/api/split/undo") {
      s.undo();
      return {200, s.view_model()};
    }
    if (m == "POST" && path == "/api/split/redo") {
      s.redo();
      return {200, s.view_model()};
    }
    if (m == "POST" && path == "/api/filter") {
      s.set_filter(json_io::criteria_from_json(parse_body(request.body)));
      return {200, s.view_model()};
    }
    if (m == "DELETE" && path == "/api/filter") {
      s.clear_filter();
      return {200, s.view_model()};
    }
    return error(404, "no route for " + m + " " + path);
  } catch (const ValidationError& e) {
    return error(400, e.what(), e.violations());
  } catch (const NotFound& e) {
    return error(404, e.what());
  } catch (const stats::FilterError& e) {
    return error(400, e.what(), {{"invalid_filter", e.what()}});
  } catch (const SplitError& e) {
    return error(400, e.what(), {{"invalid_assignment", e.what()}});
  } catch (const optimize::OptimizeError& e) {
    return error(400, e.what(), {{"invalid_optimize_config", e.what()}});
  } catch (const json::exception& e) {
    return error(400, std::string("malformed request: ") + e.what(), {{"malformed_json", e.what()}});
  }
}

}  // namespace splitaudit::service
