// SPDX-License-Identifier: Apache-2.0
//
// Session state (current split, filter, undo/redo) and the JSON request
// router behind the HTTP service. The router is transport-independent so it
// can be exercised without sockets; serve_http() binds it to cpp-httplib.

#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "splitaudit/coverage.hpp"
#include "splitaudit/optimizer.hpp"
#include "splitaudit/splits.hpp"
#include "splitaudit/stats.hpp"

namespace splitaudit::service {

using nlohmann::json;

/// Raised for rejected assignments or filters; carries the violation list.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& what, std::vector<Violation> violations)
      : std::runtime_error(what), violations_(std::move(violations)) {}
  [[nodiscard]] const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One user's working state. The view model is recomputed on every mutation.
/// Not thread-safe on its own; the Service serializes access per session.
class Session {
 public:
  Session(std::shared_ptr<const Dataset> dataset, SplitAssignment initial, coverage::CoverageOptions options);

  [[nodiscard]] const SplitAssignment& assignment() const { return assignment_; }
  [[nodiscard]] const stats::FilterCriteria& filter() const { return filter_; }
  [[nodiscard]] const json& view_model() const { return view_model_; }
  [[nodiscard]] bool can_undo() const { return !undo_.empty(); }
  [[nodiscard]] bool can_redo() const { return !redo_.empty(); }

  /// Throws ValidationError when the assignment does not fit the dataset.
  void set_assignment(SplitAssignment assignment);
  /// Throws NotFound for unknown surgeries, ValidationError for a Val
  /// target on a split without validation.
  void reassign(const std::string& surgery_id, SetLabel target);
  bool undo();
  bool redo();
  /// Throws stats::FilterError for unresolvable criteria.
  void set_filter(stats::FilterCriteria criteria);
  void clear_filter();

  /// Coverage report plus deltas against the previous assignment and the
  /// session's starting assignment.
  [[nodiscard]] json coverage() const;

 private:
  void commit(SplitAssignment next);
  void refresh();

  std::shared_ptr<const Dataset> dataset_;
  coverage::CoverageOptions options_;
  SplitAssignment baseline_;
  SplitAssignment assignment_;
  stats::FilterCriteria filter_;
  std::vector<SplitAssignment> undo_;
  std::vector<SplitAssignment> redo_;
  json view_model_;
};

struct Request {
  std::string method;
  std::string path;
  std::string body;
  std::string session_token;  // empty selects the default session
};

struct Response {
  int status = 200;
  json body;
};

/// Routes API requests. Safe for concurrent use: sessions are guarded by
/// their own mutexes and optimizer jobs run on background threads.
class Service {
 public:
  Service(std::shared_ptr<const Dataset> dataset, SplitAssignment default_assignment,
          coverage::CoverageOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  [[nodiscard]] Response handle(const Request& request);

  /// Blocks until every optimizer job has finished.
  void wait_for_jobs();

 private:
  struct SessionSlot {
    std::mutex mutex;
    Session session;
    std::string running_job;
  };
  struct Job {
    std::string id;
    std::string session_token;
    optimize::SearchConfig config;
    std::atomic<std::int64_t> evaluations{0};
    std::atomic<bool> done{false};
    std::mutex mutex;
    json result;
    std::string error;
    std::thread worker;
  };

  SessionSlot& session(const std::string& token);
  Response start_optimize(const std::string& token, SessionSlot& slot, const std::string& body);
  Response job_status(const std::string& id);

  std::shared_ptr<const Dataset> dataset_;
  SplitAssignment default_assignment_;
  coverage::CoverageOptions options_;

  std::mutex sessions_mutex_;
  std::map<std::string, std::unique_ptr<SessionSlot>> sessions_;
  std::mutex jobs_mutex_;
  std::map<std::string, std::unique_ptr<Job>> jobs_;
  std::uint64_t next_job_ = 1;
};

}  // namespace splitaudit::service
