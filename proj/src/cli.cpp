// SPDX-License-Identifier: Apache-2.0

#include "splitaudit/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "splitaudit/coverage.hpp"
#include "splitaudit/http.hpp"
#include "splitaudit/ingest.hpp"
#include "splitaudit/json_io.hpp"
#include "splitaudit/optimizer.hpp"
#include "splitaudit/service.hpp"
#include "splitaudit/splits.hpp"
#include "splitaudit/stats.hpp"

namespace splitaudit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// I/O or parse failure; maps to exit code 1.
struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Assignment or configuration rejected; maps to exit code 2.
struct ValidationFailure : std::runtime_error {
  ValidationFailure(const std::string& what, std::vector<Violation> v)
      : std::runtime_error(what), violations(std::move(v)) {}
  std::vector<Violation> violations;
};

struct IngestOptions {
  std::string data;
  std::string input_format = "cholec80";
  int phase_fps = 25;
  int tool_fps = 25;
  int target_fps = 1;
  std::vector<std::string> phases;
  std::vector<std::string> instruments;
  std::string phase_pattern = "phase_annotations/*-phase.txt";
  std::string tool_pattern = "tool_annotations/*-tool.txt";
  std::size_t min_combination_size = 2;

  void attach(CLI::App& app) {
    app.add_option("--data", data, "Annotation root (directory or file)")->required();
    app.add_option("--input-format", input_format, "cholec80 | generic-csv | generic-json")
        ->check(CLI::IsMember({"cholec80", "generic-csv", "generic-json"}));
    app.add_option("--phase-fps", phase_fps, "Rate of the phase files' frame column");
    app.add_option("--tool-fps", tool_fps, "Rate of the tool files' frame column");
    app.add_option("--target-fps", target_fps, "Working frame rate");
    app.add_option("--phases", phases, "Canonical phase order (comma separated)")->delimiter(',');
    app.add_option("--instruments", instruments, "Instrument vocabulary for generic CSV")->delimiter(',');
    app.add_option("--phase-pattern", phase_pattern, "Phase file pattern, '*' is the surgery id");
    app.add_option("--tool-pattern", tool_pattern, "Tool file pattern, '*' is the surgery id");
    app.add_option("--min-combination-size", min_combination_size,
                   "Smallest instrument set counted as a combination")
        ->check(CLI::Range(1, 64));
  }

  [[nodiscard]] coverage::CoverageOptions coverage() const { return {min_combination_size}; }

  ingest::LoadResult load(std::ostream& err) const {
    ingest::IngestConfig config;
    config.format = ingest::parse_format(input_format);
    config.phase_fps = phase_fps;
    config.tool_fps = tool_fps;
    config.target_fps = target_fps;
    config.phases = phases;
    config.instruments = instruments;
    config.phase_pattern = phase_pattern;
    config.tool_pattern = tool_pattern;
    try {
      auto result = ingest::load_dataset(data, config);
      for (const auto& e : result.report.errors) err << "warning: skipped " << e.surgery_id << ": " << e.message << '\n';
      return result;
    } catch (const std::invalid_argument& e) {
      throw ValidationFailure(e.what(), {{"invalid_ingest_config", e.what()}});
    } catch (const std::exception& e) {
      throw IoFailure(e.what());
    }
  }
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot write " + path);
  f << text;
  if (!f) throw IoFailure("cannot write " + path);
}

/// A preset name, or a path to an assignment file.
SplitAssignment load_split(const std::string& spec) {
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), spec) != names.end()) return preset(spec);
  if (!fs::exists(spec)) throw IoFailure("split '" + spec + "' is neither a preset nor a file");
  try {
    return assignment_from_json(read_text(spec));
  } catch (const SplitError& e) {
    throw IoFailure(spec + ": " + e.what());
  }
}

void require_valid(const SplitAssignment& assignment, const Dataset& dataset) {
  if (auto v = validate(assignment, dataset); !v.empty()) throw ValidationFailure("invalid assignment", std::move(v));
}

/// First half train, second half test, by sorted surgery id.
SplitAssignment halves(const Dataset& dataset) {
  std::map<std::string, SetLabel> labels;
  const auto n = dataset.surgery_count();
  for (std::size_t s = 0; s < n; ++s) {
    labels.emplace(dataset.surgeries()[s].id(), s < (n + 1) / 2 ? SetLabel::Train : SetLabel::Test);
  }
  return {std::move(labels), false};
}

std::string split_display_name(const std::string& spec) {
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), spec) != names.end()) return spec;
  return fs::path(spec).stem().string();
}

std::string audit_text(const Dataset& dataset, const coverage::CoverageReport& report,
                       const stats::SetSizeStats& sizes, const SplitAssignment& assignment, const std::string& name) {
  std::ostringstream out;
  out << "Unrepresented cases\n" << coverage::render_table(report, name) << "\nSet sizes\n";
  for (auto s : assignment.active_sets()) {
    const auto slot = set_slot(s);
    out << "  " << to_string(s) << ": " << sizes.surgery_count[slot] << " surgeries, " << sizes.frame_count[slot]
        << " frames, mean " << (sizes.mean_frames[slot] ? json_io::fixed3(*sizes.mean_frames[slot]) : "n/a")
        << " frames/surgery\n";
  }
  bool any_start = false;
  for (const auto& b : report.start_phases) {
    if (!any_start) out << "\nStart phases\n";
    any_start = true;
    out << "  " << dataset.phase_name(b.phase) << ":";
    for (auto s : assignment.active_sets()) out << ' ' << to_string(s) << '=' << b.surgery_count[set_slot(s)];
    out << '\n';
  }
  return out.str();
}

int cmd_audit(const IngestOptions& io, const std::string& split, const std::string& output, const std::string& format,
              std::ostream& out, std::ostream& err) {
  auto loaded = io.load(err);
  const auto& dataset = loaded.dataset;
  const auto assignment = load_split(split);
  require_valid(assignment, dataset);
  const auto report = coverage::coverage_report(dataset, assignment, io.coverage());
  const auto sizes = stats::compute_set_sizes(dataset, assignment);
  if (format == "text-table") {
    write_text(output, audit_text(dataset, report, sizes, assignment, split_display_name(split)), out);
  } else {
    json doc;
    doc["schema_version"] = json_io::kSchemaVersion;
    doc["split"] = split_display_name(split);
    doc["fingerprint"] = dataset.fingerprint();
    doc["surgery_count"] = dataset.surgery_count();
    doc["frame_count"] = dataset.total_frames();
    doc["assignment"] = json_io::assignment_to_json(assignment);
    doc["coverage"] = json_io::coverage_to_json(dataset, report);
    doc["set_sizes"] = json_io::set_sizes_to_json(sizes, assignment);
    doc["load_report"] = json_io::load_report_to_json(loaded.report);
    write_text(output, doc.dump(2) + "\n", out);
  }
  return kExitOk;
}

struct OptimizeOptions {
  std::vector<std::int64_t> sizes;
  std::uint64_t seed = 0;
  std::int64_t budget = 5000;
  int restarts = 1;
  std::string objective;
  std::string initial;
  std::string output;
  std::string trace;
};

int cmd_optimize(const IngestOptions& io, const OptimizeOptions& opt, std::ostream& out, std::ostream& err) {
  auto loaded = io.load(err);
  const auto& dataset = loaded.dataset;

  std::optional<SplitAssignment> initial;
  if (!opt.initial.empty()) {
    initial = load_split(opt.initial);
    require_valid(*initial, dataset);
  }
  optimize::SearchConfig config;
  config.seed = opt.seed;
  config.budget = opt.budget;
  config.restarts = opt.restarts;
  config.coverage = io.coverage();
  if (!opt.sizes.empty()) {
    if (opt.sizes.size() != kSetCount) {
      throw ValidationFailure("--sizes needs train,val,test", {{"invalid_sizes", "expected three counts"}});
    }
    std::copy(opt.sizes.begin(), opt.sizes.end(), config.sizes.begin());
  } else if (initial) {
    for (auto s : kAllSets) config.sizes[set_slot(s)] = static_cast<std::int64_t>(initial->members(s).size());
  } else {
    throw ValidationFailure("either --sizes or --initial is required", {{"invalid_sizes", "no sizes given"}});
  }

  optimize::Objective objective;
  try {
    if (!opt.objective.empty()) objective = json_io::objective_from_json(json::parse(read_text(opt.objective)));
  } catch (const json::exception& e) {
    throw IoFailure(opt.objective + ": " + e.what());
  }

  optimize::Result result;
  try {
    result = optimize::optimize(dataset, config, objective, initial);
  } catch (const optimize::OptimizeError& e) {
    throw ValidationFailure(e.what(), {{"invalid_optimize_config", e.what()}});
  }

  write_text(opt.output, to_json(result.assignment), out);
  std::ostringstream trace;
  trace << "evaluation,score\n";
  for (const auto& p : result.trace) trace << p.evaluation << ',' << json_io::fixed3(p.score) << '\n';
  write_text(opt.trace, trace.str(), out);
  if (opt.output != "-" && opt.trace != "-") {
    out << "objective: constructed (weighted unrepresented cases + optional divergence/disparity terms)\n"
        << "initial score " << json_io::fixed3(result.initial_score) << ", best score " << json_io::fixed3(result.score)
        << " after " << result.evaluations << " evaluations\n";
  }
  return kExitOk;
}

int cmd_export(const IngestOptions& io, const std::string& split, const std::string& filter, const std::string& output,
               std::ostream& out, std::ostream& err) {
  auto loaded = io.load(err);
  const auto& dataset = loaded.dataset;
  const auto assignment = split.empty() ? halves(dataset) : load_split(split);
  require_valid(assignment, dataset);
  stats::FilterCriteria criteria;
  if (!filter.empty()) {
    try {
      criteria = json_io::criteria_from_json(json::parse(read_text(filter)));
      (void)stats::filter_frames(dataset, criteria);
    } catch (const json::exception& e) {
      throw IoFailure(filter + ": " + e.what());
    } catch (const stats::FilterError& e) {
      throw ValidationFailure(e.what(), {{"invalid_filter", e.what()}});
    }
  }
  write_text(output, json_io::build_view_model(dataset, assignment, criteria, io.coverage()).dump(2) + "\n", out);
  return kExitOk;
}

int cmd_serve(const IngestOptions& io, const std::string& split, const std::string& host, int port, std::ostream& out,
              std::ostream& err) {
  auto loaded = io.load(err);
  auto dataset = std::make_shared<const Dataset>(std::move(loaded.dataset));
  const auto assignment = split.empty() ? halves(*dataset) : load_split(split);
  require_valid(assignment, *dataset);
  service::Service svc(dataset, assignment, io.coverage());
  out << "serving " << dataset->surgery_count() << " surgeries on http://" << host << ':' << port << std::endl;
  try {
    service::serve_http(svc, host, port);
  } catch (const std::runtime_error& e) {
    throw IoFailure(e.what());
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Audit dataset splits of surgical workflow annotations", "splitaudit"};
  app.require_subcommand(1);

  IngestOptions io;
  std::string split;
  std::string output = "-";
  std::string format = "json";
  std::string filter;
  std::string host = "127.0.0.1";
  int port = 0;
  OptimizeOptions opt;

  auto* audit = app.add_subcommand("audit", "Report unrepresented cases and set sizes for a split");
  io.attach(*audit);
  audit->add_option("--split", split, "Preset name (40/-/40, 32/8/40, 40/8/32, 40/24/16) or assignment file")
      ->required();
  audit->add_option("--output,-o", output, "Output path, '-' for stdout");
  audit->add_option("--format", format, "json | text-table")->check(CLI::IsMember({"json", "text-table"}));

  auto* optimize_cmd = app.add_subcommand("optimize", "Search for a split with fewer unrepresented cases");
  io.attach(*optimize_cmd);
  optimize_cmd->add_option("--sizes", opt.sizes, "Surgeries per set: train,val,test")->delimiter(',');
  optimize_cmd->add_option("--seed", opt.seed, "Random seed");
  optimize_cmd->add_option("--budget", opt.budget, "Objective evaluations");
  optimize_cmd->add_option("--restarts", opt.restarts, "Independent search chains");
  optimize_cmd->add_option("--objective", opt.objective, "Objective weights JSON file");
  optimize_cmd->add_option("--initial", opt.initial, "Starting split (preset or assignment file)");
  optimize_cmd->add_option("--output,-o", opt.output, "Best assignment (JSON)")->required();
  optimize_cmd->add_option("--trace", opt.trace, "Improvement trace (CSV)")->required();

  auto* export_cmd = app.add_subcommand("export-viewmodel", "Write the explorer view model as JSON");
  io.attach(*export_cmd);
  export_cmd->add_option("--split", split, "Preset name or assignment file (default: halves by id)");
  export_cmd->add_option("--filter", filter, "Filter criteria JSON file");
  export_cmd->add_option("--output,-o", output, "Output path, '-' for stdout");

  auto* serve = app.add_subcommand("serve", "Run the HTTP/JSON service");
  io.attach(*serve);
  serve->add_option("--split", split, "Initial split (default: halves by id)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (default: $SPLITAUDIT_PORT or 8080)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIoError;
  }

  try {
    if (audit->parsed()) return cmd_audit(io, split, output, format, out, err);
    if (optimize_cmd->parsed()) return cmd_optimize(io, opt, out, err);
    if (export_cmd->parsed()) return cmd_export(io, split, filter, output, out, err);
    if (serve->parsed()) {
      if (port == 0) {
        const char* env = std::getenv("SPLITAUDIT_PORT");
        port = env != nullptr ? std::atoi(env) : 8080;
      }
      return cmd_serve(io, split, host, port, out, err);
    }
  } catch (const ValidationFailure& e) {
    err << "error: " << e.what() << '\n';
    for (const auto& v : e.violations) err << "violation: " << v.code << ' ' << v.detail << '\n';
    return kExitValidation;
  } catch (const IoFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitIoError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIoError;
  }
  return kExitIoError;
}

}  // namespace splitaudit::cli
