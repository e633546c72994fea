// SPDX-License-Identifier: Apache-2.0
//
// Annotation ingestion: the public Cholec80 layout (phase timeline at the
// video rate, tool presence table sampled once per second) and two generic
// formats for other datasets.

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "splitaudit/model.hpp"

namespace splitaudit::ingest {

/// Malformed text: bad column count, bad number, bad flag.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed rows that break an ordering or shape rule.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Format { Cholec80, GenericCsv, GenericJson };

[[nodiscard]] std::string_view to_string(Format f);
[[nodiscard]] Format parse_format(std::string_view text);

struct IngestConfig {
  Format format = Format::Cholec80;
  /// Rate of the frame-number column in phase files.
  int phase_fps = 25;
  /// Rate of the frame-number column in tool files (Cholec80 numbers its
  /// once-per-second tool rows in video frames, so this is 25 there too).
  int tool_fps = 25;
  int target_fps = 1;
  /// Canonical phase order. Empty means the format default (Cholec80) or
  /// first-appearance order (generic formats without a vocabulary).
  std::vector<std::string> phases;
  /// Optional instrument vocabulary for generic CSV.
  std::vector<std::string> instruments;
  /// Relative paths with one '*' standing for the surgery id.
  std::string phase_pattern = "phase_annotations/*-phase.txt";
  std::string tool_pattern = "tool_annotations/*-tool.txt";

  /// Throws std::invalid_argument when a rate is non-positive or the
  /// target rate does not divide a source rate.
  void validate() const;
};

/// The seven Cholec80 phases in conceptual order.
[[nodiscard]] const std::vector<std::string>& cholec80_phases();

struct PhaseRow {
  std::int64_t time_index;
  std::string phase;
  friend bool operator==(const PhaseRow&, const PhaseRow&) = default;
};

struct ToolStream {
  std::vector<std::string> instruments;  // header order
  std::vector<std::pair<std::int64_t, std::vector<bool>>> rows;
};

/// Rows kept at the working rate: a row survives when its frame number is a
/// multiple of phase_fps / target_fps, and its index is divided by that ratio.
[[nodiscard]] std::vector<PhaseRow> parse_phase_stream(std::string_view text, const IngestConfig& config);

[[nodiscard]] ToolStream parse_tool_stream(std::string_view text, const IngestConfig& config);

struct JoinDiagnostics {
  std::int64_t dropped_phase_only = 0;
  std::int64_t dropped_tool_only = 0;
  friend bool operator==(const JoinDiagnostics&, const JoinDiagnostics&) = default;
};

struct JoinedSurgery {
  Surgery surgery;
  JoinDiagnostics diagnostics;
};

/// Inner join on time index. `phase_lookup` maps phase names to indices and
/// `instrument_map[k]` gives the vocabulary index of the tool stream's k-th
/// column. Throws StructuralError("no joinable frames") on empty overlap.
[[nodiscard]] JoinedSurgery join_streams(std::string id, const std::vector<PhaseRow>& phases, const ToolStream& tools,
                                         const std::vector<std::string>& phase_vocabulary,
                                         const std::vector<std::string>& instrument_vocabulary);

struct SurgeryLoadError {
  std::string surgery_id;
  std::string message;
};

struct LoadReport {
  std::vector<SurgeryLoadError> errors;
  std::vector<std::pair<std::string, JoinDiagnostics>> diagnostics;
};

struct LoadResult {
  Dataset dataset;
  LoadReport report;
};

/// Loads every surgery under `root` (a directory for Cholec80, a file or a
/// directory of files for the generic formats). Surgeries are sorted by id.
/// Per-surgery failures are collected in the report; zero loadable
/// surgeries throws StructuralError.
[[nodiscard]] LoadResult load_dataset(const std::filesystem::path& root, const IngestConfig& config);

/// Generic CSV: `surgery_id,time_index,phase,inst_1;...;inst_k`, header optional.
[[nodiscard]] LoadResult parse_generic_csv(std::string_view text, const IngestConfig& config);

/// Generic JSON document with explicit vocabularies; see write_generic_json.
[[nodiscard]] Dataset parse_generic_json(std::string_view text);

/// Serializes a dataset so that parse_generic_json reproduces it exactly.
[[nodiscard]] std::string write_generic_json(const Dataset& dataset);

/// Splits on tabs/spaces, drops a trailing CR.
[[nodiscard]] std::vector<std::string_view> split_fields(std::string_view line);

}  // namespace splitaudit::ingest
