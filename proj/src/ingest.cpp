// SPDX-License-Identifier: Apache-2.0

#include "splitaudit/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#ifdef SPLITAUDIT_HAVE_OPENMP
#include <omp.h>
#endif

namespace splitaudit::ingest {

namespace fs = std::filesystem;

namespace {

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Calls fn(line_number, line) for every non-blank line; line numbers are 1-based.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    fn(line_no, line);
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Frames whose number is not a multiple of `ratio` are dropped; the rest
/// are divided down to the working rate.
std::optional<std::int64_t> to_working_rate(std::int64_t frame, int ratio) {
  if (frame % ratio != 0) return std::nullopt;
  return frame / ratio;
}

struct PatternMatch {
  fs::path directory;
  std::string prefix;
  std::string suffix;
};

PatternMatch split_pattern(const fs::path& root, const std::string& pattern) {
  fs::path rel(pattern);
  auto name = rel.filename().string();
  auto star = name.find('*');
  if (star == std::string::npos || name.find('*', star + 1) != std::string::npos) {
    throw std::invalid_argument("file pattern must contain exactly one '*' in its file name: " + pattern);
  }
  return {root / rel.parent_path(), name.substr(0, star), name.substr(star + 1)};
}

std::map<std::string, fs::path> discover(const fs::path& root, const std::string& pattern) {
  auto m = split_pattern(root, pattern);
  std::map<std::string, fs::path> found;
  if (!fs::is_directory(m.directory)) return found;
  for (const auto& entry : fs::directory_iterator(m.directory)) {
    if (!entry.is_regular_file()) continue;
    auto name = entry.path().filename().string();
    if (name.size() <= m.prefix.size() + m.suffix.size()) continue;
    if (!name.starts_with(m.prefix) || !name.ends_with(m.suffix)) continue;
    found.emplace(name.substr(m.prefix.size(), name.size() - m.prefix.size() - m.suffix.size()), entry.path());
  }
  return found;
}

Dataset assemble(std::vector<std::string> phases, std::vector<std::string> instruments, std::vector<Surgery> surgeries) {
  std::sort(surgeries.begin(), surgeries.end(), [](const Surgery& a, const Surgery& b) { return a.id() < b.id(); });
  return Dataset(std::move(phases), std::move(instruments), std::move(surgeries));
}

LoadResult load_cholec80(const fs::path& root, const IngestConfig& config) {
  auto phase_files = discover(root, config.phase_pattern);
  auto tool_files = discover(root, config.tool_pattern);

  LoadReport report;
  std::vector<std::string> ids;
  for (const auto& [id, _] : phase_files) {
    if (tool_files.count(id) != 0U) {
      ids.push_back(id);
    } else {
      report.errors.push_back({id, "missing tool annotation file"});
    }
  }
  for (const auto& [id, _] : tool_files) {
    if (phase_files.count(id) == 0U) report.errors.push_back({id, "missing phase annotation file"});
  }

  struct Parsed {
    std::vector<PhaseRow> phases;
    ToolStream tools;
    std::string error;
  };
  std::vector<Parsed> parsed(ids.size());
  const auto n = static_cast<std::int64_t>(ids.size());

#ifdef SPLITAUDIT_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::int64_t k = 0; k < n; ++k) {
    auto& out = parsed[static_cast<std::size_t>(k)];
    const auto& id = ids[static_cast<std::size_t>(k)];
    try {
      out.phases = parse_phase_stream(read_file(phase_files.at(id)), config);
      out.tools = parse_tool_stream(read_file(tool_files.at(id)), config);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  }

  std::vector<std::string> instruments;
  for (const auto& p : parsed) {
    if (p.error.empty()) {
      instruments = p.tools.instruments;
      break;
    }
  }
  const auto& phases = config.phases.empty() ? cholec80_phases() : config.phases;

  std::vector<std::optional<JoinedSurgery>> joined(ids.size());
#ifdef SPLITAUDIT_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::int64_t k = 0; k < n; ++k) {
    auto& p = parsed[static_cast<std::size_t>(k)];
    if (!p.error.empty()) continue;
    try {
      joined[static_cast<std::size_t>(k)] =
          join_streams(ids[static_cast<std::size_t>(k)], p.phases, p.tools, phases, instruments);
    } catch (const std::exception& e) {
      p.error = e.what();
    }
  }

  std::vector<Surgery> surgeries;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (!parsed[k].error.empty()) {
      report.errors.push_back({ids[k], parsed[k].error});
      continue;
    }
    report.diagnostics.emplace_back(ids[k], joined[k]->diagnostics);
    surgeries.push_back(std::move(joined[k]->surgery));
  }
  std::sort(report.errors.begin(), report.errors.end(),
            [](const auto& a, const auto& b) { return a.surgery_id < b.surgery_id; });
  if (surgeries.empty()) throw StructuralError("no surgeries could be loaded from " + root.string());
  return {assemble(phases, std::move(instruments), std::move(surgeries)), std::move(report)};
}

}  // namespace

std::string_view to_string(Format f) {
  switch (f) {
    case Format::Cholec80: return "cholec80";
    case Format::GenericCsv: return "generic-csv";
    case Format::GenericJson: return "generic-json";
  }
  return "?";
}

Format parse_format(std::string_view text) {
  if (text == "cholec80") return Format::Cholec80;
  if (text == "generic-csv") return Format::GenericCsv;
  if (text == "generic-json") return Format::GenericJson;
  throw std::invalid_argument("unknown input format '" + std::string(text) + "'");
}

void IngestConfig::validate() const {
  if (phase_fps < 1 || tool_fps < 1 || target_fps < 1) throw std::invalid_argument("frame rates must be positive");
  if (phase_fps % target_fps != 0 || tool_fps % target_fps != 0) {
    throw std::invalid_argument("target fps must divide the phase and tool fps");
  }
}

const std::vector<std::string>& cholec80_phases() {
  static const std::vector<std::string> phases{
      "Preparation",          "CalotTriangleDissection", "ClippingCutting",       "GallbladderDissection",
      "GallbladderPackaging", "CleaningCoagulation",     "GallbladderRetraction",
  };
  return phases;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    auto j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<PhaseRow> parse_phase_stream(std::string_view text, const IngestConfig& config) {
  config.validate();
  const int ratio = config.phase_fps / config.target_fps;
  std::vector<PhaseRow> rows;
  bool first = true;
  std::optional<std::int64_t> previous;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    auto fields = split_fields(line);
    bool header = first && (fields.empty() || !parse_int(fields[0]));
    first = false;
    if (header) return;
    if (fields.size() != 2) {
      throw ParseError(line_no, "expected 2 columns (frame, phase), found " + std::to_string(fields.size()));
    }
    auto frame = parse_int(fields[0]);
    if (!frame || *frame < 0) throw ParseError(line_no, "invalid frame number '" + std::string(fields[0]) + "'");
    if (previous && *frame <= *previous) {
      throw StructuralError("line " + std::to_string(line_no) + ": frame numbers must be strictly increasing");
    }
    previous = frame;
    if (auto t = to_working_rate(*frame, ratio)) rows.push_back({*t, std::string(fields[1])});
  });
  return rows;
}

ToolStream parse_tool_stream(std::string_view text, const IngestConfig& config) {
  config.validate();
  const int ratio = config.tool_fps / config.target_fps;
  ToolStream out;
  bool have_header = false;
  std::optional<std::int64_t> previous;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    auto fields = split_fields(line);
    if (!have_header) {
      if (fields.size() < 2) throw ParseError(line_no, "tool header needs a frame column and instrument names");
      for (std::size_t k = 1; k < fields.size(); ++k) out.instruments.emplace_back(fields[k]);
      have_header = true;
      return;
    }
    if (fields.size() != out.instruments.size() + 1) {
      throw StructuralError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(out.instruments.size() + 1) + " columns, found " +
                            std::to_string(fields.size()));
    }
    auto frame = parse_int(fields[0]);
    if (!frame || *frame < 0) throw ParseError(line_no, "invalid frame number '" + std::string(fields[0]) + "'");
    if (previous && *frame <= *previous) {
      throw StructuralError("line " + std::to_string(line_no) + ": frame numbers must be strictly increasing");
    }
    previous = frame;
    std::vector<bool> flags;
    flags.reserve(out.instruments.size());
    for (std::size_t k = 1; k < fields.size(); ++k) {
      if (fields[k] == "1") {
        flags.push_back(true);
      } else if (fields[k] == "0") {
        flags.push_back(false);
      } else {
        throw ParseError(line_no, "invalid presence flag '" + std::string(fields[k]) + "'");
      }
    }
    if (auto t = to_working_rate(*frame, ratio)) out.rows.emplace_back(*t, std::move(flags));
  });
  if (!have_header) throw StructuralError("tool stream has no header");
  return out;
}

JoinedSurgery join_streams(std::string id, const std::vector<PhaseRow>& phases, const ToolStream& tools,
                           const std::vector<std::string>& phase_vocabulary,
                           const std::vector<std::string>& instrument_vocabulary) {
  std::unordered_map<std::string_view, PhaseIndex> phase_lookup;
  for (std::size_t p = 0; p < phase_vocabulary.size(); ++p) {
    phase_lookup.emplace(phase_vocabulary[p], static_cast<PhaseIndex>(p));
  }
  std::vector<InstrumentIndex> column_to_instrument;
  for (const auto& name : tools.instruments) {
    auto it = std::find(instrument_vocabulary.begin(), instrument_vocabulary.end(), name);
    if (it == instrument_vocabulary.end()) throw StructuralError("unknown instrument '" + name + "' in tool header");
    column_to_instrument.push_back(static_cast<InstrumentIndex>(it - instrument_vocabulary.begin()));
  }

  JoinDiagnostics diag;
  std::vector<FrameRecord> frames;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < phases.size() && j < tools.rows.size()) {
    const auto tp = phases[i].time_index;
    const auto tt = tools.rows[j].first;
    if (tp < tt) {
      ++diag.dropped_phase_only;
      ++i;
    } else if (tt < tp) {
      ++diag.dropped_tool_only;
      ++j;
    } else {
      auto it = phase_lookup.find(phases[i].phase);
      if (it == phase_lookup.end()) throw StructuralError("unknown phase '" + phases[i].phase + "'");
      FrameRecord f{tp, it->second, {}};
      const auto& flags = tools.rows[j].second;
      for (std::size_t k = 0; k < flags.size(); ++k) {
        if (flags[k]) f.instruments.insert(column_to_instrument[k]);
      }
      frames.push_back(f);
      ++i;
      ++j;
    }
  }
  diag.dropped_phase_only += static_cast<std::int64_t>(phases.size() - i);
  diag.dropped_tool_only += static_cast<std::int64_t>(tools.rows.size() - j);
  if (frames.empty()) throw StructuralError("no joinable frames");
  return {Surgery(std::move(id), std::move(frames)), diag};
}

LoadResult parse_generic_csv(std::string_view text, const IngestConfig& config) {
  config.validate();
  const int ratio = config.phase_fps / config.target_fps;

  std::vector<std::string> phases = config.phases;
  std::vector<std::string> instruments = config.instruments;
  const bool fixed_phases = !phases.empty();
  const bool fixed_instruments = !instruments.empty();
  auto index_of = [](std::vector<std::string>& vocab, std::string_view name, bool fixed) -> std::optional<std::size_t> {
    auto it = std::find(vocab.begin(), vocab.end(), name);
    if (it != vocab.end()) return static_cast<std::size_t>(it - vocab.begin());
    if (fixed) return std::nullopt;
    vocab.emplace_back(name);
    return vocab.size() - 1;
  };

  std::map<std::string, std::vector<FrameRecord>> frames_by_id;
  std::map<std::string, std::string> failed;
  std::map<std::string, std::int64_t> last_time;
  bool first = true;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
      auto comma = line.find(',', start);
      cols.push_back(trim(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    const bool header = first && cols.size() >= 2 && !parse_int(cols[1]);
    first = false;
    if (header) return;
    if (cols.size() != 3 && cols.size() != 4) {
      throw ParseError(line_no, "expected 4 columns (surgery_id,time_index,phase,instruments), found " +
                                    std::to_string(cols.size()));
    }
    std::string id(cols[0]);
    if (id.empty()) throw ParseError(line_no, "empty surgery id");
    auto time = parse_int(cols[1]);
    if (!time || *time < 0) throw ParseError(line_no, "invalid time index '" + std::string(cols[1]) + "'");
    if (failed.count(id) != 0U) return;

    auto fail = [&](const std::string& msg) {
      failed.emplace(id, "line " + std::to_string(line_no) + ": " + msg);
      frames_by_id.erase(id);
    };
    auto& frames = frames_by_id[id];
    if (auto last = last_time.find(id); last != last_time.end() && *time <= last->second) {
      fail("time indices must be strictly increasing");
      return;
    }
    last_time[id] = *time;
    auto t = to_working_rate(*time, ratio);
    if (!t) return;
    auto phase = index_of(phases, cols[2], fixed_phases);
    if (!phase) {
      fail("unknown phase '" + std::string(cols[2]) + "'");
      return;
    }
    FrameRecord f{*t, static_cast<PhaseIndex>(*phase), {}};
    if (cols.size() == 4 && !cols[3].empty()) {
      std::size_t s = 0;
      while (true) {
        auto semi = cols[3].find(';', s);
        auto name = trim(cols[3].substr(s, semi - s));
        if (!name.empty()) {
          auto inst = index_of(instruments, name, fixed_instruments);
          if (!inst || *inst >= kMaxInstruments) {
            fail("unknown instrument '" + std::string(name) + "'");
            return;
          }
          if (f.instruments.contains(static_cast<InstrumentIndex>(*inst))) {
            fail("duplicate instrument '" + std::string(name) + "'");
            return;
          }
          f.instruments.insert(static_cast<InstrumentIndex>(*inst));
        }
        if (semi == std::string_view::npos) break;
        s = semi + 1;
      }
    }
    frames.push_back(f);
  });

  LoadReport report;
  for (const auto& [id, msg] : failed) report.errors.push_back({id, msg});
  std::vector<Surgery> surgeries;
  for (auto& [id, frames] : frames_by_id) {
    if (frames.empty()) {
      report.errors.push_back({id, "no frames at the working rate"});
      continue;
    }
    surgeries.emplace_back(id, std::move(frames));
  }
  if (surgeries.empty()) throw StructuralError("no surgeries in generic CSV input");
  return {assemble(std::move(phases), std::move(instruments), std::move(surgeries)), std::move(report)};
}

Dataset parse_generic_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, e.what());
  }
  try {
    auto phases = doc.at("phases").get<std::vector<std::string>>();
    auto instruments = doc.at("instruments").get<std::vector<std::string>>();
    std::vector<Surgery> surgeries;
    for (const auto& s : doc.at("surgeries")) {
      std::vector<FrameRecord> frames;
      for (const auto& f : s.at("frames")) {
        FrameRecord rec;
        rec.time_index = f.at("t").get<std::int64_t>();
        auto phase = f.at("phase").get<std::string>();
        auto p = std::find(phases.begin(), phases.end(), phase);
        if (p == phases.end()) throw StructuralError("unknown phase '" + phase + "'");
        rec.phase = static_cast<PhaseIndex>(p - phases.begin());
        for (const auto& name : f.at("instruments")) {
          auto i = std::find(instruments.begin(), instruments.end(), name.get<std::string>());
          if (i == instruments.end()) throw StructuralError("unknown instrument '" + name.get<std::string>() + "'");
          auto idx = static_cast<InstrumentIndex>(i - instruments.begin());
          if (rec.instruments.contains(idx)) throw StructuralError("duplicate instrument in frame");
          rec.instruments.insert(idx);
        }
        frames.push_back(rec);
      }
      surgeries.emplace_back(s.at("id").get<std::string>(), std::move(frames));
    }
    return assemble(std::move(phases), std::move(instruments), std::move(surgeries));
  } catch (const nlohmann::json::exception& e) {
    throw StructuralError(std::string("generic JSON: ") + e.what());
  } catch (const ModelError& e) {
    throw StructuralError(std::string("generic JSON: ") + e.what());
  }
}

std::string write_generic_json(const Dataset& dataset) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["phases"] = nlohmann::json::array();
  for (const auto& p : dataset.phases()) doc["phases"].push_back(p.name);
  doc["instruments"] = nlohmann::json::array();
  for (const auto& i : dataset.instruments()) doc["instruments"].push_back(i.name);
  doc["surgeries"] = nlohmann::json::array();
  for (const auto& s : dataset.surgeries()) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : s.frames()) {
      frames.push_back({{"t", f.time_index},
                        {"phase", dataset.phase_name(f.phase)},
                        {"instruments", dataset.instrument_names(f.instruments)}});
    }
    doc["surgeries"].push_back({{"id", s.id()}, {"frames", std::move(frames)}});
  }
  return doc.dump() + "\n";
}

LoadResult load_dataset(const fs::path& root, const IngestConfig& config) {
  config.validate();
  switch (config.format) {
    case Format::Cholec80:
      if (!fs::is_directory(root)) throw std::runtime_error("Cholec80 root is not a directory: " + root.string());
      return load_cholec80(root, config);
    case Format::GenericJson: {
      if (!fs::is_regular_file(root)) throw std::runtime_error("generic JSON input must be a file: " + root.string());
      return {parse_generic_json(read_file(root)), {}};
    }
    case Format::GenericCsv: {
      std::string text;
      if (fs::is_directory(root)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(root)) {
          if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
          auto body = read_file(f);
          // Drop per-file header lines; the combined text gets no header.
          auto nl = body.find('\n');
          auto first_line = body.substr(0, nl);
          if (first_line.starts_with("surgery_id")) body = nl == std::string::npos ? "" : body.substr(nl + 1);
          text += body;
          if (!text.empty() && text.back() != '\n') text += '\n';
        }
      } else {
        text = read_file(root);
      }
      return parse_generic_csv(text, config);
    }
  }
  throw std::logic_error("unhandled format");
}

}  // namespace splitaudit::ingest
