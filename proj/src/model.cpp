// SPDX-License-Identifier: Apache-2.0

#include "splitaudit/model.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <unordered_set>

namespace splitaudit {

namespace {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, sizeof buf);
  }
  [[nodiscard]] std::string hex() const {
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(hash_));
    return out;
  }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::vector<InstrumentIndex> InstrumentSet::members() const {
  std::vector<InstrumentIndex> out;
  out.reserve(size());
  for (std::uint64_t b = bits_; b != 0; b &= b - 1) {
    out.push_back(static_cast<InstrumentIndex>(std::countr_zero(b)));
  }
  return out;
}

Surgery::Surgery(std::string id, std::vector<FrameRecord> frames) : id_(std::move(id)), frames_(std::move(frames)) {
  if (id_.empty()) throw ModelError("surgery id must not be empty");
  if (frames_.empty()) throw ModelError("surgery '" + id_ + "' has no frames");
  for (std::size_t i = 1; i < frames_.size(); ++i) {
    if (frames_[i].time_index <= frames_[i - 1].time_index) {
      throw ModelError("surgery '" + id_ + "': time indices not strictly increasing at frame " + std::to_string(i));
    }
  }
  if (frames_.front().time_index < 0) throw ModelError("surgery '" + id_ + "': negative time index");
}

Dataset::Dataset(std::vector<std::string> phase_names, std::vector<std::string> instrument_names,
                 std::vector<Surgery> surgeries)
    : surgeries_(std::move(surgeries)) {
  if (phase_names.empty()) throw ModelError("dataset needs at least one phase");
  if (phase_names.size() > std::numeric_limits<PhaseIndex>::max()) throw ModelError("too many phases");
  if (instrument_names.size() > kMaxInstruments) {
    throw ModelError("at most " + std::to_string(kMaxInstruments) + " instruments are supported");
  }

  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < phase_names.size(); ++i) {
    if (!seen.insert(phase_names[i]).second) throw ModelError("duplicate phase name '" + phase_names[i] + "'");
    phases_.push_back({static_cast<PhaseIndex>(i), std::move(phase_names[i])});
  }
  seen.clear();
  for (std::size_t i = 0; i < instrument_names.size(); ++i) {
    if (!seen.insert(instrument_names[i]).second) {
      throw ModelError("duplicate instrument name '" + instrument_names[i] + "'");
    }
    instruments_.push_back({static_cast<InstrumentIndex>(i), std::move(instrument_names[i])});
  }

  const std::uint64_t instrument_mask =
      instruments_.size() == kMaxInstruments ? ~std::uint64_t{0} : (std::uint64_t{1} << instruments_.size()) - 1;

  std::stable_sort(surgeries_.begin(), surgeries_.end(),
                   [](const Surgery& a, const Surgery& b) { return a.id() < b.id(); });

  for (std::size_t s = 0; s < surgeries_.size(); ++s) {
    const auto& surgery = surgeries_[s];
    if (!surgery_lookup_.emplace(surgery.id(), s).second) {
      throw ModelError("duplicate surgery id '" + surgery.id() + "'");
    }
    for (const auto& f : surgery.frames()) {
      if (f.phase >= phases_.size()) throw ModelError("surgery '" + surgery.id() + "' references unknown phase");
      if ((f.instruments.bits() & ~instrument_mask) != 0) {
        throw ModelError("surgery '" + surgery.id() + "' references unknown instrument");
      }
    }
  }

  Fnv1a h;
  h.u64(phases_.size());
  for (const auto& p : phases_) h.str(p.name);
  h.u64(instruments_.size());
  for (const auto& i : instruments_) h.str(i.name);
  h.u64(surgeries_.size());
  for (const auto& s : surgeries_) {
    h.str(s.id());
    h.u64(s.frame_count());
    for (const auto& f : s.frames()) {
      h.u64(static_cast<std::uint64_t>(f.time_index));
      h.u64(f.phase);
      h.u64(f.instruments.bits());
    }
  }
  fingerprint_ = h.hex();
}

bool operator==(const Dataset& a, const Dataset& b) {
  auto names_equal = [](const auto& x, const auto& y) {
    return std::equal(x.begin(), x.end(), y.begin(), y.end(),
                      [](const auto& l, const auto& r) { return l.name == r.name; });
  };
  return names_equal(a.phases_, b.phases_) && names_equal(a.instruments_, b.instruments_) &&
         a.surgeries_ == b.surgeries_;
}

std::int64_t Dataset::total_frames() const {
  std::int64_t n = 0;
  for (const auto& s : surgeries_) n += static_cast<std::int64_t>(s.frame_count());
  return n;
}

std::optional<PhaseIndex> Dataset::find_phase(std::string_view name) const {
  for (const auto& p : phases_) {
    if (p.name == name) return p.index;
  }
  return std::nullopt;
}

std::optional<InstrumentIndex> Dataset::find_instrument(std::string_view name) const {
  for (const auto& i : instruments_) {
    if (i.name == name) return i.index;
  }
  return std::nullopt;
}

std::optional<std::size_t> Dataset::find_surgery(std::string_view id) const {
  auto it = surgery_lookup_.find(std::string(id));
  if (it == surgery_lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Dataset::instrument_names(InstrumentSet set) const {
  std::vector<std::string> out;
  for (auto i : set.members()) out.push_back(instrument_name(i));
  return out;
}

std::string_view to_string(SetLabel s) {
  switch (s) {
    case SetLabel::Train: return "train";
    case SetLabel::Val: return "val";
    case SetLabel::Test: return "test";
  }
  return "?";
}

std::optional<SetLabel> parse_set_label(std::string_view text) {
  if (text == "train") return SetLabel::Train;
  if (text == "val" || text == "validation") return SetLabel::Val;
  if (text == "test") return SetLabel::Test;
  return std::nullopt;
}

std::string_view to_string(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

CooccurrenceKey::CooccurrenceKey(InstrumentSet members) : members_(members) {
  if (members.size() < 2) throw ModelError("co-occurrence needs at least two instruments");
}

std::vector<Transition> derive_transitions(const Surgery& surgery) {
  std::vector<Transition> out;
  const auto& frames = surgery.frames();
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].phase != frames[i - 1].phase) out.push_back({frames[i - 1].phase, frames[i].phase});
  }
  return out;
}

PhaseIndex first_phase(const Surgery& surgery) { return surgery.frames().front().phase; }

PhaseIndex last_phase(const Surgery& surgery) { return surgery.frames().back().phase; }

std::optional<CooccurrenceKey> cooccurrence_key(const FrameRecord& frame) {
  if (frame.instruments.size() < 2) return std::nullopt;
  return CooccurrenceKey(frame.instruments);
}

}  // namespace splitaudit
