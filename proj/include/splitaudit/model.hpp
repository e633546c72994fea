// SPDX-License-Identifier: Apache-2.0
//
// Domain types for frame-level surgical workflow annotations and the
// entities derived from them (transitions, instrument combinations).

#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace splitaudit {

using PhaseIndex = std::uint16_t;
using InstrumentIndex = std::uint16_t;

/// Upper bound on the instrument vocabulary; instrument sets are bitmasks.
inline constexpr std::size_t kMaxInstruments = 64;

/// Thrown when a value violates a structural invariant of the model.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PhaseId {
  PhaseIndex index = 0;
  std::string name;
};

struct InstrumentId {
  InstrumentIndex index = 0;
  std::string name;
};

/// Set of instruments visible in one frame, stored as a bitmask over the
/// dataset's instrument vocabulary.
class InstrumentSet {
 public:
  constexpr InstrumentSet() = default;
  constexpr explicit InstrumentSet(std::uint64_t bits) : bits_(bits) {}

  static InstrumentSet of(std::initializer_list<InstrumentIndex> members) {
    InstrumentSet s;
    for (auto m : members) s.insert(m);
    return s;
  }

  void insert(InstrumentIndex i) {
    if (i >= kMaxInstruments) throw ModelError("instrument index out of range");
    bits_ |= std::uint64_t{1} << i;
  }
  [[nodiscard]] constexpr bool contains(InstrumentIndex i) const {
    return i < kMaxInstruments && ((bits_ >> i) & 1U) != 0;
  }
  [[nodiscard]] constexpr bool contains_all(InstrumentSet other) const {
    return (bits_ & other.bits_) == other.bits_;
  }
  [[nodiscard]] constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  [[nodiscard]] constexpr bool empty() const { return bits_ == 0; }
  [[nodiscard]] constexpr std::uint64_t bits() const { return bits_; }

  /// Members in ascending index order.
  [[nodiscard]] std::vector<InstrumentIndex> members() const;

  friend constexpr bool operator==(InstrumentSet, InstrumentSet) = default;
  friend constexpr auto operator<=>(InstrumentSet a, InstrumentSet b) { return a.bits_ <=> b.bits_; }

 private:
  std::uint64_t bits_ = 0;
};

struct FrameRecord {
  std::int64_t time_index = 0;
  PhaseIndex phase = 0;
  InstrumentSet instruments;

  [[nodiscard]] bool idle() const { return instruments.empty(); }
  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

/// One annotated procedure. Frames are non-empty with strictly increasing
/// time indices; the constructor enforces both.
class Surgery {
 public:
  Surgery(std::string id, std::vector<FrameRecord> frames);

  [[nodiscard]] const std::string& id() const { return id_; }
  [[nodiscard]] const std::vector<FrameRecord>& frames() const { return frames_; }
  [[nodiscard]] std::size_t frame_count() const { return frames_.size(); }

  friend bool operator==(const Surgery&, const Surgery&) = default;

 private:
  std::string id_;
  std::vector<FrameRecord> frames_;
};

/// Vocabularies plus surgeries. Phase order is the canonical conceptual
/// order; it decides transition direction. Surgeries are kept sorted by id.
class Dataset {
 public:
  Dataset(std::vector<std::string> phase_names, std::vector<std::string> instrument_names,
          std::vector<Surgery> surgeries);

  [[nodiscard]] const std::vector<PhaseId>& phases() const { return phases_; }
  [[nodiscard]] const std::vector<InstrumentId>& instruments() const { return instruments_; }
  [[nodiscard]] const std::vector<Surgery>& surgeries() const { return surgeries_; }

  [[nodiscard]] std::size_t phase_count() const { return phases_.size(); }
  [[nodiscard]] std::size_t instrument_count() const { return instruments_.size(); }
  [[nodiscard]] std::size_t surgery_count() const { return surgeries_.size(); }
  [[nodiscard]] std::int64_t total_frames() const;

  [[nodiscard]] std::optional<PhaseIndex> find_phase(std::string_view name) const;
  [[nodiscard]] std::optional<InstrumentIndex> find_instrument(std::string_view name) const;
  [[nodiscard]] std::optional<std::size_t> find_surgery(std::string_view id) const;

  [[nodiscard]] const std::string& phase_name(PhaseIndex p) const { return phases_.at(p).name; }
  [[nodiscard]] const std::string& instrument_name(InstrumentIndex i) const { return instruments_.at(i).name; }
  [[nodiscard]] std::vector<std::string> instrument_names(InstrumentSet set) const;

  /// Content hash (FNV-1a, hex) over vocabularies and every frame.
  [[nodiscard]] const std::string& fingerprint() const { return fingerprint_; }

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  std::vector<PhaseId> phases_;
  std::vector<InstrumentId> instruments_;
  std::vector<Surgery> surgeries_;
  std::unordered_map<std::string, std::size_t> surgery_lookup_;
  std::string fingerprint_;
};

enum class SetLabel : std::uint8_t { Train = 0, Val = 1, Test = 2 };
inline constexpr std::size_t kSetCount = 3;
inline constexpr std::array<SetLabel, kSetCount> kAllSets{SetLabel::Train, SetLabel::Val, SetLabel::Test};

[[nodiscard]] constexpr std::size_t set_slot(SetLabel s) { return static_cast<std::size_t>(s); }
[[nodiscard]] std::string_view to_string(SetLabel s);
[[nodiscard]] std::optional<SetLabel> parse_set_label(std::string_view text);

/// Per-set array of counts, indexed by set_slot().
using PerSet = std::array<std::int64_t, kSetCount>;

enum class Direction : std::uint8_t { Forward, Backward };

struct Transition {
  PhaseIndex from = 0;
  PhaseIndex to = 0;

  [[nodiscard]] Direction direction() const { return to > from ? Direction::Forward : Direction::Backward; }
  friend bool operator==(const Transition&, const Transition&) = default;
  friend auto operator<=>(const Transition&, const Transition&) = default;
};

[[nodiscard]] std::string_view to_string(Direction d);

/// An exact instrument combination of at least two members.
class CooccurrenceKey {
 public:
  /// Throws ModelError when the set has fewer than two members.
  explicit CooccurrenceKey(InstrumentSet members);

  [[nodiscard]] InstrumentSet members() const { return members_; }
  friend bool operator==(const CooccurrenceKey&, const CooccurrenceKey&) = default;
  friend auto operator<=>(const CooccurrenceKey&, const CooccurrenceKey&) = default;

 private:
  InstrumentSet members_;
};

/// Phase changes between adjacent frames, in frame order.
[[nodiscard]] std::vector<Transition> derive_transitions(const Surgery& surgery);

/// Phase of the earliest frame.
[[nodiscard]] PhaseIndex first_phase(const Surgery& surgery);

/// Phase of the latest frame.
[[nodiscard]] PhaseIndex last_phase(const Surgery& surgery);

/// The frame's instrument set if it holds two or more instruments.
[[nodiscard]] std::optional<CooccurrenceKey> cooccurrence_key(const FrameRecord& frame);

}  // namespace splitaudit
