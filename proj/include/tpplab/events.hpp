#ifndef TPPLAB_EVENTS_HPP
#define TPPLAB_EVENTS_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace tpp {

// All annotation timestamps live on a 250 ms grid; one Tick = 250 ms.
using Tick = std::int64_t;
inline constexpr double kTicksPerMinute = 240.0;

enum class Behavior { SIB, ED, ATO };

const char* to_string(Behavior b);
Behavior behavior_from_string(const std::string& s);

struct RawAnnotation {
  std::string participant_id;
  std::string session_id;
  Behavior behavior = Behavior::SIB;
  Tick start = 0;  // inclusive
  Tick stop = 0;   // inclusive; stop >= start, single-sample episode has stop == start
};

struct SessionRecord {
  std::string session_id;
  std::string participant_id;
  Tick session_start = 0;
  Tick session_end = 0;  // > session_start
};

// One observation session: strictly increasing onset times in minutes on
// [0, duration_T).
class EventSequence {
 public:
  EventSequence() = default;
  EventSequence(std::string session_id, std::vector<double> onsets, double duration_T);

  // Bypasses invariant checks; for ingest-time validation reporting only.
  static EventSequence unchecked(std::string session_id, std::vector<double> onsets,
                                 double duration_T);

  const std::string& session_id() const { return session_id_; }
  std::span<const double> onsets() const { return onsets_; }
  double duration() const { return duration_T_; }
  std::size_t count() const { return onsets_.size(); }

  // Consecutive gaps between onsets, first gap measured from 0.
  std::vector<double> inter_onsets_from_zero() const;
  // Gaps between consecutive onsets only (count-1 values).
  std::vector<double> inter_onsets() const;

  // Onsets strictly before t (the left-limit history H_t-).
  std::span<const double> history_before(double t) const;
  // Onsets at or before t (H_t+).
  std::span<const double> history_through(double t) const;

  // Copy with only the onsets at or before t retained; duration unchanged.
  EventSequence truncated_history(double t) const;

 private:
  std::string session_id_;
  std::vector<double> onsets_;
  double duration_T_ = 0.0;
};

struct Dataset {
  std::vector<EventSequence> sequences;
  std::map<std::string, std::string> metadata;

  std::size_t total_events() const;
  double total_duration() const;
  void check_unique_ids() const;
};

// Superpose all behavior classes and reduce each maximal run of consecutive
// positive 250 ms samples to its left boundary. Isolated single-sample
// episodes emit their own timestamp. Output sorted and deduplicated.
std::vector<Tick> collapse_episodes(std::span<const RawAnnotation> annotations,
                                    const SessionRecord& session);

// Convert grid onsets to minutes since session start. Onsets landing exactly
// at session_end are dropped (the window is [0, T)). dedup_count reports
// duplicates removed, if requested.
EventSequence normalize_session(std::span<const Tick> onsets, const SessionRecord& session,
                                std::size_t* dedup_count = nullptr);

struct ParticipantRow {
  std::string participant_id;
  std::size_t onsets = 0;
  std::size_t sessions = 0;
  double total_minutes = 0.0;
  double minutes_per_session = 0.0;
};

struct ColumnSummary {
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
};

struct ValidationReport {
  std::size_t n_sequences = 0;
  std::size_t n_onsets = 0;
  double total_minutes = 0.0;
  std::vector<std::string> violations;
  std::vector<ParticipantRow> rows;  // Supp.-table layout, one row per participant
  ColumnSummary onsets_summary;
  ColumnSummary sessions_summary;
  ColumnSummary minutes_summary;
  ColumnSummary minutes_per_session_summary;

  bool ok() const { return violations.empty(); }
};

// Report-only: never throws on bad sequences. Participant grouping uses the
// dataset metadata key "participant:<session_id>" when present, else the
// session id itself.
ValidationReport validate_dataset(const Dataset& ds);

}  // namespace tpp

#endif
