#include "tpplab/events.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "tpplab/stats.hpp"

namespace tpp {

const char* to_string(Behavior b) {
  switch (b) {
    case Behavior::SIB: return "SIB";
    case Behavior::ED: return "ED";
    case Behavior::ATO: return "ATO";
  }
  return "?";
}

Behavior behavior_from_string(const std::string& s) {
  if (s == "SIB") return Behavior::SIB;
  if (s == "ED") return Behavior::ED;
  if (s == "ATO") return Behavior::ATO;
  throw std::invalid_argument("unknown behavior class: " + s);
}

EventSequence::EventSequence(std::string session_id, std::vector<double> onsets,
                             double duration_T)
    : session_id_(std::move(session_id)), onsets_(std::move(onsets)), duration_T_(duration_T) {
  if (!(duration_T_ > 0.0) || !std::isfinite(duration_T_))
    throw std::invalid_argument("EventSequence " + session_id_ + ": duration must be > 0");
  for (std::size_t i = 0; i < onsets_.size(); ++i) {
    if (!std::isfinite(onsets_[i]))
      throw std::invalid_argument("EventSequence " + session_id_ + ": non-finite onset");
    if (onsets_[i] < 0.0 || onsets_[i] >= duration_T_)
      throw std::invalid_argument("EventSequence " + session_id_ + ": onset outside [0, T)");
    if (i > 0 && onsets_[i] <= onsets_[i - 1])
      throw std::invalid_argument("EventSequence " + session_id_ +
                                  ": onsets must be strictly increasing");
  }
}

EventSequence EventSequence::unchecked(std::string session_id, std::vector<double> onsets,
                                       double duration_T) {
  EventSequence seq;
  seq.session_id_ = std::move(session_id);
  seq.onsets_ = std::move(onsets);
  seq.duration_T_ = duration_T;
  return seq;
}

std::vector<double> EventSequence::inter_onsets_from_zero() const {
  std::vector<double> gaps;
  gaps.reserve(onsets_.size());
  double prev = 0.0;
  for (double t : onsets_) {
    gaps.push_back(t - prev);
    prev = t;
  }
  return gaps;
}

std::vector<double> EventSequence::inter_onsets() const {
  std::vector<double> gaps;
  if (onsets_.size() < 2) return gaps;
  gaps.reserve(onsets_.size() - 1);
  for (std::size_t i = 1; i < onsets_.size(); ++i) gaps.push_back(onsets_[i] - onsets_[i - 1]);
  return gaps;
}

std::span<const double> EventSequence::history_before(double t) const {
  const auto it = std::lower_bound(onsets_.begin(), onsets_.end(), t);
  return {onsets_.data(), static_cast<std::size_t>(it - onsets_.begin())};
}

std::span<const double> EventSequence::history_through(double t) const {
  const auto it = std::upper_bound(onsets_.begin(), onsets_.end(), t);
  return {onsets_.data(), static_cast<std::size_t>(it - onsets_.begin())};
}

EventSequence EventSequence::truncated_history(double t) const {
  const auto h = history_through(t);
  return unchecked(session_id_, std::vector<double>(h.begin(), h.end()), duration_T_);
}

std::size_t Dataset::total_events() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.count();
  return n;
}

double Dataset::total_duration() const {
  double t = 0.0;
  for (const auto& s : sequences) t += s.duration();
  return t;
}

void Dataset::check_unique_ids() const {
  std::set<std::string> ids;
  for (const auto& s : sequences) {
    if (!ids.insert(s.session_id()).second)
      throw std::invalid_argument("duplicate session_id: " + s.session_id());
  }
}

std::vector<Tick> collapse_episodes(std::span<const RawAnnotation> annotations,
                                    const SessionRecord& session) {
  std::vector<std::pair<Tick, Tick>> spans;
  spans.reserve(annotations.size());
  for (const auto& a : annotations) {
    if (a.session_id != session.session_id)
      throw std::invalid_argument("annotation for session " + a.session_id +
                                  " passed with session " + session.session_id);
    if (a.stop < a.start)
      throw std::invalid_argument("annotation in session " + a.session_id + ": stop < start");
    if (a.start < session.session_start || a.stop > session.session_end)
      throw std::invalid_argument("annotation outside session bounds in session " +
                                  a.session_id);
    spans.emplace_back(a.start, a.stop);
  }
  std::sort(spans.begin(), spans.end());

  // Runs merge when the next positive sample is adjacent (gap of zero
  // negative samples), regardless of behavior class.
  std::vector<Tick> onsets;
  Tick run_start = 0, run_stop = 0;
  bool open = false;
  for (const auto& [start, stop] : spans) {
    if (open && start <= run_stop + 1) {
      run_stop = std::max(run_stop, stop);
    } else {
      if (open) onsets.push_back(run_start);
      run_start = start;
      run_stop = stop;
      open = true;
    }
  }
  if (open) onsets.push_back(run_start);
  return onsets;
}

EventSequence normalize_session(std::span<const Tick> onsets, const SessionRecord& session,
                                std::size_t* dedup_count) {
  if (session.session_end <= session.session_start)
    throw std::invalid_argument("session " + session.session_id + ": end <= start");
  const double T =
      static_cast<double>(session.session_end - session.session_start) / kTicksPerMinute;

  std::vector<Tick> sorted(onsets.begin(), onsets.end());
  std::sort(sorted.begin(), sorted.end());
  const auto unique_end = std::unique(sorted.begin(), sorted.end());
  if (dedup_count) *dedup_count += static_cast<std::size_t>(sorted.end() - unique_end);
  sorted.erase(unique_end, sorted.end());

  std::vector<double> minutes;
  minutes.reserve(sorted.size());
  for (Tick t : sorted) {
    if (t < session.session_start || t > session.session_end)
      throw std::invalid_argument("onset outside session bounds in session " +
                                  session.session_id);
    if (t == session.session_end) continue;  // window is [0, T)
    minutes.push_back(static_cast<double>(t - session.session_start) / kTicksPerMinute);
  }
  return EventSequence(session.session_id, std::move(minutes), T);
}

namespace {

ColumnSummary summarize(std::vector<double> col) {
  ColumnSummary s;
  s.mean = stats::mean(col);
  s.sd = col.size() > 1 ? stats::sd(col) : 0.0;
  s.median = stats::median(std::move(col));
  return s;
}

}  // namespace

ValidationReport validate_dataset(const Dataset& ds) {
  ValidationReport report;
  report.n_sequences = ds.sequences.size();

  std::set<std::string> ids;
  std::map<std::string, ParticipantRow> by_participant;
  for (const auto& seq : ds.sequences) {
    if (!ids.insert(seq.session_id()).second)
      report.violations.push_back("duplicate session_id: " + seq.session_id());
    if (!(seq.duration() > 0.0))
      report.violations.push_back(seq.session_id() + ": non-positive duration");
    const auto onsets = seq.onsets();
    for (std::size_t i = 0; i < onsets.size(); ++i) {
      if (onsets[i] < 0.0 || onsets[i] >= seq.duration()) {
        report.violations.push_back(seq.session_id() + ": onset outside [0, T)");
        break;
      }
    }
    for (std::size_t i = 1; i < onsets.size(); ++i) {
      if (onsets[i] < onsets[i - 1]) {
        report.violations.push_back(seq.session_id() + ": onsets out of order");
        break;
      }
      if (onsets[i] == onsets[i - 1]) {
        report.violations.push_back(seq.session_id() + ": duplicate onset");
        break;
      }
    }
    report.n_onsets += seq.count();
    report.total_minutes += seq.duration();

    const auto meta_it = ds.metadata.find("participant:" + seq.session_id());
    const std::string participant =
        meta_it != ds.metadata.end() ? meta_it->second : seq.session_id();
    auto& row = by_participant[participant];
    row.participant_id = participant;
    row.onsets += seq.count();
    row.sessions += 1;
    row.total_minutes += seq.duration();
  }

  std::vector<double> onset_col, session_col, minute_col, per_session_col;
  for (auto& [id, row] : by_participant) {
    row.minutes_per_session = row.total_minutes / static_cast<double>(row.sessions);
    report.rows.push_back(row);
    onset_col.push_back(static_cast<double>(row.onsets));
    session_col.push_back(static_cast<double>(row.sessions));
    minute_col.push_back(row.total_minutes);
    per_session_col.push_back(row.minutes_per_session);
  }
  if (!report.rows.empty()) {
    report.onsets_summary = summarize(std::move(onset_col));
    report.sessions_summary = summarize(std::move(session_col));
    report.minutes_summary = summarize(std::move(minute_col));
    report.minutes_per_session_summary = summarize(std::move(per_session_col));
  }
  return report;
}

}  // namespace tpp
