#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdsurvey/engine.hpp"
#include "crowdsurvey/survey.hpp"

namespace crowdsurvey {

enum class EventKind {
  ParticipantRegistered,
  OutcomeSet,
  ResponseSubmitted,
  QuestionProposed,
  QuestionReviewed,
  ParticipantWithdrew,
  ConfigChanged,
  ModelPublished,
};

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

// One line of the log: {"seq":..,"kind":..,"at":..,"payload":{..}}.
//
// Payloads:
//   ConfigChanged          {"initial": <config>}            first event only
//                          {"patch": {...}} and/or {"question_bounds": [{question_id, bounds|null}]}
//   ParticipantRegistered  {participant_id, token?, outcome?}
//   OutcomeSet             {participant_id, value, series?: [[label, value], ...]}
//   ResponseSubmitted      {participant_id, question_id, value}
//   QuestionProposed       {participant_id, question_id, question: <draft>}
//   QuestionReviewed       {question_id, verdict: "approve"|"reject", code?, reviewer}
//   ParticipantWithdrew    {participant_id}
//   ModelPublished         {artifact: <artifact json>}
struct Event {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::ConfigChanged;
  Timestamp at = 0;
  nlohmann::ordered_json payload = nlohmann::ordered_json::object();
};

std::string event_to_line(const Event& event);
/// Throws CorruptLog on malformed records.
Event event_from_line(const std::string& line);

/// Everything replay reconstructs: the store plus the service-level state
/// that lives beside it.
struct StudyState {
  std::optional<Store> store;
  std::vector<ModelArtifact> artifacts;
  std::unordered_map<std::string, ParticipantId> tokens;
  std::uint64_t last_seq = 0;
};

/// Folds one event into the state. With `dry_run` the event is validated
/// against the state but nothing changes. Domain errors propagate as the
/// underlying SurveyError.
void apply_event(StudyState& state, const Event& event, bool dry_run = false);

/// Rebuilds state from a complete log. Throws CorruptLog on a sequence gap,
/// malformed record or an event the state rejects. An empty log gives a
/// state without a store.
StudyState replay_log(std::span<const Event> events);

/// Continues replay from an existing state (e.g. a snapshot).
void replay_into(StudyState& state, std::span<const Event> events);

struct VerifiedArtifact {
  std::uint64_t event_seq = 0;
  std::uint64_t source_seq = 0;
  bool matches = false;
  std::string recorded;
  std::string recomputed;
};

struct VerifyReport {
  std::vector<VerifiedArtifact> artifacts;
  bool ok() const;
};

/// Replays the log and recomputes every published artifact from the store
/// state at its source_seq, comparing serialized bytes. Throws CorruptLog.
VerifyReport verify_log(std::span<const Event> events);

enum class TornTail { Reject, Truncate };

/// Reads a JSON-lines log. A final line without a newline that fails to
/// parse is a torn write: rejected as CorruptLog or, with Truncate, dropped
/// from the file. Sequence continuity is checked by replay, not here.
std::vector<Event> read_log(const std::filesystem::path& path, TornTail torn = TornTail::Reject);
std::vector<Event> read_log(std::istream& in);

/// Append-only log; optionally backed by a file that is flushed and synced
/// before append returns.
class EventLog {
 public:
  EventLog();
  /// Opens (creating if needed) `path` for appending after `existing`.
  EventLog(const std::filesystem::path& path, std::vector<Event> existing);
  EventLog(EventLog&&) noexcept;
  EventLog& operator=(EventLog&&) noexcept;
  ~EventLog();

  const std::vector<Event>& events() const { return events_; }
  std::uint64_t last_seq() const { return events_.empty() ? 0 : events_.back().seq; }
  const std::optional<std::filesystem::path>& path() const { return path_; }

  /// Throws StorageFailure if the record cannot be made durable.
  void append(const Event& event);

 private:
  struct FileCloser {
    void operator()(std::FILE* f) const;
  };
  std::vector<Event> events_;
  std::optional<std::filesystem::path> path_;
  std::unique_ptr<std::FILE, FileCloser> file_;
};

nlohmann::json state_snapshot(const StudyState& state);
StudyState state_from_snapshot(const nlohmann::json& json);

}  // namespace crowdsurvey
