#include "crowdsurvey/event_log.hpp"

#include <unistd.h>

#include <array>
#include <fstream>
#include <map>
#include <sstream>

#include "crowdsurvey/config.hpp"

namespace crowdsurvey {
namespace {

constexpr std::array kAllKinds{EventKind::ParticipantRegistered, EventKind::OutcomeSet,
                               EventKind::ResponseSubmitted,     EventKind::QuestionProposed,
                               EventKind::QuestionReviewed,      EventKind::ParticipantWithdrew,
                               EventKind::ConfigChanged,         EventKind::ModelPublished};

[[noreturn]] void invalid(const std::string& why) { throw SurveyError(ErrorCode::ValidationFailed, why); }

Store& require_store(StudyState& state) {
  if (!state.store) invalid("the study has not been initialized");
  return *state.store;
}

ParticipantId participant_of(const nlohmann::ordered_json& payload) {
  return ParticipantId{payload.at("participant_id").get<std::uint64_t>()};
}

QuestionId question_of(const nlohmann::ordered_json& payload) {
  return QuestionId{payload.at("question_id").get<std::uint64_t>()};
}

std::optional<double> optional_number(const nlohmann::ordered_json& payload, const char* key) {
  if (!payload.contains(key) || payload.at(key).is_null()) return std::nullopt;
  return payload.at(key).get<double>();
}

void apply_config_changed(StudyState& state, const Event& event, bool dry_run) {
  const auto& payload = event.payload;
  if (payload.contains("initial")) {
    if (state.store) invalid("the study is already initialized");
    auto config = config_from_json(nlohmann::json::parse(payload.at("initial").dump()));
    if (!dry_run) state.store.emplace(std::move(config), event.at);
    return;
  }
  Store& store = require_store(state);
  std::optional<StudyConfig> patched;
  if (payload.contains("patch")) {
    patched = apply_config_patch(store.config(), nlohmann::json::parse(payload.at("patch").dump()));
  }
  std::vector<std::pair<QuestionId, std::optional<NumericBounds>>> bounds;
  if (payload.contains("question_bounds")) {
    for (const auto& entry : payload.at("question_bounds")) {
      std::optional<NumericBounds> b;
      if (entry.contains("bounds") && !entry.at("bounds").is_null()) {
        b = NumericBounds{entry.at("bounds").at("min").get<double>(),
                          entry.at("bounds").at("max").get<double>()};
      }
      const QuestionId qid = question_of(entry);
      store.check_set_bounds(qid, b);
      bounds.emplace_back(qid, b);
    }
  }
  if (!patched && bounds.empty()) invalid("configuration change is empty");
  if (dry_run) return;
  if (patched) store.set_config(std::move(*patched));
  for (auto& [qid, b] : bounds) store.set_question_bounds(qid, b);
}

}  // namespace

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::ParticipantRegistered: return "ParticipantRegistered";
    case EventKind::OutcomeSet: return "OutcomeSet";
    case EventKind::ResponseSubmitted: return "ResponseSubmitted";
    case EventKind::QuestionProposed: return "QuestionProposed";
    case EventKind::QuestionReviewed: return "QuestionReviewed";
    case EventKind::ParticipantWithdrew: return "ParticipantWithdrew";
    case EventKind::ConfigChanged: return "ConfigChanged";
    case EventKind::ModelPublished: return "ModelPublished";
  }
  return "?";
}

EventKind parse_event_kind(std::string_view text) {
  for (auto kind : kAllKinds) {
    if (to_string(kind) == text) return kind;
  }
  throw SurveyError(ErrorCode::CorruptLog, "unknown event kind '" + std::string(text) + "'");
}

std::string event_to_line(const Event& event) {
  nlohmann::ordered_json json;
  json["seq"] = event.seq;
  json["kind"] = to_string(event.kind);
  json["at"] = event.at;
  json["payload"] = event.payload;
  return json.dump();
}

Event event_from_line(const std::string& line) {
  try {
    const auto json = nlohmann::ordered_json::parse(line);
    Event event;
    event.seq = json.at("seq").get<std::uint64_t>();
    event.kind = parse_event_kind(json.at("kind").get<std::string>());
    event.at = json.at("at").get<Timestamp>();
    event.payload = json.at("payload");
    if (!event.payload.is_object()) throw SurveyError(ErrorCode::CorruptLog, "payload is not an object");
    return event;
  } catch (const nlohmann::json::exception& e) {
    throw SurveyError(ErrorCode::CorruptLog, std::string("malformed record: ") + e.what());
  }
}

void apply_event(StudyState& state, const Event& event, bool dry_run) {
  const auto& payload = event.payload;
  try {
    switch (event.kind) {
      case EventKind::ConfigChanged:
        apply_config_changed(state, event, dry_run);
        break;

      case EventKind::ParticipantRegistered: {
        Store& store = require_store(state);
        const ParticipantId pid = participant_of(payload);
        if (pid != store.next_participant_id()) invalid("participant id out of sequence");
        const auto outcome = optional_number(payload, "outcome");
        std::optional<std::string> token;
        if (payload.contains("token") && !payload.at("token").is_null()) {
          token = payload.at("token").get<std::string>();
          if (state.tokens.contains(*token)) invalid("duplicate participant token");
        }
        store.check_register(outcome);
        if (dry_run) break;
        store.register_participant(outcome, event.at);
        if (token) state.tokens.emplace(*token, pid);
        break;
      }

      case EventKind::OutcomeSet: {
        Store& store = require_store(state);
        const ParticipantId pid = participant_of(payload);
        const double value = payload.at("value").get<double>();
        std::optional<std::vector<std::pair<std::string, double>>> series;
        if (payload.contains("series") && !payload.at("series").is_null()) {
          series.emplace();
          for (const auto& entry : payload.at("series")) {
            series->emplace_back(entry.at(0).get<std::string>(), entry.at(1).get<double>());
          }
        }
        store.check_set_outcome(pid, value);
        if (!dry_run) store.set_outcome(pid, value, event.at, std::move(series));
        break;
      }

      case EventKind::ResponseSubmitted: {
        Store& store = require_store(state);
        const ParticipantId pid = participant_of(payload);
        const QuestionId qid = question_of(payload);
        const double value = payload.at("value").get<double>();
        store.check_submit(pid, qid, value);
        if (!dry_run) store.submit_response(pid, qid, value, event.at);
        break;
      }

      case EventKind::QuestionProposed: {
        Store& store = require_store(state);
        const ParticipantId pid = participant_of(payload);
        const QuestionId qid = question_of(payload);
        if (qid != store.next_question_id()) invalid("question id out of sequence");
        const auto draft = draft_from_json(nlohmann::json::parse(payload.at("question").dump()));
        store.check_propose(pid, draft);
        if (!dry_run) store.propose_question(pid, draft, event.at);
        break;
      }

      case EventKind::QuestionReviewed: {
        Store& store = require_store(state);
        const QuestionId qid = question_of(payload);
        const auto verdict = payload.at("verdict").get<std::string>();
        if (verdict != "approve" && verdict != "reject") invalid("verdict must be approve or reject");
        std::optional<RejectionCode> code;
        if (payload.contains("code") && !payload.at("code").is_null()) {
          code = parse_rejection_code(payload.at("code").get<std::string>());
        }
        const bool approve = verdict == "approve";
        store.check_review(qid, approve, code);
        if (!dry_run) store.apply_review(qid, approve, code, event.at);
        break;
      }

      case EventKind::ParticipantWithdrew: {
        Store& store = require_store(state);
        const ParticipantId pid = participant_of(payload);
        store.check_withdraw(pid);
        if (!dry_run) store.withdraw(pid, event.at);
        break;
      }

      case EventKind::ModelPublished: {
        require_store(state);
        auto artifact = artifact_from_json(nlohmann::json::parse(payload.at("artifact").dump()));
        if (artifact.source_seq >= event.seq && event.seq != 0) {
          invalid("artifact cannot be built from events after its publication");
        }
        if (!dry_run) state.artifacts.push_back(std::move(artifact));
        break;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string(to_string(event.kind)) + " payload: " + e.what());
  }
  if (!dry_run) state.last_seq = event.seq;
}

void replay_into(StudyState& state, std::span<const Event> events) {
  for (const auto& event : events) {
    if (event.seq != state.last_seq + 1) {
      throw SurveyError(ErrorCode::CorruptLog, "gap at seq " + std::to_string(state.last_seq + 1) +
                                                   " (found " + std::to_string(event.seq) + ")");
    }
    try {
      apply_event(state, event);
    } catch (const SurveyError& e) {
      throw SurveyError(ErrorCode::CorruptLog,
                        "seq " + std::to_string(event.seq) + " rejected: " + e.what(), e.code());
    }
  }
}

StudyState replay_log(std::span<const Event> events) {
  StudyState state;
  replay_into(state, events);
  return state;
}

bool VerifyReport::ok() const {
  for (const auto& a : artifacts) {
    if (!a.matches) return false;
  }
  return true;
}

VerifyReport verify_log(std::span<const Event> events) {
  // Published artifacts grouped by the sequence number they were built at.
  std::map<std::uint64_t, std::vector<std::size_t>> by_source;
  VerifyReport report;
  for (const auto& event : events) {
    if (event.kind != EventKind::ModelPublished) continue;
    VerifiedArtifact entry;
    entry.event_seq = event.seq;
    try {
      entry.source_seq = event.payload.at("artifact").at("source_seq").get<std::uint64_t>();
      entry.recorded = event.payload.at("artifact").dump();
    } catch (const nlohmann::json::exception& e) {
      throw SurveyError(ErrorCode::CorruptLog,
                        "seq " + std::to_string(event.seq) + " has a malformed artifact");
    }
    by_source[entry.source_seq].push_back(report.artifacts.size());
    report.artifacts.push_back(std::move(entry));
  }

  StudyState state;
  for (const auto& event : events) {
    replay_into(state, std::span(&event, 1));
    auto it = by_source.find(event.seq);
    if (it == by_source.end()) continue;
    for (auto index : it->second) {
      auto& entry = report.artifacts[index];
      try {
        const auto recorded = artifact_from_json(nlohmann::json::parse(entry.recorded));
        entry.recomputed = serialize_artifact(run_cycle(*state.store, recorded.built_at, event.seq));
      } catch (const SurveyError& e) {
        entry.recomputed = e.what();
      }
      entry.matches = entry.recomputed == entry.recorded;
    }
  }
  return report;
}

std::vector<Event> read_log(std::istream& in) {
  std::vector<Event> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    events.push_back(event_from_line(line));
  }
  return events;
}

std::vector<Event> read_log(const std::filesystem::path& path, TornTail torn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SurveyError(ErrorCode::StorageFailure, "cannot open log " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  std::vector<Event> events;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    const bool complete = end != std::string::npos;
    const std::string line = text.substr(start, complete ? end - start : std::string::npos);
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      try {
        events.push_back(event_from_line(line));
      } catch (const SurveyError&) {
        if (complete || torn == TornTail::Reject) throw;
        in.close();
        std::filesystem::resize_file(path, start);
        break;
      }
    }
    if (!complete) break;
    start = end + 1;
  }
  return events;
}

void EventLog::FileCloser::operator()(std::FILE* f) const {
  if (f) std::fclose(f);
}

EventLog::EventLog() = default;
EventLog::EventLog(EventLog&&) noexcept = default;
EventLog& EventLog::operator=(EventLog&&) noexcept = default;
EventLog::~EventLog() = default;

EventLog::EventLog(const std::filesystem::path& path, std::vector<Event> existing)
    : events_(std::move(existing)), path_(path) {
  bool needs_newline = false;
  if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
    std::ifstream in(path, std::ios::binary);
    in.seekg(-1, std::ios::end);
    needs_newline = in.get() != '\n';
  }
  file_.reset(std::fopen(path.c_str(), "ab"));
  if (!file_) throw SurveyError(ErrorCode::StorageFailure, "cannot open " + path.string() + " for append");
  if (needs_newline && std::fputc('\n', file_.get()) == EOF) {
    throw SurveyError(ErrorCode::StorageFailure, "cannot repair " + path.string());
  }
}

void EventLog::append(const Event& event) {
  if (event.seq != last_seq() + 1) {
    throw SurveyError(ErrorCode::ValidationFailed, "append out of sequence");
  }
  if (file_) {
    const std::string line = event_to_line(event) + '\n';
    if (std::fwrite(line.data(), 1, line.size(), file_.get()) != line.size() ||
        std::fflush(file_.get()) != 0 || ::fsync(::fileno(file_.get())) != 0) {
      throw SurveyError(ErrorCode::StorageFailure, "write to " + path_->string() + " failed");
    }
  }
  events_.push_back(event);
}

nlohmann::json state_snapshot(const StudyState& state) {
  nlohmann::json artifacts = nlohmann::json::array();
  for (const auto& a : state.artifacts) artifacts.push_back(nlohmann::json::parse(serialize_artifact(a)));
  nlohmann::json tokens = nlohmann::json::object();
  for (const auto& [token, pid] : state.tokens) tokens[token] = pid.value;
  return {{"seq", state.last_seq},
          {"store", state.store ? state.store->snapshot() : nlohmann::json(nullptr)},
          {"artifacts", std::move(artifacts)},
          {"tokens", std::move(tokens)}};
}

StudyState state_from_snapshot(const nlohmann::json& json) {
  try {
    StudyState state;
    state.last_seq = json.at("seq").get<std::uint64_t>();
    if (!json.at("store").is_null()) state.store = Store::restore(json.at("store"));
    for (const auto& a : json.at("artifacts")) state.artifacts.push_back(artifact_from_json(a));
    for (const auto& [token, pid] : json.at("tokens").items()) {
      state.tokens.emplace(token, ParticipantId{pid.get<std::uint64_t>()});
    }
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw SurveyError(ErrorCode::CorruptLog, std::string("malformed snapshot: ") + e.what());
  }
}

}  // namespace crowdsurvey
