#include "crowdsurvey/study.hpp"

#include <chrono>
#include <fstream>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "crowdsurvey/config.hpp"

namespace crowdsurvey {
namespace {

std::string random_token() {
  std::random_device device;
  std::uint64_t hi = (static_cast<std::uint64_t>(device()) << 32) | device();
  std::uint64_t lo = (static_cast<std::uint64_t>(device()) << 32) | device();
  return fmt::format("{:016x}{:016x}", hi, lo);
}

template <typename T>
nlohmann::json optional_json(const std::optional<T>& value) {
  return value ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

}  // namespace

Timestamp wall_clock_now() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

nlohmann::json question_to_json(const Question& q) {
  nlohmann::json json{{"question_id", q.id.value},
                      {"text", q.text},
                      {"kind", to_string(q.kind)},
                      {"status", to_string(q.status)},
                      {"posted_at", q.posted_at},
                      {"author_id", q.author_id.value},
                      {"is_seed", q.is_seed}};
  if (q.bounds) json["bounds"] = {{"min", q.bounds->min}, {"max", q.bounds->max}};
  if (q.rejection_code) json["rejection_code"] = to_string(*q.rejection_code);
  return json;
}

nlohmann::json summary_to_json(const ParticipantSummary& summary) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : summary.rows) {
    rows.push_back({{"question_id", row.question_id.value},
                    {"text", row.text},
                    {"kind", to_string(row.kind)},
                    {"own_answer", optional_json(row.own_answer)},
                    {"lower_group_mean", optional_json(row.lower_group_mean)},
                    {"upper_group_mean", optional_json(row.upper_group_mean)},
                    {"predictive_power", optional_json(row.predictive_power)}});
  }
  nlohmann::json rejected = nlohmann::json::array();
  for (const auto& r : summary.rejected_proposals) {
    rejected.push_back(
        {{"question_id", r.question_id.value}, {"text", r.text}, {"rejection_code", to_string(r.code)}});
  }
  // predicted_outcome and model_built_at stay absent until a model exists.
  nlohmann::json json{{"participant_id", summary.participant_id.value},
                      {"actual_outcome", optional_json(summary.actual_outcome)}};
  if (summary.predicted_outcome) json["predicted_outcome"] = *summary.predicted_outcome;
  if (summary.model_built_at) json["model_built_at"] = *summary.model_built_at;
  json.update(nlohmann::json{
      {"lower_group", {{"size", summary.lower_group_size},
                       {"mean_outcome", optional_json(summary.lower_mean_outcome)}}},
      {"upper_group", {{"size", summary.upper_group_size},
                       {"mean_outcome", optional_json(summary.upper_mean_outcome)}}},
      {"questions", std::move(rows)},
      {"rejected_proposals", std::move(rejected)}});
  return json;
}

nlohmann::json decision_to_json(const OrderingDecision& decision, const Store& store) {
  nlohmann::json questions = nlohmann::json::array();
  for (auto qid : decision.question_ids) {
    const auto& q = store.question(qid);
    nlohmann::json entry{{"question_id", q.id.value}, {"text", q.text}, {"kind", to_string(q.kind)}};
    if (q.bounds) entry["bounds"] = {{"min", q.bounds->min}, {"max", q.bounds->max}};
    questions.push_back(std::move(entry));
  }
  return {{"questions", std::move(questions)},
          {"strategy", to_string(decision.strategy)},
          {"budget", optional_json(decision.budget)}};
}

Study::Study(const StudyConfig& config, StudyOptions options) : options_(std::move(options)) {
  load(config);
}

Study::Study(StudyOptions options) : options_(std::move(options)) { load(std::nullopt); }

void Study::load(const std::optional<StudyConfig>& config) {
  clock_ = options_.clock ? options_.clock : Clock(wall_clock_now);
  if (!options_.token_source) options_.token_source = random_token;

  std::vector<Event> events;
  if (options_.log_path && std::filesystem::exists(*options_.log_path)) {
    events = read_log(*options_.log_path, TornTail::Truncate);
  }
  if (options_.snapshot_path && std::filesystem::exists(*options_.snapshot_path)) {
    std::ifstream in(*options_.snapshot_path);
    state_ = state_from_snapshot(nlohmann::json::parse(in));
    const std::uint64_t logged = events.empty() ? 0 : events.back().seq;
    if (state_.last_seq > logged) {
      throw SurveyError(ErrorCode::CorruptLog, "snapshot is ahead of the event log");
    }
    std::vector<Event> tail;
    for (const auto& e : events) {
      if (e.seq > state_.last_seq) tail.push_back(e);
    }
    replay_into(state_, tail);
  } else {
    state_ = replay_log(events);
  }

  log_ = options_.log_path ? EventLog(*options_.log_path, std::move(events)) : EventLog();
  if (!state_.store) {
    if (!config) throw SurveyError(ErrorCode::InvalidConfig, "no study log and no configuration given");
    config->validate();
    append_locked(EventKind::ConfigChanged, {{"initial", config_to_json(*config)}});
  }
  if (!state_.artifacts.empty()) {
    publish_current(std::make_shared<const ModelArtifact>(state_.artifacts.back()));
  }
}

std::uint64_t Study::append_event(EventKind kind, nlohmann::ordered_json payload) {
  std::unique_lock lock(state_mutex_);
  return append_locked(kind, std::move(payload));
}

std::uint64_t Study::append_locked(EventKind kind, nlohmann::ordered_json payload) {
  Event event;
  event.seq = log_.last_seq() + 1;
  event.kind = kind;
  event.at = clock_();
  event.payload = std::move(payload);
  try {
    apply_event(state_, event, true);
  } catch (const SurveyError& e) {
    throw SurveyError(ErrorCode::ValidationFailed, e.detail(), e.code());
  }
  log_.append(event);
  apply_event(state_, event);
  if (kind == EventKind::ModelPublished) {
    publish_current(std::make_shared<const ModelArtifact>(state_.artifacts.back()));
  }
  if (options_.snapshot_every > 0 && options_.snapshot_path &&
      event.seq % options_.snapshot_every == 0) {
    write_snapshot_locked();
  }
  return event.seq;
}

void Study::write_snapshot() const {
  if (!options_.snapshot_path) return;
  std::shared_lock lock(state_mutex_);
  write_snapshot_locked();
}

void Study::write_snapshot_locked() const {
  const auto tmp = options_.snapshot_path->string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << state_snapshot(state_).dump();
    if (!out) throw SurveyError(ErrorCode::StorageFailure, "cannot write snapshot " + tmp);
  }
  std::filesystem::rename(tmp, *options_.snapshot_path);
}

void Study::publish_current(std::shared_ptr<const ModelArtifact> artifact) {
  std::lock_guard lock(current_mutex_);
  current_ = std::move(artifact);
}

std::shared_ptr<const ModelArtifact> Study::current_artifact() const {
  std::lock_guard lock(current_mutex_);
  return current_;
}

std::vector<ModelArtifact> Study::artifact_history() const {
  std::shared_lock lock(state_mutex_);
  return state_.artifacts;
}

StudyConfig Study::config() const {
  std::shared_lock lock(state_mutex_);
  return state_.store->config();
}

std::uint64_t Study::last_seq() const {
  std::shared_lock lock(state_mutex_);
  return log_.last_seq();
}

std::vector<Event> Study::events() const {
  std::shared_lock lock(state_mutex_);
  return log_.events();
}

Registration Study::register_participant(std::optional<double> outcome) {
  std::unique_lock lock(state_mutex_);
  Registration reg;
  reg.participant_id = state_.store->next_participant_id();
  do {
    reg.token = options_.token_source();
  } while (state_.tokens.contains(reg.token));
  nlohmann::ordered_json payload{{"participant_id", reg.participant_id.value}, {"token", reg.token}};
  if (outcome) payload["outcome"] = *outcome;
  append_locked(EventKind::ParticipantRegistered, std::move(payload));
  return reg;
}

std::optional<ParticipantId> Study::authenticate(const std::string& token) const {
  std::shared_lock lock(state_mutex_);
  auto it = state_.tokens.find(token);
  if (it == state_.tokens.end()) return std::nullopt;
  return it->second;
}

void Study::set_outcome(ParticipantId pid, double value) {
  append_event(EventKind::OutcomeSet, {{"participant_id", pid.value}, {"value", value}});
}

double Study::set_outcome_bmi(ParticipantId pid, int height_ft, double height_in, double weight_lb) {
  const double bmi = compute_bmi(height_ft, height_in, weight_lb);
  set_outcome(pid, bmi);
  return bmi;
}

double Study::set_outcome_series(ParticipantId pid, std::vector<std::pair<std::string, double>> series,
                                 std::vector<std::string> periods) {
  const double value = aggregate_energy_outcome(series, periods);
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& [label, reading] : series) entries.push_back({label, reading});
  append_event(EventKind::OutcomeSet,
               {{"participant_id", pid.value}, {"value", value}, {"series", std::move(entries)}});
  return value;
}

OrderingDecision Study::next_questions(ParticipantId pid) const {
  std::shared_lock lock(state_mutex_);
  auto decision = crowdsurvey::next_questions(*state_.store, pid, clock_());
  std::string ids;
  for (auto q : decision.question_ids) ids += (ids.empty() ? "" : ",") + std::to_string(q.value);
  spdlog::debug("ordering participant={} strategy={} budget={} questions=[{}]", pid.value,
                to_string(decision.strategy), decision.budget ? std::to_string(*decision.budget) : "none",
                ids);
  return decision;
}

SubmitResult Study::submit_response(ParticipantId pid, QuestionId qid, double value) {
  append_event(EventKind::ResponseSubmitted,
               {{"participant_id", pid.value}, {"question_id", qid.value}, {"value", value}});
  SubmitResult result;
  result.accepted = true;
  const auto artifact = current_artifact();
  std::shared_lock lock(state_mutex_);
  const auto& store = *state_.store;
  result.actual_outcome = store.participant(pid).outcome;
  if (artifact) result.predicted_outcome = predict_for(store, *artifact, pid);
  return result;
}

QuestionId Study::propose_question(ParticipantId pid, const QuestionDraft& draft) {
  std::unique_lock lock(state_mutex_);
  const QuestionId qid = state_.store->next_question_id();
  nlohmann::ordered_json question = nlohmann::ordered_json::parse(draft_to_json(draft).dump());
  append_locked(EventKind::QuestionProposed,
                {{"participant_id", pid.value}, {"question_id", qid.value}, {"question", question}});
  return qid;
}

ParticipantSummary Study::summary(ParticipantId pid) const {
  const auto artifact = current_artifact();
  std::shared_lock lock(state_mutex_);
  const auto& store = *state_.store;
  const auto& participant = store.participant(pid);

  ParticipantSummary summary;
  summary.participant_id = pid;
  summary.actual_outcome = participant.outcome;
  if (artifact) {
    summary.predicted_outcome = predict_for(store, *artifact, pid);
    summary.model_built_at = artifact->built_at;
  }
  PeerGroups groups;
  if (participant.outcome && !participant.withdrawn) {
    groups = build_peer_groups(store, pid);
    summary.lower_mean_outcome = groups.lower_mean_outcome;
    summary.upper_mean_outcome = groups.upper_mean_outcome;
    summary.lower_group_size = groups.lower.size();
    summary.upper_group_size = groups.upper.size();
  }
  for (auto qid : approved_columns(store)) {
    const auto& q = store.question(qid);
    SummaryRow row;
    row.question_id = qid;
    row.text = q.text;
    row.kind = q.kind;
    if (const auto* r = store.response(pid, qid)) row.own_answer = r->raw_value;
    row.lower_group_mean = group_question_profile(store, groups.lower, qid);
    row.upper_group_mean = group_question_profile(store, groups.upper, qid);
    if (artifact) {
      if (auto col = artifact->column_of(qid)) row.predictive_power = artifact->d[*col];
    }
    summary.rows.push_back(std::move(row));
  }
  for (const auto& q : store.questions()) {
    if (q.author_id == pid && q.status == QuestionStatus::Rejected && q.rejection_code) {
      summary.rejected_proposals.push_back({q.id, q.text, *q.rejection_code});
    }
  }
  return summary;
}

void Study::withdraw(ParticipantId pid) {
  append_event(EventKind::ParticipantWithdrew, {{"participant_id", pid.value}});
}

std::vector<Question> Study::pending_questions() const {
  std::shared_lock lock(state_mutex_);
  std::vector<Question> pending;
  for (const auto* q : list_pending(*state_.store)) pending.push_back(*q);
  return pending;
}

Question Study::review(const ModerationVerdict& verdict) {
  nlohmann::ordered_json payload{{"question_id", verdict.question_id.value},
                                 {"verdict", verdict.verdict == Verdict::Approve ? "approve" : "reject"}};
  if (verdict.rejection_code) payload["code"] = to_string(*verdict.rejection_code);
  payload["reviewer"] = verdict.reviewer;
  std::unique_lock lock(state_mutex_);
  append_locked(EventKind::QuestionReviewed, std::move(payload));
  return state_.store->question(verdict.question_id);
}

void Study::update_config(const nlohmann::json& change) {
  if (!change.is_object()) throw SurveyError(ErrorCode::ValidationFailed, "change must be an object",
                                             ErrorCode::InvalidConfig);
  nlohmann::ordered_json payload = nlohmann::ordered_json::object();
  if (change.contains("patch") || change.contains("question_bounds")) {
    if (change.contains("patch")) payload["patch"] = nlohmann::ordered_json::parse(change["patch"].dump());
    if (change.contains("question_bounds")) {
      payload["question_bounds"] = nlohmann::ordered_json::parse(change["question_bounds"].dump());
    }
  } else {
    payload["patch"] = nlohmann::ordered_json::parse(change.dump());
  }
  append_event(EventKind::ConfigChanged, std::move(payload));
}

std::optional<ModelArtifact> Study::run_engine() {
  std::unique_lock engine(engine_mutex_, std::try_to_lock);
  if (!engine.owns_lock()) {
    spdlog::info("engine run skipped: previous run still in progress");
    return std::nullopt;
  }

  DesignMatrix design;
  std::uint64_t source_seq = 0;
  double lambda = 0.0;
  int min_samples = 0;
  {
    std::shared_lock lock(state_mutex_);
    source_seq = log_.last_seq();
    const auto& config = state_.store->config();
    lambda = config.ridge_lambda;
    min_samples = config.min_samples_for_power;
    try {
      design = build_design(*state_.store, clock_());
    } catch (const SurveyError& e) {
      if (e.code() != ErrorCode::EmptyDesign) throw;
      spdlog::info("engine run skipped: {}", e.what());
      return std::nullopt;
    }
  }

  auto artifact = fit_design(design, lambda, min_samples, source_seq);
  nlohmann::ordered_json payload{{"artifact", artifact_to_json(artifact)}};
  {
    std::unique_lock lock(state_mutex_);
    append_locked(EventKind::ModelPublished, std::move(payload));
  }
  spdlog::info("model published: n={} k={} r2={:.4f}", artifact.n, artifact.k, artifact.model_r2);
  return artifact;
}

EngineScheduler::EngineScheduler(Study& study, Timestamp start) : study_(study), next_fire_(0) {
  next_fire_ = start + study_.config().engine_period_s * kMillisPerSecond;
}

EngineScheduler::~EngineScheduler() { stop(); }

bool EngineScheduler::poll(Timestamp now) {
  if (now < next_fire_.load()) return false;
  study_.run_engine();
  next_fire_ = now + study_.config().engine_period_s * kMillisPerSecond;
  return true;
}

void EngineScheduler::start() {
  {
    std::lock_guard lock(wake_mutex_);
    stopping_ = false;
  }
  thread_ = std::thread([this] {
    std::unique_lock lock(wake_mutex_);
    while (!stopping_) {
      const Timestamp wait_ms = std::clamp<Timestamp>(next_fire_.load() - study_.now(), 0, 1000);
      wake_.wait_for(lock, std::chrono::milliseconds(wait_ms), [this] { return stopping_; });
      if (stopping_) break;
      lock.unlock();
      try {
        poll(study_.now());
      } catch (const std::exception& e) {
        spdlog::error("engine run failed: {}", e.what());
      }
      lock.lock();
    }
  });
}

void EngineScheduler::stop() {
  {
    std::lock_guard lock(wake_mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  if (thread_.joinable()) thread_.join();
}

}  // namespace crowdsurvey
