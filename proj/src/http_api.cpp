#include "crowdsurvey/http_api.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "crowdsurvey/analytics.hpp"
#include "crowdsurvey/config.hpp"

namespace crowdsurvey {
namespace {

using nlohmann::json;

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownParticipant:
    case ErrorCode::UnknownQuestion: return 404;
    case ErrorCode::AlreadyReviewed: return 409;
    case ErrorCode::ParticipantWithdrawn: return 410;
    case ErrorCode::StorageFailure:
    case ErrorCode::CorruptLog: return 500;
    default: return 422;
  }
}

json parse_body(const httplib::Request& req, bool allow_empty = false) {
  if (req.body.empty()) {
    if (allow_empty) return json::object();
    throw HttpError{400, "BadRequest", "request body required"};
  }
  auto body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) throw HttpError{400, "BadRequest", "body must be a JSON object"};
  return body;
}

std::optional<std::string> bearer_token(const httplib::Request& req) {
  const auto header = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (header.size() <= prefix.size() || header.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  return header.substr(prefix.size());
}

std::vector<std::pair<std::string, double>> parse_series(const json& series) {
  std::vector<std::pair<std::string, double>> out;
  if (series.is_object()) {
    for (const auto& [label, value] : series.items()) out.emplace_back(label, value.get<double>());
  } else {
    for (const auto& entry : series) {
      if (entry.is_array()) out.emplace_back(entry.at(0).get<std::string>(), entry.at(1).get<double>());
      else out.emplace_back(entry.at("period").get<std::string>(), entry.at("value").get<double>());
    }
  }
  return out;
}

}  // namespace

struct HttpService::Impl {
  Impl(Study& s, std::string token) : study(s), admin_token(std::move(token)) { routes(); }

  Study& study;
  std::string admin_token;
  httplib::Server server;

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  Handler guarded(Handler fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const HttpError& e) {
        send_json(res, e.status, {{"error", e.code}, {"message", e.message}});
      } catch (const SurveyError& e) {
        const ErrorCode code = e.code() == ErrorCode::ValidationFailed && e.cause() ? *e.cause() : e.code();
        send_json(res, status_for(code), {{"error", to_string(code)}, {"message", e.detail()}});
      } catch (const json::exception& e) {
        send_json(res, 400, {{"error", "BadRequest"}, {"message", e.what()}});
      } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_json(res, 500, {{"error", "Internal"}, {"message", e.what()}});
      }
    };
  }

  ParticipantId participant(const httplib::Request& req) const {
    const auto token = bearer_token(req);
    const auto pid = token ? study.authenticate(*token) : std::nullopt;
    if (!pid) throw HttpError{401, "Unauthorized", "missing or unknown participant token"};
    if (study.read([&](const Store& store) { return store.participant(*pid).withdrawn; })) {
      throw HttpError{410, "ParticipantWithdrawn", "participant has withdrawn"};
    }
    return *pid;
  }

  void require_admin(const httplib::Request& req) const {
    const auto token = bearer_token(req);
    if (admin_token.empty() || !token || *token != admin_token) {
      throw HttpError{401, "Unauthorized", "admin token required"};
    }
  }

  void routes() {
    server.Post("/api/participants", guarded([this](const auto& req, auto& res) {
      const auto body = parse_body(req, true);
      std::optional<double> outcome;
      if (body.contains("outcome") && !body["outcome"].is_null()) outcome = body["outcome"].template get<double>();
      const auto reg = study.register_participant(outcome);
      send_json(res, 201, {{"participant_id", reg.participant_id.value}, {"token", reg.token}});
    }));

    server.Put("/api/me/outcome", guarded([this](const auto& req, auto& res) {
      const auto pid = participant(req);
      const auto body = parse_body(req);
      double value = 0.0;
      if (body.contains("value")) {
        value = body["value"].template get<double>();
        study.set_outcome(pid, value);
      } else if (body.contains("height_ft")) {
        value = study.set_outcome_bmi(pid, body.at("height_ft").template get<int>(),
                                      body.value("height_in", 0.0), body.at("weight_lb").template get<double>());
      } else if (body.contains("series")) {
        value = study.set_outcome_series(pid, parse_series(body["series"]),
                                         body.at("periods").template get<std::vector<std::string>>());
      } else {
        throw HttpError{400, "BadRequest", "expected value, height_ft/height_in/weight_lb, or series/periods"};
      }
      send_json(res, 200, {{"participant_id", pid.value}, {"outcome", value}});
    }));

    server.Get("/api/me/next-questions", guarded([this](const auto& req, auto& res) {
      const auto pid = participant(req);
      const auto decision = study.next_questions(pid);
      send_json(res, 200, study.read([&](const Store& store) { return decision_to_json(decision, store); }));
    }));

    server.Post("/api/me/responses", guarded([this](const auto& req, auto& res) {
      const auto pid = participant(req);
      const auto body = parse_body(req);
      const auto result = study.submit_response(pid, QuestionId{body.at("question_id").template get<std::uint64_t>()},
                                                 body.at("value").template get<double>());
      json out{{"accepted", result.accepted}};
      if (result.predicted_outcome) out["predicted_outcome"] = *result.predicted_outcome;
      out["actual_outcome"] = result.actual_outcome ? json(*result.actual_outcome) : json(nullptr);
      send_json(res, 200, out);
    }));

    server.Post("/api/me/questions", guarded([this](const auto& req, auto& res) {
      const auto pid = participant(req);
      const auto qid = study.propose_question(pid, draft_from_json(parse_body(req)));
      send_json(res, 201, {{"question_id", qid.value}, {"status", "pending"}});
    }));

    server.Get("/api/me/summary", guarded([this](const auto& req, auto& res) {
      send_json(res, 200, summary_to_json(study.summary(participant(req))));
    }));

    server.Delete("/api/me", guarded([this](const auto& req, auto& res) {
      const auto pid = participant(req);
      study.withdraw(pid);
      send_json(res, 200, {{"participant_id", pid.value}, {"withdrawn", true}});
    }));

    server.Get("/api/admin/moderation", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      json pending = json::array();
      for (const auto& q : study.pending_questions()) pending.push_back(question_to_json(q));
      send_json(res, 200, {{"pending", pending}});
    }));

    server.Post("/api/admin/moderation/:id", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      const auto body = parse_body(req);
      ModerationVerdict verdict;
      try {
        verdict.question_id = QuestionId{std::stoull(req.path_params.at("id"))};
      } catch (const std::exception&) {
        throw HttpError{400, "BadRequest", "question id must be a number"};
      }
      const auto text = body.at("verdict").template get<std::string>();
      if (text == "approve") verdict.verdict = Verdict::Approve;
      else if (text == "reject") verdict.verdict = Verdict::Reject;
      else throw HttpError{422, "InvalidVerdict", "verdict must be approve or reject"};
      if (body.contains("code") && !body["code"].is_null()) {
        verdict.rejection_code = parse_rejection_code(body["code"].template get<std::string>());
      }
      verdict.reviewer = body.value("reviewer", std::string("admin"));
      send_json(res, 200, question_to_json(study.review(verdict)));
    }));

    server.Get("/api/admin/analytics/:report", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      send_json(res, 200, analytics(req.path_params.at("report"), req));
    }));

    server.Put("/api/admin/config", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      study.update_config(parse_body(req));
      send_json(res, 200, config_to_json(study.config()));
    }));
  }

  json analytics(const std::string& report, const httplib::Request& req) {
    const auto artifact = study.current_artifact();
    if (report == "ranking") {
      json out{{"ranking", json::array()}};
      if (!artifact) return out;
      out["model_built_at"] = artifact->built_at;
      study.read([&](const Store& store) {
        std::size_t rank = 1;
        for (const auto& [qid, d] : power_ranking(*artifact)) {
          out["ranking"].push_back({{"rank", rank++},
                                    {"question_id", qid.value},
                                    {"text", store.question(qid).text},
                                    {"r2", d},
                                    {"responses", store.response_count(qid)}});
        }
        return 0;
      });
      return out;
    }
    if (report == "powerlaw") {
      std::size_t m = 20;
      if (req.has_param("m")) {
        try {
          m = std::stoul(req.get_param_value("m"));
        } catch (const std::exception&) {
          throw HttpError{400, "BadRequest", "m must be a positive integer"};
        }
      }
      std::vector<double> positive;
      if (artifact) {
        for (const auto& entry : power_ranking(*artifact)) {
          if (entry.second > 0.0) positive.push_back(entry.second);
        }
      }
      const std::size_t used = std::min(m, positive.size());
      try {
        const auto fit = loglog_fit(positive, used);
        return {{"m", fit.m}, {"slope", fit.slope}, {"intercept", fit.intercept}, {"fit_r2", fit.fit_r2}};
      } catch (const SurveyError& e) {
        return {{"m", used}, {"status", to_string(e.code())}, {"message", e.detail()}};
      }
    }
    if (report == "participation") {
      const auto matrix = study.read([](const Store& store) { return participation_matrix(store); });
      json rows = json::array(), cols = json::array(), cells = json::array();
      for (auto p : matrix.rows) rows.push_back(p.value);
      for (auto q : matrix.cols) cols.push_back(q.value);
      for (const auto& row : matrix.cells) {
        json line = json::array();
        for (bool cell : row) line.push_back(cell ? 1 : 0);
        cells.push_back(std::move(line));
      }
      return {{"rows", rows}, {"cols", cols}, {"cells", cells}, {"count", matrix.count()}};
    }
    if (report == "quality") {
      const auto history = study.artifact_history();
      json series = json::array();
      for (const auto& p : model_quality_series(history)) series.push_back({{"at", p.at}, {"model_r2", p.model_r2}});
      return {{"series", series}};
    }
    throw HttpError{404, "NotFound", "unknown report '" + report + "'"};
  }
};

HttpService::HttpService(Study& study, std::string admin_token)
    : impl_(std::make_unique<Impl>(study, std::move(admin_token))) {}

HttpService::~HttpService() { stop(); }

bool HttpService::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

bool HttpService::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }

int HttpService::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool HttpService::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

void HttpService::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace crowdsurvey
