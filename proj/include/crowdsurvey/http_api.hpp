#pragma once

#include <memory>
#include <string>

#include "crowdsurvey/study.hpp"

namespace crowdsurvey {

/// JSON-over-HTTP front end for one study. Handlers only translate between
/// HTTP and Study calls; every change goes through the study's event log.
///
/// Participants authenticate with `Authorization: Bearer <token>` from
/// registration. Admin routes take the admin token the same way; an empty
/// admin token disables them.
class HttpService {
 public:
  HttpService(Study& study, std::string admin_token);
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Blocks until stop().
  bool listen(const std::string& host, int port);
  bool bind(const std::string& host, int port);
  /// Returns the chosen port, or -1.
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace crowdsurvey
