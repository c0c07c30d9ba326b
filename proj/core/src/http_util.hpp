#pragma once

#include <httplib.h>

#include <memory>
#include <stdexcept>
#include <string>

namespace localguard::detail {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

inline UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::unique_ptr<httplib::Client> make_client(const std::string& origin, int timeout_ms) {
  auto client = std::make_unique<httplib::Client>(origin);
  const time_t sec = timeout_ms / 1000;
  const time_t usec = static_cast<time_t>(timeout_ms % 1000) * 1000;
  client->set_connection_timeout(sec, usec);
  client->set_read_timeout(sec, usec);
  client->set_write_timeout(sec, usec);
  return client;
}

}  // namespace localguard::detail
