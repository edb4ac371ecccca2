#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "tea/error.hpp"

// Every outbound network request in the library goes through HttpTransport,
// which consults the process-wide network switch below.
namespace tea::net {

struct HttpResponse {
  int status = 0;  // 0: transport failure, body holds the reason
  std::string body;
  std::string content_type;
};

using Headers = std::multimap<std::string, std::string>;

class NetworkDisabled : public Error {
 public:
  explicit NetworkDisabled(const std::string& url)
      : Error("network access disabled (offline mode): " + url) {}
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const Headers& headers, const std::string& body,
                            const std::string& content_type, std::chrono::seconds timeout) = 0;
};

std::shared_ptr<HttpTransport> default_transport();

void set_network_enabled(bool enabled);
bool network_enabled();
// Requests that reached the wire / requests refused while offline.
std::uint64_t outbound_request_count();
std::uint64_t blocked_request_count();

}  // namespace tea::net
