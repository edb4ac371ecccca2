#include "tea/net.hpp"

#include <atomic>
#include <regex>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace tea::net {
namespace {

std::atomic<bool> g_enabled{true};
std::atomic<std::uint64_t> g_outbound{0};
std::atomic<std::uint64_t> g_blocked{0};

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post(const std::string& url, const Headers& headers, const std::string& body,
                    const std::string& content_type, std::chrono::seconds timeout) override {
    if (!network_enabled()) {
      ++g_blocked;
      throw NetworkDisabled(url);
    }
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(url, m, kUrl)) return {0, "malformed url: " + url, {}};
    ++g_outbound;
    httplib::Client client(m[1].str());
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers hdrs(headers.begin(), headers.end());
    std::string path = m[2].matched ? m[2].str() : "/";
    auto res = client.Post(path, hdrs, body, content_type);
    if (!res) return {0, "transport error: " + httplib::to_string(res.error()), {}};
    return {res->status, res->body, res->get_header_value("Content-Type")};
  }
};

}  // namespace

std::shared_ptr<HttpTransport> default_transport() {
  static auto transport = std::make_shared<HttplibTransport>();
  return transport;
}

void set_network_enabled(bool enabled) { g_enabled = enabled; }
bool network_enabled() { return g_enabled; }
std::uint64_t outbound_request_count() { return g_outbound; }
std::uint64_t blocked_request_count() { return g_blocked; }

}  // namespace tea::net
