#pragma once

#include <memory>
#include <string>
#include <vector>

#include <httplib.h>

#include "sfd/mnist/fetch.hpp"

namespace sfd::mnist {

/// Default transport backed by cpp-httplib. base_url is scheme://host[:port]
/// with an optional path prefix, e.g. "http://mirror.example/mnist".
class HttplibTransport final : public HttpTransport {
 public:
  std::vector<std::uint8_t> get(const std::string& base_url,
                                const std::string& path) override {
    std::string root = base_url;
    std::string prefix;
    const auto scheme_end = root.find("://");
    const auto slash = root.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (slash != std::string::npos) {
      prefix = root.substr(slash);
      root = root.substr(0, slash);
    }
    if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    httplib::Client client(root);
    client.set_follow_location(true);
    httplib::Result res = client.Get(prefix + "/" + path);
    if (!res)
      throw HttpError("GET " + base_url + "/" + path + " failed: " +
                      httplib::to_string(res.error()));
    if (res->status != 200)
      throw HttpError("GET " + base_url + "/" + path + " returned status " +
                      std::to_string(res->status));
    return std::vector<std::uint8_t>(res->body.begin(), res->body.end());
  }
};

inline std::unique_ptr<HttpTransport> make_default_transport() {
  return std::make_unique<HttplibTransport>();
}

}  // namespace sfd::mnist
