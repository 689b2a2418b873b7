#include "kubewatt/http_client.hpp"

#include <httplib.h>

namespace kubewatt {

struct HttpClient::Impl {
  httplib::Client client;

  explicit Impl(const std::string& base_url) : client(base_url) {}
};

HttpClient::HttpClient(const std::string& base_url, bool tls_verify)
    : impl_(std::make_unique<Impl>(base_url)) {
  if (!impl_->client.is_valid()) {
    throw Error(ErrorKind::ValidationError, "malformed base URL '" + base_url + "'");
  }
  impl_->client.set_connection_timeout(5, 0);
  impl_->client.set_read_timeout(10, 0);
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
  impl_->client.enable_server_certificate_verification(tls_verify);
#else
  (void)tls_verify;
#endif
}

HttpClient::~HttpClient() = default;
HttpClient::HttpClient(HttpClient&&) noexcept = default;
HttpClient& HttpClient::operator=(HttpClient&&) noexcept = default;

void HttpClient::set_basic_auth(const std::string& username, const std::string& password) {
  if (!username.empty() || !password.empty()) {
    impl_->client.set_basic_auth(username, password);
  }
}

void HttpClient::set_bearer_token(const std::string& token) {
  if (!token.empty()) {
    impl_->client.set_bearer_token_auth(token);
  }
}

std::string HttpClient::get(const std::string& path) {
  auto res = impl_->client.Get(path);
  if (!res) {
    throw Error(ErrorKind::Unreachable, "GET " + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status == 401 || res->status == 403) {
    throw Error(ErrorKind::AuthFailed, "GET " + path + " returned HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorKind::SchemaMismatch,
                "GET " + path + " returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

}  // namespace kubewatt
