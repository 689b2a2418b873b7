#pragma once

#include <memory>
#include <string>

#include "kubewatt/errors.hpp"

namespace kubewatt {

// Thin GET-only wrapper over the embedded HTTP library that maps
// transport and status failures onto the collector error kinds:
// network problems -> Unreachable, 401/403 -> AuthFailed, any other
// non-2xx -> SchemaMismatch. Accepts http:// and https:// base URLs.
class HttpClient {
 public:
  HttpClient(const std::string& base_url, bool tls_verify);
  ~HttpClient();

  HttpClient(HttpClient&&) noexcept;
  HttpClient& operator=(HttpClient&&) noexcept;

  void set_basic_auth(const std::string& username, const std::string& password);
  void set_bearer_token(const std::string& token);

  // Returns the response body of a 2xx response; throws Error otherwise.
  std::string get(const std::string& path);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace kubewatt
