#pragma once

#include <openssl/evp.h>

#include <cstdint>
#include <string>
#include <string_view>

#include "auvf/common.hpp"

namespace auvf {

// Incremental SHA-256, hex digest. Used for content-addressed stage caching
// and artifact fingerprints.
class Hasher {
public:
  Hasher() : ctx_(EVP_MD_CTX_new()) {
    AUVF_CHECK(ctx_, "EVP_MD_CTX_new failed");
    AUVF_CHECK(EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) == 1, "DigestInit failed");
  }
  ~Hasher() {
    if (ctx_) EVP_MD_CTX_free(ctx_);
  }
  Hasher(const Hasher&) = delete;
  Hasher& operator=(const Hasher&) = delete;

  Hasher& update(std::string_view data) {
    AUVF_CHECK(EVP_DigestUpdate(ctx_, data.data(), data.size()) == 1, "DigestUpdate failed");
    return *this;
  }
  Hasher& update(const void* data, size_t n) {
    AUVF_CHECK(EVP_DigestUpdate(ctx_, data, n) == 1, "DigestUpdate failed");
    return *this;
  }

  std::string hex() {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    AUVF_CHECK(EVP_DigestFinal_ex(ctx_, out, &n) == 1, "DigestFinal failed");
    static const char* k = "0123456789abcdef";
    std::string s;
    s.reserve(2 * n);
    for (unsigned int i = 0; i < n; ++i) {
      s.push_back(k[out[i] >> 4]);
      s.push_back(k[out[i] & 0xf]);
    }
    return s;
  }

private:
  EVP_MD_CTX* ctx_;
};

inline std::string sha256_hex(std::string_view data) {
  Hasher h;
  h.update(data);
  return h.hex();
}

}  // namespace auvf
