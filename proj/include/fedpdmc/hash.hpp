#pragma once

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "fedpdmc/error.hpp"

namespace fedpdmc {

inline std::string digest_hex(const EVP_MD* md, std::string_view prefix, std::string_view content) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  detail::require(ctx != nullptr, ErrorCode::IoError, "EVP_MD_CTX_new failed");
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = EVP_DigestInit_ex(ctx, md, nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, prefix.data(), prefix.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, out, &len) == 1;
  EVP_MD_CTX_free(ctx);
  detail::require(ok, ErrorCode::IoError, "digest computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[out[i] >> 4];
    hex += kHex[out[i] & 0xF];
  }
  return hex;
}

/// Object id git would assign to `content` as a blob.
inline std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  return digest_hex(EVP_sha1(), header, content);
}

inline std::string sha256_hex(std::string_view content) { return digest_hex(EVP_sha256(), {}, content); }

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  detail::require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fedpdmc
