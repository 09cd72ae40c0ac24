// Copyright 2026 The netexp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Deterministic hash-based uniforms. The construction is pinned so that any
// implementation in any language reproduces the same assignments:
//
//   hash_uniform(salt, unit) = be_u64(SHA-256(salt + ":" + unit)[0..8]) / 2^64
//
// The rare digests that round to 1.0 in double precision are mapped to the
// largest double below 1.0 so the result always lies in [0, 1).

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "netexp/common.hpp"

namespace netexp {

using Sha256Digest = std::array<std::uint8_t, 32>;

namespace detail {

struct EvpMdDeleter {
  void operator()(EVP_MD* md) const noexcept { EVP_MD_free(md); }
};
struct EvpMdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const noexcept { EVP_MD_CTX_free(ctx); }
};

inline const EVP_MD* sha256_md() {
  static const std::unique_ptr<EVP_MD, EvpMdDeleter> md(EVP_MD_fetch(nullptr, "SHA256", nullptr));
  if (!md) throw Error("OpenSSL: SHA256 digest unavailable");
  return md.get();
}

inline EVP_MD_CTX* thread_digest_context() {
  thread_local const std::unique_ptr<EVP_MD_CTX, EvpMdCtxDeleter> ctx(EVP_MD_CTX_new());
  if (!ctx) throw Error("OpenSSL: cannot allocate digest context");
  return ctx.get();
}

}  // namespace detail

// SHA-256 of the concatenation of `parts`.
template <typename... Parts>
Sha256Digest sha256(const Parts&... parts) {
  EVP_MD_CTX* ctx = detail::thread_digest_context();
  if (EVP_DigestInit_ex(ctx, detail::sha256_md(), nullptr) != 1) throw Error("OpenSSL: digest init failed");
  auto feed = [ctx](std::string_view s) {
    if (EVP_DigestUpdate(ctx, s.data(), s.size()) != 1) throw Error("OpenSSL: digest update failed");
  };
  (feed(std::string_view(parts)), ...);
  Sha256Digest out{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != out.size()) {
    throw Error("OpenSSL: digest final failed");
  }
  return out;
}

inline std::string to_hex(const Sha256Digest& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : digest) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xf]);
  }
  return s;
}

inline std::uint64_t digest_prefix_u64(const Sha256Digest& digest) noexcept {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | digest[i];
  return v;
}

inline double hash_uniform(std::string_view salt, std::string_view unit) {
  double u = static_cast<double>(digest_prefix_u64(sha256(salt, std::string_view(":"), unit))) * 0x1p-64;
  return u < 1.0 ? u : std::nextafter(1.0, 0.0);
}

inline double hash_uniform(std::string_view salt, std::uint64_t unit) {
  return hash_uniform(salt, std::to_string(unit));
}

}  // namespace netexp
