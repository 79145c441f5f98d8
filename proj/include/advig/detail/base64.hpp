#pragma once

// Minimal RFC 4648 base64 for the detector wire protocol.

#include <cstdint>
#include <string>

#include "advig/error.hpp"

namespace advig::detail {

inline constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::string& raw) {
  std::string out;
  out.reserve((raw.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < raw.size(); i += 3) {
    const std::uint32_t n = (static_cast<std::uint8_t>(raw[i]) << 16) |
                            (static_cast<std::uint8_t>(raw[i + 1]) << 8) |
                            static_cast<std::uint8_t>(raw[i + 2]);
    out.push_back(kB64Alphabet[(n >> 18) & 63]);
    out.push_back(kB64Alphabet[(n >> 12) & 63]);
    out.push_back(kB64Alphabet[(n >> 6) & 63]);
    out.push_back(kB64Alphabet[n & 63]);
  }
  const std::size_t rem = raw.size() - i;
  if (rem == 1) {
    const std::uint32_t n = static_cast<std::uint8_t>(raw[i]) << 16;
    out.push_back(kB64Alphabet[(n >> 18) & 63]);
    out.push_back(kB64Alphabet[(n >> 12) & 63]);
    out += "==";
  } else if (rem == 2) {
    const std::uint32_t n = (static_cast<std::uint8_t>(raw[i]) << 16) |
                            (static_cast<std::uint8_t>(raw[i + 1]) << 8);
    out.push_back(kB64Alphabet[(n >> 18) & 63]);
    out.push_back(kB64Alphabet[(n >> 12) & 63]);
    out.push_back(kB64Alphabet[(n >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

inline int base64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

inline std::string base64_decode(const std::string& enc) {
  std::string out;
  out.reserve(enc.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : enc) {
    if (c == '=' || c == '\n' || c == '\r') continue;
    const int v = base64_value(c);
    if (v < 0) throw InvalidParameter("invalid base64 character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

}  // namespace advig::detail
