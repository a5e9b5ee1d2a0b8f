#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace align::text {

/// 64-bit FNV-1a over raw bytes.
constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash of an ordered tuple of strings; fields are separated by 0x1f so that
/// ("ab","c") and ("a","bc") differ.
std::uint64_t hash_fields(std::initializer_list<std::string_view> fields);

/// Splits on ASCII whitespace; empty pieces are dropped.
std::vector<std::string> split_ws(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string ascii_lower(std::string_view s);

std::string_view trim(std::string_view s);

bool starts_with_icase(std::string_view s, std::string_view prefix);

/// Decodes UTF-8 into code points. Invalid bytes become U+FFFD.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

}  // namespace align::text
