#include "align/retrieval/tokenizer.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/uscript.h>
#include <unicode/unistr.h>

#include "align/error.hpp"
#include "align/text.hpp"

namespace align::retrieval {

namespace {

const icu::Normalizer2& nfc_normalizer() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) throw Error("ICU NFC normalizer unavailable");
  return *n;
}

bool is_latin(char32_t cp) {
  UErrorCode status = U_ZERO_ERROR;
  return uscript_getScript(static_cast<UChar32>(cp), &status) == USCRIPT_LATIN && U_SUCCESS(status);
}

}  // namespace

bool is_han(char32_t cp) {
  UErrorCode status = U_ZERO_ERROR;
  return uscript_getScript(static_cast<UChar32>(cp), &status) == USCRIPT_HAN && U_SUCCESS(status);
}

bool is_word_char(char32_t cp) {
  const auto c = static_cast<UChar32>(cp);
  if (u_isalnum(c) || u_hasBinaryProperty(c, UCHAR_ALPHABETIC)) return true;
  const auto cat = u_charType(c);
  return cat == U_NON_SPACING_MARK || cat == U_COMBINING_SPACING_MARK || cat == U_ENCLOSING_MARK;
}

std::u32string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  const auto normalized = nfc_normalizer().normalize(src, status);
  if (U_FAILURE(status)) throw Error("NFC normalization failed");
  std::u32string out;
  out.reserve(static_cast<std::size_t>(normalized.length()));
  for (int32_t i = 0; i < normalized.length();) {
    const UChar32 c = normalized.char32At(i);
    out.push_back(static_cast<char32_t>(c));
    i += U16_LENGTH(c);
  }
  return out;
}

std::u32string match_form(std::string_view text) {
  auto cps = nfc(text);
  for (auto& cp : cps)
    if (is_latin(cp)) cp = static_cast<char32_t>(u_tolower(static_cast<UChar32>(cp)));
  return cps;
}

std::vector<std::string> tokenize(std::string_view text, Lang /*lang*/) {
  const auto cps = match_form(text);
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    const char32_t c = cps[i];
    if (is_han(c)) {
      std::size_t j = i;
      while (j < cps.size() && is_han(cps[j])) ++j;
      for (std::size_t k = i; k < j; ++k) out.push_back(text::utf8_encode(cps.substr(k, 1)));
      for (std::size_t k = i; k + 1 < j; ++k) out.push_back(text::utf8_encode(cps.substr(k, 2)));
      i = j;
    } else if (is_word_char(c)) {
      std::size_t j = i;
      while (j < cps.size() && is_word_char(cps[j]) && !is_han(cps[j])) ++j;
      out.push_back(text::utf8_encode(cps.substr(i, j - i)));
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

}  // namespace align::retrieval
