#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "align/types.hpp"

namespace align::retrieval {

/// NFC-normalizes, lowercases Latin letters, drops punctuation/whitespace.
/// Runs of Han characters emit every character as a unigram followed by
/// every overlapping bigram ("香港" -> 香, 港, 香港). Other letters and
/// digits form whitespace/punctuation-delimited words. `lang` is accepted
/// for interface stability; segmentation is script-driven.
std::vector<std::string> tokenize(std::string_view text, Lang lang = Lang::unknown);

/// NFC form as code points.
std::u32string nfc(std::string_view text);

/// nfc() with Latin letters lowercased; same length as nfc() so offsets
/// carry over.
std::u32string match_form(std::string_view text);

bool is_han(char32_t cp);
bool is_word_char(char32_t cp);

}  // namespace align::retrieval
