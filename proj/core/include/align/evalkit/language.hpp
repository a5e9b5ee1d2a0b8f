#pragma once

#include <filesystem>
#include <set>
#include <string_view>

#include "align/types.hpp"

namespace align::evalkit {

/// Script-based language tagger.
///
/// Counts Latin letters and Han characters (other scripts count toward the
/// total only). No letters -> unknown. Both scripts present with the smaller
/// one above `mixed_threshold` of the letters -> mixed. Latin-dominant ->
/// english. Han-dominant -> simplified-chinese if any simplified-only
/// character occurs; otherwise cantonese-oral with at least
/// `cantonese_min_markers` marker characters; otherwise traditional-chinese
/// (characters shared by both scripts default to traditional).
class LanguageDetector {
public:
  /// Uses the tables compiled in from core/data/lang.
  LanguageDetector();
  LanguageDetector(std::u32string_view simplified_only, std::u32string_view traditional_only,
                   std::u32string_view cantonese_markers);

  /// Table files: '#' comments, all other non-space code points count.
  static LanguageDetector from_files(const std::filesystem::path& simplified_only,
                                     const std::filesystem::path& traditional_only,
                                     const std::filesystem::path& cantonese_markers);

  Lang detect(std::string_view text) const;

  bool is_simplified_only(char32_t c) const { return simplified_.count(c) > 0; }
  bool is_traditional_only(char32_t c) const { return traditional_.count(c) > 0; }
  bool is_cantonese_marker(char32_t c) const { return cantonese_.count(c) > 0; }

  double mixed_threshold = 0.20;
  int cantonese_min_markers = 2;

private:
  std::set<char32_t> simplified_;
  std::set<char32_t> traditional_;
  std::set<char32_t> cantonese_;
};

/// detect() with the built-in tables.
Lang detect_language(std::string_view text);

}  // namespace align::evalkit
