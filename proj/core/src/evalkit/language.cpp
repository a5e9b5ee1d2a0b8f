#include "align/evalkit/language.hpp"

#include <unicode/uchar.h>
#include <unicode/uscript.h>

#include "align/jsonl.hpp"
#include "align/retrieval/tokenizer.hpp"
#include "align/text.hpp"

namespace align::evalkit {

namespace detail {
extern const std::string_view kSimplifiedOnly;
extern const std::string_view kTraditionalOnly;
extern const std::string_view kCantoneseMarkers;
}  // namespace detail

namespace {

std::u32string read_table(const std::filesystem::path& path) {
  std::u32string out;
  const auto content = jsonl::read_text(path);
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    std::string_view line(content.data() + pos, end - pos);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    for (char32_t c : text::utf8_decode(line))
      if (c != ' ' && c != '\t' && c != '\r') out.push_back(c);
    pos = end + 1;
  }
  return out;
}

}  // namespace

LanguageDetector::LanguageDetector()
    : LanguageDetector(text::utf8_decode(detail::kSimplifiedOnly), text::utf8_decode(detail::kTraditionalOnly),
                       text::utf8_decode(detail::kCantoneseMarkers)) {}

LanguageDetector::LanguageDetector(std::u32string_view simplified_only, std::u32string_view traditional_only,
                                   std::u32string_view cantonese_markers)
    : simplified_(simplified_only.begin(), simplified_only.end()),
      traditional_(traditional_only.begin(), traditional_only.end()),
      cantonese_(cantonese_markers.begin(), cantonese_markers.end()) {}

LanguageDetector LanguageDetector::from_files(const std::filesystem::path& simplified_only,
                                              const std::filesystem::path& traditional_only,
                                              const std::filesystem::path& cantonese_markers) {
  return LanguageDetector(read_table(simplified_only), read_table(traditional_only), read_table(cantonese_markers));
}

Lang LanguageDetector::detect(std::string_view input) const {
  const auto cps = retrieval::nfc(input);
  std::size_t latin = 0, han = 0, other = 0;
  std::size_t simp = 0, trad = 0, markers = 0;
  for (char32_t c : cps) {
    const auto uc = static_cast<UChar32>(c);
    UErrorCode status = U_ZERO_ERROR;
    const auto script = uscript_getScript(uc, &status);
    if (script == USCRIPT_HAN) {
      ++han;
      simp += simplified_.count(c);
      trad += traditional_.count(c);
      markers += cantonese_.count(c);
    } else if (u_isalpha(uc)) {
      if (script == USCRIPT_LATIN)
        ++latin;
      else
        ++other;
    }
  }
  const std::size_t letters = latin + han + other;
  if (letters == 0) return Lang::unknown;
  if (latin > 0 && han > 0) {
    const double minority = static_cast<double>(std::min(latin, han)) / static_cast<double>(letters);
    if (minority > mixed_threshold) return Lang::mixed;
  }
  if (latin >= han && latin >= other) return Lang::english;
  if (han < other) return Lang::unknown;
  if (simp > 0) return Lang::simplified_chinese;
  if (markers >= static_cast<std::size_t>(cantonese_min_markers)) return Lang::cantonese_oral;
  (void)trad;
  return Lang::traditional_chinese;
}

Lang detect_language(std::string_view text) {
  static const LanguageDetector detector;
  return detector.detect(text);
}

}  // namespace align::evalkit
