#include "align/pipeline/query.hpp"

#include <algorithm>
#include <set>

#include "align/evalkit/language.hpp"
#include "align/text.hpp"

namespace align::pipeline {

namespace {

bool ascii_alnum(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_ascii(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

// Byte offset of the first match of `marker` in `lowered` at or after `from`,
// or npos. `lowered` must be the ASCII-lowercased text.
std::size_t find_marker(std::string_view lowered, std::string_view marker, std::size_t from = 0) {
  if (marker.empty()) return std::string_view::npos;
  const auto m = text::ascii_lower(marker);
  const bool bounded_front = is_ascii(m) && ascii_alnum(m.front());
  const bool bounded_back = is_ascii(m) && ascii_alnum(m.back());
  for (auto pos = lowered.find(m, from); pos != std::string_view::npos; pos = lowered.find(m, pos + 1)) {
    if (bounded_front && pos > 0 && ascii_alnum(lowered[pos - 1])) continue;
    const auto end = pos + m.size();
    if (bounded_back && end < lowered.size() && ascii_alnum(lowered[end])) continue;
    return pos;
  }
  return std::string_view::npos;
}

std::vector<std::string> by_length_desc(std::vector<std::string> v) {
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return v;
}

bool any_marker(std::string_view text_in, const std::vector<std::string>& markers) {
  const auto lowered = text::ascii_lower(text_in);
  return std::any_of(markers.begin(), markers.end(),
                     [&](const auto& m) { return find_marker(lowered, m) != std::string_view::npos; });
}

bool is_han_cp(char32_t c) {
  return (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0xF900 && c <= 0xFAFF) ||
         (c >= 0x20000 && c <= 0x3134F);
}

struct Piece {
  std::string text;
  bool han;
};

// Splits into ASCII alnum words and Han runs; everything else separates.
std::vector<Piece> pieces(std::string_view s) {
  std::vector<Piece> out;
  const auto cps = text::utf8_decode(s);
  std::size_t i = 0;
  while (i < cps.size()) {
    if (cps[i] < 0x80 && ascii_alnum(static_cast<char>(cps[i]))) {
      std::size_t j = i;
      while (j < cps.size() && cps[j] < 0x80 && ascii_alnum(static_cast<char>(cps[j]))) ++j;
      out.push_back({text::utf8_encode(cps.substr(i, j - i)), false});
      i = j;
    } else if (is_han_cp(cps[i])) {
      std::size_t j = i;
      while (j < cps.size() && is_han_cp(cps[j])) ++j;
      out.push_back({text::utf8_encode(cps.substr(i, j - i)), true});
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

std::string remove_all(std::string s, const std::vector<std::string>& phrases, std::string_view with) {
  for (const auto& p : by_length_desc(phrases)) {
    if (p.empty() || is_ascii(p)) continue;
    for (auto pos = s.find(p); pos != std::string::npos; pos = s.find(p, pos + with.size()))
      s.replace(pos, p.size(), with);
  }
  return s;
}

const std::vector<std::string> kTrailing = {"?", "!", ".", "\xEF\xBC\x9F", "\xEF\xBC\x81", "\xE3\x80\x82"};

}  // namespace

std::string_view to_string(Intent i) {
  switch (i) {
    case Intent::chitchat:
      return "chitchat";
    case Intent::factual:
      return "factual";
    case Intent::sensitive:
      return "sensitive";
    case Intent::tool_task:
      return "tool_task";
    case Intent::followup:
      return "followup";
  }
  return "?";
}

const Lexicon& Lexicon::defaults() {
  static const Lexicon lex = [] {
    Lexicon l;
    l.anaphora = {"the first one", "the second one", "the third one", "the last one", "that one", "this one",
                  "it", "they", "them", "佢哋", "佢", "它們", "它们", "它", "呢個", "嗰個", "這個", "那個",
                  "这个", "那个"};
    l.followup_phrases = {"what about", "how about", "tell me more", "more about", "and then", "那麼", "那么",
                          "還有呢", "还有呢", "咁呢", "然後呢", "然后呢"};
    l.interrogatives = {"what", "who", "whom", "whose", "when", "where", "why", "how", "which", "is", "are",
                        "was", "were", "does", "do", "did", "can", "could", "should", "explain", "describe",
                        "define", "list", "?", "\xEF\xBC\x9F", "什麼", "甚麼", "什么", "誰", "谁", "邊個", "點解",
                        "點樣", "幾時", "哪", "嗎", "吗", "咩", "乜嘢", "為何", "为何", "如何", "怎麼", "怎么",
                        "多少", "幾多", "介紹", "介绍"};
    l.chitchat = {"hi", "hello", "hey", "there", "thanks", "thank", "you", "bye", "goodbye", "good", "morning",
                  "evening", "night", "ok", "okay", "cool", "great", "nice", "yo", "please", "你好", "您好",
                  "早晨", "早安", "多謝", "多谢", "唔該", "謝謝", "谢谢", "拜拜", "哈囉", "嗨"};
    l.stopwords = {"a", "an", "the", "of", "in", "on", "at", "to", "for", "from", "by", "with", "about", "and",
                   "or", "me", "my", "i", "we", "us", "our", "your", "tell", "please", "give", "show", "one",
                   "be", "been", "its", "their", "this", "that", "these", "those", "some", "any", "there",
                   "的", "是", "了", "呢", "嘅", "係", "啲", "請", "请", "一下"};
    l.conjunctions = {"and", "or", "以及", "同埋", "並且", "并且"};
    l.tool_verbs = {{"calculate", "calculator"}, {"compute", "calculator"}, {"evaluate", "calculator"},
                    {"計算", "calculator"},     {"计算", "calculator"}};
    return l;
  }();
  return lex;
}

bool contains_marker(std::string_view s, std::string_view marker) {
  return find_marker(text::ascii_lower(s), marker) != std::string_view::npos;
}

Intent classify_intent(std::string_view query, const Session& session, const RuleSet& rules,
                       const Lexicon& lexicon) {
  if (rules.is_sensitive(query)) return Intent::sensitive;
  if (!session.turns.empty() &&
      (any_marker(query, lexicon.anaphora) || any_marker(query, lexicon.followup_phrases)))
    return Intent::followup;
  for (const auto& [verb, _] : lexicon.tool_verbs)
    if (contains_marker(query, verb)) return Intent::tool_task;
  if (any_marker(query, lexicon.interrogatives)) return Intent::factual;

  const std::set<std::string> chat(lexicon.chitchat.begin(), lexicon.chitchat.end());
  const auto stripped = remove_all(text::ascii_lower(query), lexicon.chitchat, " ");
  for (const auto& p : pieces(stripped))
    if (p.han || !chat.count(p.text)) return Intent::factual;
  return Intent::chitchat;
}

std::string salient_terms(const Session& session, const Lexicon& lexicon) {
  if (session.turns.empty()) return {};
  std::set<std::string> skip;
  for (const auto* list : {&lexicon.stopwords, &lexicon.interrogatives, &lexicon.anaphora, &lexicon.chitchat,
                           &lexicon.followup_phrases, &lexicon.conjunctions})
    for (const auto& w : *list)
      if (is_ascii(w)) skip.insert(text::ascii_lower(w));

  std::vector<std::string> han_skip;
  for (const auto* list : {&lexicon.stopwords, &lexicon.interrogatives, &lexicon.anaphora, &lexicon.chitchat,
                           &lexicon.followup_phrases, &lexicon.conjunctions})
    for (const auto& w : *list)
      if (!is_ascii(w)) han_skip.push_back(w);

  const auto cleaned = remove_all(session.turns.back().query, han_skip, " ");
  std::vector<std::string> kept;
  for (const auto& p : pieces(cleaned)) {
    if (p.han) {
      if (text::utf8_decode(p.text).size() >= 2) kept.push_back(p.text);
    } else if (p.text.size() >= 2 && !skip.count(text::ascii_lower(p.text))) {
      kept.push_back(p.text);
    }
  }
  return text::join(kept, " ");
}

namespace {

std::string substitute_anaphora(std::string_view query, const std::string& replacement,
                                const std::vector<std::string>& markers) {
  const auto sorted = by_length_desc(markers);
  const auto lowered = text::ascii_lower(query);
  std::string out;
  std::size_t i = 0;
  while (i < query.size()) {
    bool hit = false;
    for (const auto& m : sorted) {
      if (find_marker(lowered, m, i) == i) {
        out += replacement;
        i += m.size();
        hit = true;
        break;
      }
    }
    if (!hit) out += query[i++];
  }
  return out;
}

// Byte mask of positions outside brackets and quotes.
std::vector<bool> top_level(std::string_view s) {
  std::vector<bool> mask(s.size(), true);
  int depth = 0;
  bool quoted = false;
  static const std::vector<std::string> open = {"(", "[", "\xEF\xBC\x88", "\xE3\x80\x8C", "\xE3\x80\x8E"};
  static const std::vector<std::string> close = {")", "]", "\xEF\xBC\x89", "\xE3\x80\x8D", "\xE3\x80\x8F"};
  for (std::size_t i = 0; i < s.size();) {
    std::size_t step = 1;
    bool handled = false;
    if (s[i] == '"') {
      quoted = !quoted;
      mask[i] = false;
      handled = true;
    }
    for (const auto& o : open)
      if (!handled && s.substr(i, o.size()) == o) {
        ++depth;
        step = o.size();
        handled = true;
      }
    for (const auto& c : close)
      if (!handled && s.substr(i, c.size()) == c) {
        depth = std::max(0, depth - 1);
        step = c.size();
        handled = true;
      }
    const bool inside = depth > 0 || quoted || handled;
    for (std::size_t k = i; k < i + step && k < s.size(); ++k) mask[k] = !inside;
    i += step;
  }
  return mask;
}

}  // namespace

EnhancedQuery enhance(std::string_view query, const Session& session, const Lexicon& lexicon) {
  EnhancedQuery eq;
  eq.original = std::string(query);
  eq.lang = evalkit::detect_language(query);

  std::string rewritten = eq.original;
  const auto salient = salient_terms(session, lexicon);
  if (!salient.empty()) rewritten = substitute_anaphora(query, salient, lexicon.anaphora);
  if (text::trim(rewritten).empty()) rewritten = eq.original;
  eq.rewritten = rewritten;

  // trailing sentence punctuation is shared by every subquery
  std::string body(text::trim(rewritten));
  std::string trail;
  for (bool more = true; more;) {
    more = false;
    for (const auto& t : kTrailing)
      if (body.size() > t.size() && body.compare(body.size() - t.size(), t.size(), t) == 0) {
        trail.insert(0, t);
        body.resize(body.size() - t.size());
        more = true;
      }
  }

  const auto mask = top_level(body);
  const auto lowered = text::ascii_lower(body);
  std::vector<std::string> parts;
  std::size_t start = 0;
  std::size_t pos = 0;
  while (parts.size() + 1 < EnhancedQuery::kMaxSubqueries) {
    std::size_t best = std::string::npos, best_len = 0;
    for (const auto& c : lexicon.conjunctions) {
      for (auto p = find_marker(lowered, c, pos); p != std::string::npos; p = find_marker(lowered, c, p + 1)) {
        if (!mask[p]) continue;
        const auto len = text::ascii_lower(c).size();
        if (p < best || (p == best && len > best_len)) {
          best = p;
          best_len = len;
        }
        break;
      }
    }
    if (best == std::string::npos) break;
    const auto left = text::trim(std::string_view(body).substr(start, best - start));
    const auto right = text::trim(std::string_view(body).substr(best + best_len));
    if (left.empty() || right.empty()) {
      pos = best + 1;
      continue;
    }
    parts.emplace_back(left);
    start = best + best_len;
    pos = start;
  }
  if (parts.empty()) {
    eq.subqueries = {eq.rewritten};
    return eq;
  }
  parts.emplace_back(text::trim(std::string_view(body).substr(start)));
  for (auto& p : parts) eq.subqueries.push_back(p + trail);
  return eq;
}

}  // namespace align::pipeline
