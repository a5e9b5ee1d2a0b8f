#include "align/llf/sequence_model.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "align/error.hpp"

namespace align::llf {

Vocabulary::Vocabulary() { add(std::string(kEndToken)); }

Vocabulary::Vocabulary(std::span<const std::string> tokens) : Vocabulary() {
  for (const auto& t : tokens) add(t);
}

int Vocabulary::add(const std::string& token) {
  if (auto it = ids_.find(token); it != ids_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  if (auto it = ids_.find(token); it != ids_.end()) return it->second;
  return std::nullopt;
}

SequenceModel::SequenceModel(Vocabulary vocab, double alpha, std::size_t max_length)
    : vocab_(std::move(vocab)), alpha_(alpha), max_length_(max_length) {
  if (!(alpha_ >= 0.0) || !std::isfinite(alpha_)) throw InvalidArgument("smoothing must be non-negative");
  if (max_length_ == 0) throw InvalidArgument("max length must be positive");
}

SequenceModel SequenceModel::uniform(Vocabulary vocab, std::size_t max_length) {
  // No counts anywhere: every lookup falls through to the uniform level.
  return SequenceModel(std::move(vocab), 0.0, max_length);
}

void SequenceModel::count(const Example& example) {
  const int v = static_cast<int>(vocab_.size());
  int prev = kBegin;
  auto bump = [&](int tok) {
    if (tok < 0 || tok >= v) throw InvalidArgument("token id outside vocabulary");
    auto& f = full_[{example.context, prev}];
    f.counts[tok] += 1.0;
    f.total += 1.0;
    auto& p = by_prev_[prev];
    p.counts[tok] += 1.0;
    p.total += 1.0;
    unigram_.counts[tok] += 1.0;
    unigram_.total += 1.0;
    prev = tok;
  };
  for (int tok : example.tokens) bump(tok);
  bump(0);
}

void SequenceModel::set_distribution(std::uint64_t context, int prev, std::vector<double> probs) {
  if (probs.size() != vocab_.size()) throw InvalidArgument("distribution size does not match vocabulary");
  double s = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw InvalidArgument("negative probability");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument("distribution is not normalized");
  explicit_[{context, prev}] = std::move(probs);
}

std::vector<double> SequenceModel::smoothed(const Table& t) const {
  const double v = static_cast<double>(vocab_.size());
  const double denom = t.total + alpha_ * v;
  std::vector<double> out(vocab_.size(), alpha_ / denom);
  for (const auto& [tok, c] : t.counts) out[static_cast<std::size_t>(tok)] = (c + alpha_) / denom;
  return out;
}

std::vector<double> SequenceModel::distribution(std::uint64_t context, int prev) const {
  if (auto it = explicit_.find({context, prev}); it != explicit_.end()) return it->second;
  if (auto it = full_.find({context, prev}); it != full_.end()) return smoothed(it->second);
  if (auto it = by_prev_.find(prev); it != by_prev_.end()) return smoothed(it->second);
  if (unigram_.total > 0.0) return smoothed(unigram_);
  return std::vector<double>(vocab_.size(), 1.0 / static_cast<double>(vocab_.size()));
}

double SequenceModel::log_prob(std::uint64_t context, int prev, int token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= vocab_.size())
    throw InvalidArgument("token id outside vocabulary");
  return std::log(distribution(context, prev)[static_cast<std::size_t>(token)]);
}

double SequenceModel::sequence_log_prob(std::uint64_t context, std::span<const int> tokens) const {
  double lp = 0.0;
  int prev = kBegin;
  for (int tok : tokens) {
    lp += log_prob(context, prev, tok);
    prev = tok;
  }
  return lp;
}

std::vector<int> SequenceModel::decode(std::uint64_t context, std::optional<std::uint64_t> seed) const {
  std::vector<int> out;
  std::optional<std::mt19937_64> rng;
  if (seed) rng.emplace(*seed);
  int prev = kBegin;
  while (out.size() < max_length_) {
    const auto dist = distribution(context, prev);
    int tok = 0;
    if (rng) {
      const double u = static_cast<double>((*rng)() >> 11) * 0x1.0p-53;
      double acc = 0.0;
      tok = static_cast<int>(dist.size()) - 1;
      for (std::size_t i = 0; i < dist.size(); ++i) {
        acc += dist[i];
        if (u < acc) {
          tok = static_cast<int>(i);
          break;
        }
      }
    } else {
      for (std::size_t i = 1; i < dist.size(); ++i)
        if (dist[i] > dist[static_cast<std::size_t>(tok)]) tok = static_cast<int>(i);
    }
    if (tok == 0) break;
    out.push_back(tok);
    prev = tok;
  }
  return out;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

}  // namespace

nlohmann::json SequenceModel::to_json() const {
  using nlohmann::json;
  auto table_json = [](const Table& t) {
    json counts = json::array();
    for (const auto& [tok, c] : t.counts) counts.push_back({tok, c});
    return json{{"total", t.total}, {"counts", counts}};
  };
  json full = json::array();
  for (const auto& [key, t] : full_) {
    auto row = table_json(t);
    row["context"] = hex64(key.first);
    row["prev"] = key.second;
    full.push_back(row);
  }
  json by_prev = json::array();
  for (const auto& [prev, t] : by_prev_) {
    auto row = table_json(t);
    row["prev"] = prev;
    by_prev.push_back(row);
  }
  json explicit_rows = json::array();
  for (const auto& [key, probs] : explicit_)
    explicit_rows.push_back({{"context", hex64(key.first)}, {"prev", key.second}, {"probs", probs}});
  return {{"vocab", vocab_.tokens()}, {"alpha", alpha_},          {"max_length", max_length_},
          {"full", full},             {"by_prev", by_prev},       {"unigram", table_json(unigram_)},
          {"explicit", explicit_rows}};
}

SequenceModel SequenceModel::from_json(const nlohmann::json& j) {
  const auto tokens = j.at("vocab").get<std::vector<std::string>>();
  if (tokens.empty() || tokens.front() != kEndToken) throw ParseError("vocabulary must start with the end token");
  SequenceModel m(Vocabulary(std::span<const std::string>(tokens).subspan(1)), j.at("alpha").get<double>(),
                  j.at("max_length").get<std::size_t>());
  if (m.vocab_.size() != tokens.size()) throw ParseError("duplicate vocabulary entries");
  auto read_table = [](const nlohmann::json& row) {
    Table t;
    t.total = row.at("total").get<double>();
    for (const auto& c : row.at("counts")) t.counts[c.at(0).get<int>()] = c.at(1).get<double>();
    return t;
  };
  for (const auto& row : j.at("full"))
    m.full_[{parse_hex64(row.at("context").get<std::string>()), row.at("prev").get<int>()}] = read_table(row);
  for (const auto& row : j.at("by_prev")) m.by_prev_[row.at("prev").get<int>()] = read_table(row);
  m.unigram_ = read_table(j.at("unigram"));
  for (const auto& row : j.value("explicit", nlohmann::json::array()))
    m.explicit_[{parse_hex64(row.at("context").get<std::string>()), row.at("prev").get<int>()}] =
        row.at("probs").get<std::vector<double>>();
  return m;
}

}  // namespace align::llf
