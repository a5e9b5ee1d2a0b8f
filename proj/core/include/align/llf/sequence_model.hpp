#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace align::llf {

inline constexpr std::string_view kEndToken = "</s>";

/// Token inventory; id 0 is always the end token.
class Vocabulary {
public:
  Vocabulary();
  /// Builds from tokens in the given order, skipping duplicates and the end
  /// token.
  explicit Vocabulary(std::span<const std::string> tokens);

  int add(const std::string& token);
  std::optional<int> find(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> ids_;
};

/// Conditional categorical sequence model
///   P(token_t | context, token_{t-1})
/// where `context` is a 64-bit hash of the conditioning inputs.
///
/// Probabilities come from additively smoothed counts, (c + alpha) / (n + alpha V).
/// Lookup order: explicit table for (context, prev), then counts for
/// (context, prev), then counts for prev alone, then unigram counts, then
/// uniform. All levels are smoothed with the same alpha.
class SequenceModel {
public:
  static constexpr int kBegin = -1;

  SequenceModel() = default;
  SequenceModel(Vocabulary vocab, double alpha, std::size_t max_length);

  /// Uniform over the vocabulary at every step.
  static SequenceModel uniform(Vocabulary vocab, std::size_t max_length = 32);

  struct Example {
    std::uint64_t context;
    std::vector<int> tokens;  // end token is appended during counting
  };
  void count(const Example& example);

  /// Installs an explicit conditional; must be normalized within 1e-9.
  void set_distribution(std::uint64_t context, int prev, std::vector<double> probs);

  std::vector<double> distribution(std::uint64_t context, int prev) const;
  double log_prob(std::uint64_t context, int prev, int token) const;

  /// Sum of log-probabilities of `tokens` (the end token is not scored).
  double sequence_log_prob(std::uint64_t context, std::span<const int> tokens) const;

  /// Greedy (lowest id wins ties) when `seed` is empty, otherwise sampled
  /// with a seeded mt19937_64. Stops at the end token or max_length.
  std::vector<int> decode(std::uint64_t context, std::optional<std::uint64_t> seed = {}) const;

  const Vocabulary& vocab() const noexcept { return vocab_; }
  double alpha() const noexcept { return alpha_; }
  std::size_t max_length() const noexcept { return max_length_; }

  nlohmann::json to_json() const;
  static SequenceModel from_json(const nlohmann::json& j);

  bool operator==(const SequenceModel&) const = default;

private:
  using Counts = std::map<int, double>;
  struct Table {
    Counts counts;
    double total = 0.0;
    bool operator==(const Table&) const = default;
  };

  std::vector<double> smoothed(const Table& t) const;

  Vocabulary vocab_;
  double alpha_ = 0.1;
  std::size_t max_length_ = 32;
  std::map<std::pair<std::uint64_t, int>, Table> full_;
  std::map<int, Table> by_prev_;
  Table unigram_;
  std::map<std::pair<std::uint64_t, int>, std::vector<double>> explicit_;
};

}  // namespace align::llf
