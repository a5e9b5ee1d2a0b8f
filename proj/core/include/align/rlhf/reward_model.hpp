#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace align::rlhf {

enum class ScorerKind { linear, mlp };

/// r_phi(x, y) over a fixed-dimension feature vector.
///
/// Linear: params = w (d entries), score = w . f.
/// MLP: params = [W1 (hidden x d, row-major), b1 (hidden), w2 (hidden), b2],
///      score = w2 . tanh(W1 f + b1) + b2.
struct RewardModel {
  ScorerKind kind = ScorerKind::linear;
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::vector<double> params;
  std::string featurizer_id;

  static RewardModel linear(std::size_t dim, std::string featurizer_id = {});
  /// Weights drawn uniformly from [-1/sqrt(d), 1/sqrt(d)] with a seeded
  /// mt19937_64; biases start at zero.
  static RewardModel mlp(std::size_t dim, std::size_t hidden, std::uint64_t seed,
                         std::string featurizer_id = {});

  double score(std::span<const double> features) const;

  /// grad += coeff * d score / d params.
  void add_score_gradient(std::span<const double> features, double coeff,
                          std::span<double> grad) const;

  std::size_t param_count() const noexcept { return params.size(); }
};

}  // namespace align::rlhf
