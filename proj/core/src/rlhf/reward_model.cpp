#include "align/rlhf/reward_model.hpp"

#include <cassert>
#include <cmath>
#include <random>

#include "align/error.hpp"

namespace align::rlhf {

RewardModel RewardModel::linear(std::size_t dim, std::string featurizer_id) {
  RewardModel m;
  m.kind = ScorerKind::linear;
  m.input_dim = dim;
  m.params.assign(dim, 0.0);
  m.featurizer_id = std::move(featurizer_id);
  return m;
}

RewardModel RewardModel::mlp(std::size_t dim, std::size_t hidden, std::uint64_t seed,
                             std::string featurizer_id) {
  if (hidden == 0) throw InvalidArgument("hidden width must be positive");
  RewardModel m;
  m.kind = ScorerKind::mlp;
  m.input_dim = dim;
  m.hidden = hidden;
  m.params.assign(hidden * dim + 2 * hidden + 1, 0.0);
  m.featurizer_id = std::move(featurizer_id);

  // Uniform doubles built from raw engine output so the draw is identical
  // across standard library implementations.
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double scale) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * scale;
  };
  const double s1 = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t i = 0; i < hidden * dim; ++i) m.params[i] = uniform(s1);
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (std::size_t h = 0; h < hidden; ++h) m.params[hidden * dim + hidden + h] = uniform(s2);
  return m;
}

double RewardModel::score(std::span<const double> f) const {
  if (f.size() != input_dim) throw InvalidArgument("feature dimension mismatch");
  if (kind == ScorerKind::linear) {
    double s = 0.0;
    for (std::size_t i = 0; i < input_dim; ++i) s += params[i] * f[i];
    return s;
  }
  const double* w1 = params.data();
  const double* b1 = w1 + hidden * input_dim;
  const double* w2 = b1 + hidden;
  const double b2 = w2[hidden];
  double s = b2;
  for (std::size_t h = 0; h < hidden; ++h) {
    double a = b1[h];
    const double* row = w1 + h * input_dim;
    for (std::size_t i = 0; i < input_dim; ++i) a += row[i] * f[i];
    s += w2[h] * std::tanh(a);
  }
  return s;
}

void RewardModel::add_score_gradient(std::span<const double> f, double coeff,
                                     std::span<double> grad) const {
  assert(grad.size() == params.size());
  if (f.size() != input_dim) throw InvalidArgument("feature dimension mismatch");
  if (kind == ScorerKind::linear) {
    for (std::size_t i = 0; i < input_dim; ++i) grad[i] += coeff * f[i];
    return;
  }
  const double* w1 = params.data();
  const double* b1 = w1 + hidden * input_dim;
  const double* w2 = b1 + hidden;
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + hidden * input_dim;
  double* g_w2 = g_b1 + hidden;
  for (std::size_t h = 0; h < hidden; ++h) {
    double a = b1[h];
    const double* row = w1 + h * input_dim;
    for (std::size_t i = 0; i < input_dim; ++i) a += row[i] * f[i];
    const double t = std::tanh(a);
    g_w2[h] += coeff * t;
    const double da = coeff * w2[h] * (1.0 - t * t);
    g_b1[h] += da;
    double* g_row = g_w1 + h * input_dim;
    for (std::size_t i = 0; i < input_dim; ++i) g_row[i] += da * f[i];
  }
  g_w2[hidden] += coeff;
}

}  // namespace align::rlhf
