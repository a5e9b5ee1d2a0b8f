#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "align/types.hpp"

namespace align::rlhf {

using FeatureVector = std::vector<double>;

/// Hashed bag-of-tokens over the response text.
///
/// The response is ASCII-lowercased and split on whitespace; each token adds
/// 1.0 to component `fnv1a64(token) mod dim`. The prompt does not contribute:
/// rewards are only ever compared between responses to the same prompt.
class Featurizer {
public:
  static constexpr std::size_t kDefaultDim = 256;

  explicit Featurizer(std::size_t dim = kDefaultDim);

  FeatureVector operator()(const Prompt& prompt, const ResponseText& response) const;

  std::size_t dim() const noexcept { return dim_; }
  std::string id() const;

  static std::size_t bucket(std::string_view token, std::size_t dim);

private:
  std::size_t dim_;
};

}  // namespace align::rlhf
