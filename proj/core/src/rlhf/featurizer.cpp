#include "align/rlhf/featurizer.hpp"

#include "align/error.hpp"
#include "align/text.hpp"

namespace align::rlhf {

Featurizer::Featurizer(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) throw InvalidArgument("featurizer dimension must be positive");
}

std::size_t Featurizer::bucket(std::string_view token, std::size_t dim) {
  return static_cast<std::size_t>(text::fnv1a(token) % dim);
}

FeatureVector Featurizer::operator()(const Prompt& /*prompt*/, const ResponseText& response) const {
  FeatureVector f(dim_, 0.0);
  for (const auto& tok : text::split_ws(text::ascii_lower(response.text))) f[bucket(tok, dim_)] += 1.0;
  return f;
}

std::string Featurizer::id() const { return "hashed-bow-fnv1a64:d=" + std::to_string(dim_); }

}  // namespace align::rlhf
