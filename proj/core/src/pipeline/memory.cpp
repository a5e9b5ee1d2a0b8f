#include "align/pipeline/memory.hpp"

#include <algorithm>

namespace align::pipeline {

void Session::append(Turn turn) {
  turns.push_back(std::move(turn));
  if (turns.size() > memory_budget)
    turns.erase(turns.begin(), turns.begin() + static_cast<std::ptrdiff_t>(turns.size() - memory_budget));
}

std::string recall(const Session& session, std::size_t k) {
  const std::size_t n = std::min(k, session.turns.size());
  std::string out;
  for (std::size_t i = session.turns.size() - n; i < session.turns.size(); ++i) {
    out += "User: " + session.turns[i].query + "\n";
    out += "Assistant: " + session.turns[i].answer + "\n";
  }
  return out;
}

}  // namespace align::pipeline
