#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace align::pipeline {

struct Turn {
  std::string query;
  std::string answer;

  bool operator==(const Turn&) const = default;
};

struct Session {
  std::string id;
  std::vector<Turn> turns;
  std::size_t memory_budget = 8;

  /// Appends and drops the oldest turns beyond memory_budget.
  void append(Turn turn);
};

/// The last min(k, turns) turns, oldest first, as "User: ...\nAssistant: ...\n".
std::string recall(const Session& session, std::size_t k);

}  // namespace align::pipeline
