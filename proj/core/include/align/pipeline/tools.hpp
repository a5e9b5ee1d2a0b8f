#pragma once

#include <map>
#include <string>
#include <vector>

#include "align/pipeline/query.hpp"

namespace align::pipeline {

inline constexpr std::string_view kLocalSearch = "local_search";
inline constexpr std::string_view kExternalSearch = "external_search";
inline constexpr std::string_view kCalculator = "calculator";

struct ToolInvocation {
  std::string tool;
  std::string input;

  bool operator==(const ToolInvocation&) const = default;
};

struct ToolResult {
  std::string tool;
  std::string input;
  std::string output;
  bool ok = true;
};

struct ToolPlanConfig {
  bool search_enabled = false;
  std::map<std::string, std::string> tool_verbs;  // verb -> tool; empty uses the lexicon's
};

/// Names accepted in a verb table.
bool is_known_tool(std::string_view name);

/// factual/followup -> local_search per subquery, plus external_search per
/// subquery when search is enabled; tool_task -> the tool of the first verb
/// found; chitchat/sensitive -> nothing.
std::vector<ToolInvocation> plan_tools(Intent intent, const EnhancedQuery& eq, const ToolPlanConfig& config,
                                       const Lexicon& lexicon = Lexicon::defaults());

/// Evaluates + - * / ^ and parentheses over decimal numbers.
/// Throws InvalidArgument on malformed input or division by zero.
double evaluate_expression(std::string_view expression);

/// Finds the longest arithmetic span in `text` and evaluates it.
ToolResult run_calculator(const std::string& text);

/// Shortest round-trip decimal form.
std::string format_number(double value);

}  // namespace align::pipeline
