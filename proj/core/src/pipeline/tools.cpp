#include "align/pipeline/tools.hpp"

#include <charconv>
#include <cmath>

#include "align/error.hpp"
#include "align/text.hpp"

namespace align::pipeline {

bool is_known_tool(std::string_view name) {
  return name == kCalculator || name == kLocalSearch || name == kExternalSearch;
}

std::vector<ToolInvocation> plan_tools(Intent intent, const EnhancedQuery& eq, const ToolPlanConfig& config,
                                       const Lexicon& lexicon) {
  std::vector<ToolInvocation> plan;
  switch (intent) {
    case Intent::factual:
    case Intent::followup:
      for (const auto& q : eq.subqueries) plan.push_back({std::string(kLocalSearch), q});
      if (config.search_enabled)
        for (const auto& q : eq.subqueries) plan.push_back({std::string(kExternalSearch), q});
      break;
    case Intent::tool_task: {
      const auto& verbs = config.tool_verbs.empty() ? lexicon.tool_verbs : config.tool_verbs;
      for (const auto& [verb, tool] : verbs)
        if (contains_marker(eq.rewritten, verb)) {
          plan.push_back({tool, eq.rewritten});
          break;
        }
      break;
    }
    case Intent::chitchat:
    case Intent::sensitive:
      break;
  }
  return plan;
}

namespace {

class Parser {
public:
  explicit Parser(std::string_view s) : s_(s) {}

  double parse() {
    const double v = expr();
    skip();
    if (i_ != s_.size()) fail("unexpected '" + std::string(1, s_[i_]) + "'");
    return v;
  }

private:
  [[noreturn]] void fail(const std::string& why) const { throw InvalidArgument("bad expression: " + why); }

  void skip() {
    while (i_ < s_.size() && s_[i_] == ' ') ++i_;
  }

  bool eat(char c) {
    skip();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }

  double expr() {
    double v = term();
    for (;;) {
      if (eat('+'))
        v += term();
      else if (eat('-'))
        v -= term();
      else
        return v;
    }
  }

  double term() {
    double v = power();
    for (;;) {
      if (eat('*')) {
        v *= power();
      } else if (eat('/')) {
        const double d = power();
        if (d == 0.0) fail("division by zero");
        v /= d;
      } else {
        return v;
      }
    }
  }

  double power() {
    const double base = unary();
    if (eat('^')) return std::pow(base, power());
    return base;
  }

  double unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    return atom();
  }

  double atom() {
    if (eat('(')) {
      const double v = expr();
      if (!eat(')')) fail("missing ')'");
      return v;
    }
    skip();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s_.data() + i_, s_.data() + s_.size(), v);
    if (ec != std::errc() || ptr == s_.data() + i_) fail("number expected");
    i_ = static_cast<std::size_t>(ptr - s_.data());
    return v;
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

bool expr_char(char c) {
  return (c >= '0' && c <= '9') || c == '.' || c == '+' || c == '-' || c == '*' || c == '/' || c == '^' ||
         c == '(' || c == ')' || c == ' ';
}

}  // namespace

double evaluate_expression(std::string_view expression) {
  const double v = Parser(expression).parse();
  if (!std::isfinite(v)) throw InvalidArgument("bad expression: non-finite result");
  return v;
}

std::string format_number(double value) {
  if (value == 0.0) value = 0.0;  // drop negative zero
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

ToolResult run_calculator(const std::string& input) {
  ToolResult r{std::string(kCalculator), input, {}, false};
  std::string_view best;
  for (std::size_t i = 0; i < input.size();) {
    if (!expr_char(input[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < input.size() && expr_char(input[j])) ++j;
    const auto span = text::trim(std::string_view(input).substr(i, j - i));
    const bool has_digit = span.find_first_of("0123456789") != std::string_view::npos;
    if (has_digit && span.size() > best.size()) best = span;
    i = j;
  }
  if (best.empty()) {
    r.output = "no arithmetic expression found";
    return r;
  }
  try {
    r.output = std::string(best) + " = " + format_number(evaluate_expression(best));
    r.ok = true;
  } catch (const InvalidArgument& e) {
    r.output = e.what();
  }
  return r;
}

}  // namespace align::pipeline
