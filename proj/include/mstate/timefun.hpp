#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace mstate {

// Piecewise-analytic scalar function of time, built from a small closed
// expression language:
//
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := base ("^" factor)?
//   base   := number | "t" | "(" expr ")" | "-" base
//           | "exp" "(" expr ")" | "ln" "(" expr ")" | "ind" "(" cmp ")"
//   cmp    := expr ("<"|"<="|">"|">=") expr      (both sides affine in t)
//
// Indicators evaluate to exactly 0 or 1 and their thresholds become
// breakpoints. Values are immutable and cheap to copy.
class TimeFunction {
public:
    struct Node;

    // The zero function.
    TimeFunction();

    static TimeFunction constant(double value);

    double operator()(double t) const { return evaluate(t); }
    double evaluate(double t) const;

    // Every indicator threshold, sorted and deduplicated.
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    // Breakpoints strictly inside (s, t).
    std::vector<double> breakpoints_in(double s, double t) const;

    // True when the expression is a literal constant.
    bool is_constant() const;
    bool is_zero() const;

    // Fully parenthesised source text that re-parses to an identical tree.
    std::string to_string() const;

private:
    friend TimeFunction parse_timefun(std::string_view,
                                      const std::map<std::string, double>&);
    explicit TimeFunction(std::shared_ptr<const Node> root);

    std::shared_ptr<const Node> root_;
    std::vector<double> breakpoints_;
};

// Named numeric constants a model may reference (e.g. benefit levels).
using ConstantTable = std::map<std::string, double>;

// Throws ParseError on syntax errors, unknown identifiers, malformed numbers
// and non-affine comparison operands.
TimeFunction parse_timefun(std::string_view src, const ConstantTable& constants = {});

} // namespace mstate
