#include "mstate/errors.hpp"
#include "mstate/timefun.hpp"

#include <doctest.h>

#include <cctype>
#include <cmath>
#include <random>
#include <string>

using namespace mstate;

namespace {

// Straight-line evaluator working on the source text, used as an oracle for
// the tree-based evaluator.
class Direct {
public:
    Direct(std::string src, double t) : s_(std::move(src)), t_(t) {}
    double run() {
        const double v = expr();
        skip();
        REQUIRE(p_ == s_.size());
        return v;
    }

private:
    void skip() {
        while (p_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[p_]))) ++p_;
    }
    bool eat(const char* tok) {
        skip();
        const std::string k(tok);
        if (s_.compare(p_, k.size(), k) == 0) {
            p_ += k.size();
            return true;
        }
        return false;
    }
    double expr() {
        double v = term();
        for (;;) {
            if (eat("+")) v += term();
            else if (eat("-")) v -= term();
            else return v;
        }
    }
    double term() {
        double v = factor();
        for (;;) {
            if (eat("*")) v *= factor();
            else if (eat("/")) v /= factor();
            else return v;
        }
    }
    double factor() {
        const double b = base();
        if (eat("^")) return std::pow(b, factor());
        return b;
    }
    double base() {
        skip();
        if (eat("(")) {
            const double v = expr();
            REQUIRE(eat(")"));
            return v;
        }
        if (eat("-")) return -base();
        if (eat("exp(")) {
            const double v = expr();
            REQUIRE(eat(")"));
            return std::exp(v);
        }
        if (eat("ln(")) {
            const double v = expr();
            REQUIRE(eat(")"));
            return std::log(v);
        }
        if (eat("ind(")) {
            const double a = expr();
            bool r = false;
            if (eat("<=")) r = a <= expr();
            else if (eat(">=")) r = a >= expr();
            else if (eat("<")) r = a < expr();
            else if (eat(">")) r = a > expr();
            else FAIL("bad comparison");
            REQUIRE(eat(")"));
            return r ? 1.0 : 0.0;
        }
        if (eat("t")) return t_;
        std::size_t used = 0;
        const double v = std::stod(s_.substr(p_), &used);
        p_ += used;
        return v;
    }

    std::string s_;
    double t_;
    std::size_t p_ = 0;
};

const char* const kFormulas[] = {
    "(0.0004 + 10^(4.54 + 0.06*(t+40) - 10)) * ind(t <= 25)",
    "2.0058 * exp(-0.117*(t+40)) * ind(t <= 25)",
    "0.0005 + 10^(5.88 + 0.038*(t+40) - 10)",
    "(0.0005 + 10^(5.88 + 0.038*(t+40) - 10)) * (1 + ind(t <= 25))",
    "0.1 * ind(t >= 25)",
    "ln(1 + t) / (2 + t) - 3^2^0.5",
};

} // namespace

TEST_CASE("literal values of the disability intensities") {
    const auto mu01 = parse_timefun(kFormulas[0]);
    CHECK(mu01(0.0) == doctest::Approx(0.00127096358995608063751).epsilon(1e-14));
    const auto mu02 = parse_timefun(kFormulas[2]);
    CHECK(mu02(30.0) == doctest::Approx(0.0351736850452531639).epsilon(1e-14));
    CHECK(mu02(10.0) == doctest::Approx(0.00652559586074357747).epsilon(1e-14));
}

TEST_CASE("tree evaluator agrees with a direct interpreter") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 70.0);
    for (const char* src : kFormulas) {
        const auto f = parse_timefun(src);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double t = u(rng);
            const double ref = Direct(src, t).run();
            const double got = f(t);
            const double scale = std::max(std::abs(ref), 1e-300);
            worst = std::max(worst, std::abs(got - ref) / scale);
        }
        CHECK_MESSAGE(worst <= 1e-14, src);
    }
}

TEST_CASE("printing and re-parsing reproduces the function") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 70.0);
    for (const char* src : kFormulas) {
        const auto f = parse_timefun(src);
        const auto g = parse_timefun(f.to_string());
        CHECK(g.to_string() == f.to_string());
        CHECK(g.breakpoints() == f.breakpoints());
        for (int i = 0; i < 1000; ++i) {
            const double t = u(rng);
            REQUIRE(g(t) == f(t));
        }
    }
}

TEST_CASE("indicators are exact and produce breakpoints") {
    const auto f = parse_timefun("ind(t < 25)");
    CHECK(f(25.0) == 0.0);
    CHECK(f(24.5) == 1.0);
    CHECK(f(std::nextafter(25.0, 0.0)) == 1.0);
    const auto g = parse_timefun("ind(t >= 25) + ind(2*t - 10 > 0) + ind(t <= 25)");
    CHECK(g.breakpoints() == std::vector<double>{5.0, 25.0});
    CHECK(g.breakpoints_in(0.0, 70.0) == std::vector<double>{5.0, 25.0});
    CHECK(g.breakpoints_in(5.0, 25.0).empty());
    CHECK(g.breakpoints_in(4.0, 10.0) == std::vector<double>{5.0});
    CHECK(g(25.0) == 3.0);
}

TEST_CASE("constants") {
    CHECK(parse_timefun("0").is_zero());
    CHECK(parse_timefun("2.5").is_constant());
    CHECK_FALSE(parse_timefun("2 * 3").is_constant());
    CHECK_FALSE(parse_timefun("t").is_constant());
    CHECK(TimeFunction().is_zero());
    CHECK(TimeFunction::constant(2.5)(10.0) == 2.5);
    const auto f = parse_timefun("S * ind(t < 25)", {{"S", 4.0}});
    CHECK(f(1.0) == 4.0);
}

TEST_CASE("syntax errors") {
    CHECK_THROWS_AS(parse_timefun("foo(t)"), ParseError);
    try {
        parse_timefun("foo(t)");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("foo") != std::string::npos);
        CHECK(e.position() == 0);
    }
    CHECK_THROWS_AS(parse_timefun("1 +"), ParseError);
    CHECK_THROWS_AS(parse_timefun("(t"), ParseError);
    CHECK_THROWS_AS(parse_timefun("1.2.3"), ParseError);
    CHECK_THROWS_AS(parse_timefun("ind(t*t < 4)"), ParseError);
    CHECK_THROWS_AS(parse_timefun("S"), ParseError);
    CHECK_THROWS_AS(parse_timefun("t t"), ParseError);
}

TEST_CASE("domain errors") {
    CHECK_THROWS_AS(parse_timefun("ln(t - 1)")(0.5), DomainError);
    CHECK_THROWS_AS(parse_timefun("1 / (t - 2)")(2.0), DomainError);
    CHECK_THROWS_AS(parse_timefun("(t - 2)^0.5")(1.0), DomainError);
    CHECK_THROWS_AS(parse_timefun("exp(1000 * t)")(1.0), DomainError);
    CHECK(parse_timefun("(t - 2)^2")(1.0) == 1.0);
}
