#include "mstate/errors.hpp"
#include "mstate/markov.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace mstate;
using mstate::testing::rel_error;

namespace {

ModelSpec constant_model() {
    ModelSpec m;
    m.states = {"a", "b", "c"};
    m.horizon = 10.0;
    m.intensities = {{0, 1, TimeFunction::constant(0.3)},
                     {0, 2, TimeFunction::constant(0.05)},
                     {1, 0, TimeFunction::constant(0.2)},
                     {1, 2, TimeFunction::constant(0.1)}};
    return m;
}

// exp(A) by scaling, a 30-term series and squaring.
Matrix series_exp(const Matrix& a) {
    const int squarings = 10;
    const Matrix x = a / std::pow(2.0, squarings);
    Matrix term = Matrix::Identity(a.rows(), a.cols());
    Matrix sum = term;
    for (int k = 1; k <= 30; ++k) {
        term = term * x / k;
        sum += term;
    }
    for (int i = 0; i < squarings; ++i) sum = sum * sum;
    return sum;
}

} // namespace

TEST_CASE("intensity matrix rows sum to zero") {
    const auto& m = mstate::testing::disability().model;
    for (double t : {0.0, 12.3, 25.0, 40.0, 70.0}) {
        const Matrix M = intensity_matrix(m, t);
        CHECK(M.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-15);
        CHECK(M.row(2).isZero(0.0));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (i != j) CHECK(M(i, j) >= 0.0);
    }
    const Matrix M30 = intensity_matrix(m, 30.0);
    CHECK(M30(0, 2) == doctest::Approx(0.0351736850452531639).epsilon(1e-14));
    CHECK(M30(0, 1) == 0.0);
    CHECK(M30(1, 2) == doctest::Approx(0.0351736850452531639).epsilon(1e-14));
}

TEST_CASE("zero generator gives the identity") {
    MatrixFunction zero{3, [](double, Matrix& out) { out.setZero(3, 3); }, {}};
    CHECK(product_integral(zero, 0.0, 5.0).isIdentity(0.0));
}

TEST_CASE("constant generator matches the matrix exponential") {
    const ModelSpec m = constant_model();
    const Matrix M = intensity_matrix(m, 0.0);
    for (double len : {0.5, 3.0, 7.25}) {
        const Matrix ref = series_exp(M * len);
        CHECK(rel_error(transition_probabilities(m, 1.0, 1.0 + len), ref) <= 1e-8);
    }
}

TEST_CASE("two-state survival") {
    ModelSpec m;
    m.states = {"alive", "dead"};
    m.horizon = 20.0;
    m.intensities = {{0, 1, parse_timefun("0.01 + 0.002 * t")}};
    const Matrix P = transition_probabilities(m, 2.0, 15.0);
    const double cum = 0.01 * 13.0 + 0.001 * (15.0 * 15.0 - 2.0 * 2.0);
    CHECK(rel_error(P(0, 0), std::exp(-cum)) <= 1e-8);
    CHECK(P(1, 1) == 1.0);
    CHECK(P(1, 0) == 0.0);
}

TEST_CASE("split and Chapman-Kolmogorov") {
    const auto& m = mstate::testing::disability().model;
    const auto a = intensity_function(m);
    const Matrix whole = product_integral(a, 3.0, 60.0);
    for (double u : {10.0, 25.0, 33.5}) {
        const Matrix split = product_integral(a, 3.0, u) * product_integral(a, u, 60.0);
        CHECK(rel_error(split, whole) <= 1e-13);
    }
    const Matrix P = transition_probabilities(m, 0.0, 70.0);
    const Matrix ck = transition_probabilities(m, 0.0, 17.3) * transition_probabilities(m, 17.3, 70.0);
    CHECK(rel_error(ck, P) <= 1e-12);
    CHECK(transition_probabilities(m, 5.0, 5.0).isIdentity(0.0));
}

TEST_CASE("probabilities are stochastic") {
    const auto& m = mstate::testing::disability().model;
    const auto curves = transition_probability_curves(m, 0.0, 70.0, 1.0 / 16.0);
    CHECK(curves.times.front() == 0.0);
    CHECK(curves.times.back() == 70.0);
    for (const auto& p : curves.p) {
        CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
        CHECK(p.minCoeff() >= 0.0);
        CHECK(p(2, 2) == 1.0);
    }
}

TEST_CASE("convergence order in the step size") {
    const ModelSpec m = constant_model();
    const Matrix ref = series_exp(intensity_matrix(m, 0.0) * 4.0);
    // Time-varying model: compare successive halvings against a fine solve.
    ModelSpec v;
    v.states = {"a", "b"};
    v.horizon = 10.0;
    v.intensities = {{0, 1, parse_timefun("0.2 + 0.1 * t")}, {1, 0, parse_timefun("0.05 * exp(0.1 * t)")}};
    const Matrix fine = transition_probabilities(v, 0.0, 10.0, 1.0 / 2048.0);
    const double e1 = (transition_probabilities(v, 0.0, 10.0, 0.25) - fine).cwiseAbs().maxCoeff();
    const double e2 = (transition_probabilities(v, 0.0, 10.0, 0.125) - fine).cwiseAbs().maxCoeff();
    CHECK(e1 / e2 >= 3.5);
    const double euler1 = (transition_probabilities(v, 0.0, 10.0, 1.0 / 64.0, Scheme::Euler) - fine).cwiseAbs().maxCoeff();
    const double euler2 = (transition_probabilities(v, 0.0, 10.0, 1.0 / 128.0, Scheme::Euler) - fine).cwiseAbs().maxCoeff();
    CHECK(euler1 / euler2 == doctest::Approx(2.0).epsilon(0.1));
    CHECK(rel_error(transition_probabilities(m, 0.0, 4.0, 1.0), ref) <= 1e-6);
}

TEST_CASE("grid contains every breakpoint") {
    const std::vector<double> bp{0.3, 2.0};
    const TimeGrid g = make_grid(0.1, 2.5, 0.5, bp);
    CHECK(g.nodes == std::vector<double>{0.1, 0.3, 0.5, 1.0, 1.5, 2.0, 2.5});
    CHECK(g.find(1.5) == 4);
    CHECK(g.find(1.4) == TimeGrid::npos);
    CHECK_THROWS_AS(make_grid(0.0, 1.0, 0.0, bp), ConfigError);
}

TEST_CASE("validation") {
    ModelSpec m;
    m.states = {"a", "b"};
    m.horizon = 10.0;
    m.intensities = {{0, 1, parse_timefun("1 - 0.2 * t")}};
    try {
        validate_model(m);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("t=") != std::string::npos);
    }
    m.intensities = {{0, 1, TimeFunction::constant(1.0)}, {0, 1, TimeFunction::constant(1.0)}};
    CHECK_THROWS_AS(validate_model(m), ValidationError);
    m.intensities = {{0, 2, TimeFunction::constant(1.0)}};
    CHECK_THROWS_AS(validate_model(m), ValidationError);
    CHECK_NOTHROW(validate_model(constant_model()));
}

TEST_CASE("discount table") {
    const TimeFunction r = parse_timefun("0.01 + 0.002 * t + 0.01 * ind(t >= 5)");
    const TimeGrid g = make_grid(0.0, 10.0, 0.5, r.breakpoints());
    const DiscountTable d(r, g);
    const double exact = 0.01 * 7.3 + 0.001 * (8.3 * 8.3 - 1.0) + 0.01 * 3.3;
    CHECK(d.integral(1.0, 8.3) == doctest::Approx(exact).epsilon(1e-13));
    CHECK(d.discount(2.0, 2.0) == 1.0);
}
