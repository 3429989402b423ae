#include "mstate/errors.hpp"
#include "mstate/mgf.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace mstate;
using mstate::testing::rel_error;

namespace {

struct Fixture {
    ModelSpec model;
    PaymentSet payments;
};

// Alive -> dead at constant rate mu; rate b paid while alive, c paid on death.
Fixture two_state(double mu, double b, double c, double r) {
    Fixture f;
    f.model.states = {"alive", "dead"};
    f.model.horizon = 10.0;
    f.model.interest = TimeFunction::constant(r);
    f.model.intensities = {{0, 1, TimeFunction::constant(mu)}};
    f.payments.names = {"all"};
    f.payments.sojourn = {{0, 0, TimeFunction::constant(b)}};
    f.payments.transition = {{0, 0, 1, TimeFunction::constant(c)}};
    return f;
}

} // namespace

TEST_CASE("theta zero gives the transition probabilities") {
    const auto& d = mstate::testing::disability();
    const Matrix F = mgf(d.model, d.payments, Vector::Zero(3), 10.0, 70.0);
    CHECK(rel_error(F, transition_probabilities(d.model, 10.0, 70.0)) <= 1e-12);
}

TEST_CASE("closed form without interest") {
    const double mu = 0.3, b = 0.5, c = 2.0, L = 6.0;
    const Fixture f = two_state(mu, b, c, 0.0);
    for (double th : {-0.4, 0.25, 0.7}) {
        const Matrix F = mgf(f.model, f.payments, Vector::Constant(1, th), 1.0, 1.0 + L);
        const double a = th * b - mu;
        const double f00 = std::exp(a * L);
        const double f01 = mu * std::exp(th * c) * (std::exp(a * L) - 1.0) / a;
        CHECK(rel_error(F(0, 0), f00) <= 1e-10);
        CHECK(rel_error(F(0, 1), f01) <= 1e-10);
        CHECK(F(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(F(1, 0) == 0.0);
    }
}

TEST_CASE("derivative in theta gives the first moment") {
    const double mu = 0.3, b = 0.5, c = 2.0, r = 0.04, L = 6.0;
    const Fixture f = two_state(mu, b, c, r);
    const double eps = 1e-4;
    const double up = mgf(f.model, f.payments, Vector::Constant(1, eps), 0.0, L).row(0).sum();
    const double dn = mgf(f.model, f.payments, Vector::Constant(1, -eps), 0.0, L).row(0).sum();
    // E[U] = (b + mu c) (1 - exp(-(mu + r) L)) / (mu + r).
    const double mean = (b + mu * c) * (1.0 - std::exp(-(mu + r) * L)) / (mu + r);
    CHECK(rel_error((up - dn) / (2.0 * eps), mean) <= 1e-7);
}

TEST_CASE("large exponents are reported") {
    const Fixture f = two_state(0.3, 0.5, 2.0, 0.0);
    CHECK_THROWS_AS(mgf(f.model, f.payments, Vector::Constant(1, 400.0), 0.0, 5.0), NumericalError);
    CHECK_THROWS_AS(mgf(f.model, f.payments, Vector::Zero(2), 0.0, 5.0), ConfigError);
}

TEST_CASE("PDE residual is small on a constant model") {
    const Fixture f = two_state(0.3, 0.5, 2.0, 0.03);
    std::vector<double> s;
    for (int q = 1; q < 10; ++q) s.push_back(q);
    const auto res = mgf_pde_residual(f.model, f.payments, Vector::Constant(1, 0.2), s, 10.0, 1.0 / 512.0);
    REQUIRE(res.size() == s.size());
    for (const auto& r : res) {
        CHECK_FALSE(r.excluded);
        CHECK(r.residual <= 1e-6);
    }
}

TEST_CASE("serial and parallel residual sweeps agree") {
    const auto& d = mstate::testing::disability();
    const Vector theta{{0.3, 0.2, 0.4}};
    const std::vector<double> s{1.0, 7.0, 30.0, 31.5};
    const auto a = mgf_pde_residual(d.model, d.payments, theta, s, 70.0, 1.0 / 64.0, Scheme::MidpointExp, 1e-4, true);
    const auto b = mgf_pde_residual(d.model, d.payments, theta, s, 70.0, 1.0 / 64.0, Scheme::MidpointExp, 1e-4, false);
    for (std::size_t q = 0; q < s.size(); ++q) {
        CHECK(a[q].residual == b[q].residual);
        CHECK(a[q].excluded == b[q].excluded);
    }
}

TEST_CASE("points next to a breakpoint are excluded") {
    Fixture f = two_state(0.3, 0.5, 2.0, 0.03);
    f.payments.sojourn = {{0, 0, parse_timefun("0.5 * ind(t < 5)")}};
    const double h = 1.0 / 256.0;
    const auto res = mgf_pde_residual(f.model, f.payments, Vector::Constant(1, 0.2), {3.0, 5.0, 5.0 + h / 2, 7.0},
                                      10.0, h);
    CHECK_FALSE(res[0].excluded);
    CHECK(res[1].excluded);
    CHECK(res[2].excluded);
    CHECK_FALSE(res[3].excluded);
    CHECK(res[0].residual <= 1e-6);
    CHECK(res[3].residual <= 1e-6);
}
