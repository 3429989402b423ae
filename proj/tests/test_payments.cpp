#include "mstate/errors.hpp"
#include "mstate/payments.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace mstate;

namespace {
const double kMu02At10 = 0.00652559586074357747;
const double kMu12At10 = 0.01305119172148715494;
} // namespace

TEST_CASE("sojourn vectors and transition matrices") {
    const auto& d = mstate::testing::disability();
    CHECK(sojourn_vector(d.model, d.payments, 1, 30.0) == Vector::Constant(3, 0.1).cwiseProduct(Vector{{1, 1, 0}}));
    CHECK(sojourn_vector(d.model, d.payments, 2, 30.0).isZero(0.0));
    CHECK(sojourn_vector(d.model, d.payments, 2, 10.0) == Vector{{0, 0.1, 0}});
    const Matrix B10 = transition_payment_matrix(d.model, d.payments, 0, 10.0);
    Matrix expect = Matrix::Zero(3, 3);
    expect(0, 2) = expect(1, 2) = 1.0;
    CHECK(B10 == expect);
    CHECK(transition_payment_matrix(d.model, d.payments, 0, 30.0).isZero(0.0));
    CHECK(transition_payment_matrix(d.model, d.payments, 0, 25.0).isZero(0.0));
}

TEST_CASE("reward matrix R") {
    const auto& d = mstate::testing::disability();
    const Matrix R = reward_matrix_R(d.model, d.payments, 0, 10.0);
    CHECK(R(0, 2) == doctest::Approx(kMu02At10).epsilon(1e-14));
    CHECK(R(1, 2) == doctest::Approx(kMu12At10).epsilon(1e-14));
    CHECK(R(0, 1) == 0.0);
    CHECK(R.diagonal().isZero(0.0));
    CHECK(R.row(2).isZero(0.0));

    const Matrix R3 = reward_matrix_R(d.model, d.payments, 2, 10.0);
    CHECK(R3(1, 1) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(R3(0, 0) == 0.0);

    for (double t : {3.0, 24.0, 26.0, 50.0}) {
        const RateSnapshot snap = take_snapshot(d.model, d.payments, t);
        for (int l = 0; l < 3; ++l) {
            Matrix off = snap.reward_R(l);
            off.diagonal().setZero();
            CHECK(off == snap.M.cwiseProduct(snap.B[static_cast<std::size_t>(l)]));
            CHECK(snap.reward_R(l).diagonal() == snap.b[static_cast<std::size_t>(l)]);
        }
    }
}

TEST_CASE("reward matrix C") {
    const auto& d = mstate::testing::disability();
    const Matrix C2 = reward_matrix_C(d.model, d.payments, MultiIndex{2, 0, 0}, 10.0);
    CHECK(C2(0, 2) == doctest::Approx(kMu02At10).epsilon(1e-14));
    CHECK(C2(1, 2) == doctest::Approx(kMu12At10).epsilon(1e-14));
    CHECK(C2(0, 1) == 0.0);
    CHECK(C2.diagonal().isZero(0.0));
    // No contract but the first pays on jumps.
    CHECK(reward_matrix_C(d.model, d.payments, MultiIndex{1, 1, 0}, 10.0).isZero(0.0));
    CHECK(reward_matrix_C(d.model, d.payments, MultiIndex{3, 0, 0}, 30.0).isZero(0.0));

    PaymentSet two;
    two.names = {"x", "y"};
    two.transition = {{0, 0, 1, TimeFunction::constant(2.0)}, {1, 0, 1, TimeFunction::constant(3.0)},
                      {1, 1, 0, TimeFunction::constant(5.0)}};
    ModelSpec m;
    m.states = {"a", "b"};
    m.horizon = 1.0;
    m.intensities = {{0, 1, TimeFunction::constant(0.5)}, {1, 0, TimeFunction::constant(0.25)}};
    const Matrix C = reward_matrix_C(m, two, MultiIndex{2, 1}, 0.0);
    CHECK(C(0, 1) == doctest::Approx(0.5 * 4.0 * 3.0));
    // 0^0 = 1 in the first factor, 0^2 = 0 overall.
    CHECK(C(1, 0) == 0.0);
    const Matrix C02 = reward_matrix_C(m, two, MultiIndex{0, 2}, 0.0);
    CHECK(C02(1, 0) == doctest::Approx(0.25 * 25.0));

    CHECK_THROWS_AS(reward_matrix_C(d.model, d.payments, MultiIndex{0, 0, 0}, 1.0), ConfigError);
    CHECK_THROWS_AS(reward_matrix_C(d.model, d.payments, MultiIndex{0, 1, 0}, 1.0), ConfigError);
}

TEST_CASE("aggregate and selection") {
    const auto& d = mstate::testing::disability();
    const PaymentSet total = aggregate(d.payments);
    CHECK(total.num_contracts() == 1);
    for (double t : {5.0, 30.0}) {
        Matrix sum = Matrix::Zero(3, 3);
        for (int l = 0; l < 3; ++l) sum += reward_matrix_R(d.model, d.payments, l, t);
        CHECK((reward_matrix_R(d.model, total, 0, t) - sum).cwiseAbs().maxCoeff() <= 1e-16);
    }
    const PaymentSet sel = select_contracts(d.payments, {2, 0});
    CHECK(sel.names == std::vector<std::string>{"disability annuity", "death benefit"});
    CHECK(reward_matrix_R(d.model, sel, 1, 10.0) == reward_matrix_R(d.model, d.payments, 0, 10.0));
}

TEST_CASE("payment validation") {
    const auto& d = mstate::testing::disability();
    PaymentSet bad = d.payments;
    bad.transition.push_back({0, 1, 1, TimeFunction::constant(1.0)});
    CHECK_THROWS_AS(validate_payments(d.model, bad), ValidationError);
    bad = d.payments;
    bad.sojourn.push_back({1, 3, TimeFunction::constant(1.0)});
    CHECK_THROWS_AS(validate_payments(d.model, bad), ValidationError);
    bad = d.payments;
    bad.sojourn.push_back({2, 0, parse_timefun("exp(40 * t)")});
    CHECK_THROWS_AS(validate_payments(d.model, bad), ValidationError);
}
