#include "mstate/block.hpp"
#include "mstate/errors.hpp"
#include "mstate/moments.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace mstate;
using mstate::testing::disability;
using mstate::testing::rel_error;

namespace {

struct Fixture {
    ModelSpec model;
    PaymentSet payments;
};

// One state, constant rate c paid continuously, constant interest r.
Fixture annuity(double c, double r) {
    Fixture f;
    f.model.states = {"alive"};
    f.model.horizon = 20.0;
    f.model.interest = TimeFunction::constant(r);
    f.payments.names = {"annuity"};
    f.payments.sojourn = {{0, 0, TimeFunction::constant(c)}};
    return f;
}

double annuity_value(double c, double r, double len) { return r == 0.0 ? c * len : c * (1.0 - std::exp(-r * len)) / r; }

} // namespace

TEST_CASE("deterministic annuity moments") {
    for (double r : {0.0, 0.03}) {
        const Fixture f = annuity(2.0, r);
        MomentOptions opt;
        opt.s_min = 0.0;
        const MomentGrid grid = partial_moments(f.model, f.payments, MultiIndex{3}, 10.0, opt);
        for (double s : {0.0, 4.0, 9.5}) {
            const double u = annuity_value(2.0, r, 10.0 - s);
            for (int y = 0; y <= 3; ++y)
                CHECK(rel_error(grid.partial(grid.node(s), MultiIndex{y})(0, 0), std::pow(u, y)) <= 1e-10);
        }
        const ConditionalMoments cm = conditional_moments(grid);
        for (double s : {0.0, 4.0})
            for (int y = 2; y <= 3; ++y) CHECK(std::abs(central_moment(cm, MultiIndex{y}, 0, cm.node(s))) <= 1e-9);
    }
}

TEST_CASE("row sums agree with the per-state equations") {
    const auto& d = disability();
    MomentOptions opt;
    opt.s_min = 0.0;
    const MultiIndex k{1, 1, 1};
    const ConditionalMoments rows = conditional_moments(partial_moments(d.model, d.payments, k, 70.0, opt));
    const ConditionalMoments direct = conditional_moments_direct(d.model, d.payments, k, 70.0, opt);
    REQUIRE(rows.times() == direct.times());
    double worst = 0.0;
    for (std::size_t p = 1; p < rows.indices().size(); ++p) {
        double scale = 0.0, diff = 0.0;
        for (std::size_t g = 0; g < rows.times().size(); ++g)
            for (int i = 0; i < 3; ++i) {
                scale = std::max(scale, std::abs(direct.value(g, p, i)));
                diff = std::max(diff, std::abs(rows.value(g, p, i) - direct.value(g, p, i)));
            }
        if (scale > 0.0) worst = std::max(worst, diff / scale);
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("zero-order moment is the transition matrix") {
    const auto& d = disability();
    MomentOptions opt;
    opt.s_min = 10.0;
    const MomentGrid grid = partial_moments(d.model, d.payments, MultiIndex{1, 0, 0}, 70.0, opt);
    const Matrix P = transition_probabilities(d.model, 10.0, 70.0);
    CHECK(rel_error(grid.partial(0, MultiIndex{0, 0, 0}), P) <= 1e-8);
    CHECK(grid.partial(grid.times().size() - 1, MultiIndex{1, 0, 0}).isZero(0.0));
}

TEST_CASE("Hattendorff covariances match the moment route") {
    const auto& d = disability();
    MomentOptions opt;
    opt.s_min = 0.0;
    const HattendorffCurves h = hattendorff_covariances(d.model, d.payments, 70.0, opt);
    const ConditionalMoments cm =
        conditional_moments(partial_moments(d.model, d.payments, MultiIndex{2, 2, 2}, 70.0, opt));
    REQUIRE(h.times == cm.times());
    for (double s : {0.0, 10.0, 40.0}) {
        const std::size_t g = h.node(s);
        for (int i = 0; i < 2; ++i) {
            const Matrix sigma = h.covariance_matrix(g, i);
            CHECK(sigma == sigma.transpose());
            for (int l = 0; l < 3; ++l) {
                CHECK(rel_error(h.reserve(g, l, i), cm.value(g, MultiIndex::unit(3, l), i)) <= 1e-8);
                for (int m = 0; m < 3; ++m) {
                    const MultiIndex k = MultiIndex::unit(3, l) + MultiIndex::unit(3, m);
                    const double ref = central_moment(cm, k, i, g);
                    const double scale = std::max(std::abs(ref), 1e-6);
                    CHECK(std::abs(sigma(l, m) - ref) / scale <= 1e-7);
                }
            }
        }
    }
}

TEST_CASE("single-pair covariance curve") {
    const auto& d = disability();
    MomentOptions opt;
    opt.s_min = 0.0;
    const StateCurves c = covariance_hattendorff(d.model, d.payments, 1, 2, 70.0, opt);
    const HattendorffCurves h = hattendorff_covariances(d.model, d.payments, 70.0, opt);
    for (double s : {0.0, 24.0, 60.0})
        for (int i = 0; i < 3; ++i)
            CHECK(rel_error(c.at(c.node(s), i), h.covariance(h.node(s), 1, 2, i)) <= 1e-12);
    CHECK(c.at(c.times.size() - 1, 0) == 0.0);
}

TEST_CASE("duplicated contract is perfectly correlated") {
    const auto& d = disability();
    const PaymentSet twice = select_contracts(d.payments, {1, 1});
    const CorrelationMatrix c = correlation_matrix(d.model, twice, 0, 0.0, 70.0);
    CHECK(c.rho(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(c.degenerate.isZero());
}

TEST_CASE("correlation of degenerate variances") {
    Matrix sigma(2, 2);
    sigma << 4.0, 0.0, 0.0, 0.0;
    const CorrelationMatrix c = correlation_from_covariance(sigma);
    CHECK(c.rho(0, 0) == 1.0);
    CHECK(c.rho(0, 1) == 0.0);
    CHECK(c.degenerate(0, 1) == 1);
    CHECK(c.degenerate(0, 0) == 0);
    sigma << 1.0, 1.0 + 1e-15, 1.0 + 1e-15, 1.0;
    CHECK(correlation_from_covariance(sigma).rho(0, 1) <= 1.0);
}

TEST_CASE("normal-approximation margins") {
    Matrix sigma(2, 2);
    sigma << 4.0, 1.0, 1.0, 9.0;
    const Vector mean = Vector::Zero(2);
    const Margins m = clt_margins(mean, sigma, 0.975, 100.0);
    CHECK(m.z == doctest::Approx(1.959963984540054235).epsilon(1e-15));
    CHECK(m.per_product(0) == doctest::Approx(m.z * 0.2));
    CHECK(m.aggregate == doctest::Approx(m.z * std::sqrt(15.0 / 100.0)));
    CHECK(clt_margins(mean, sigma, 0.5, 100.0).aggregate == 0.0);
    const Margins q = clt_margins(mean, sigma, 0.975, 400.0);
    CHECK(q.aggregate == doctest::Approx(m.aggregate / 2.0).epsilon(1e-15));
    CHECK_THROWS_AS(clt_margins(mean, sigma, 1.0, 100.0), ConfigError);
    CHECK_THROWS_AS(clt_margins(mean, sigma, 0.9, 0.5), ConfigError);
}

TEST_CASE("cap on the number of coupled systems") {
    const auto& d = disability();
    MomentOptions opt;
    opt.block_cap = 20;
    CHECK_THROWS_AS(partial_moments(d.model, d.payments, MultiIndex{2, 2, 2}, 70.0, opt), CapExceeded);
    CHECK_THROWS_AS(block_product_integral_moments(d.model, d.payments, MultiIndex{1, 1, 1}, 0.0, 70.0, opt),
                    CapExceeded);
    CHECK_THROWS_AS(block_moment_curves(d.model, d.payments, MultiIndex{7, 7, 7}, 70.0), CapExceeded);
}

TEST_CASE("block generator layout, one contract") {
    const auto& d = disability();
    const PaymentSet one = select_contracts(d.payments, {0});
    const double x = 10.0;
    const Matrix F = block_generator(d.model, one, MultiIndex{2}, x);
    REQUIRE(F.rows() == 9);
    const RateSnapshot snap = take_snapshot(d.model, one, x);
    auto blk = [&](int r, int c) { return Matrix(F.block(3 * r, 3 * c, 3, 3)); };
    const Matrix I = Matrix::Identity(3, 3);
    CHECK(blk(2, 2) == snap.M);
    CHECK(blk(1, 1) == snap.M - snap.r * I);
    CHECK(blk(0, 0) == snap.M - 2.0 * snap.r * I);
    CHECK(blk(1, 2) == snap.reward_R(0));
    CHECK(blk(0, 1) == 2.0 * snap.reward_R(0));
    CHECK(blk(0, 2) == snap.reward_C(MultiIndex{2}));
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < r; ++c) CHECK(blk(r, c).isZero(0.0));
}

TEST_CASE("block generator layout, two contracts") {
    const auto& d = disability();
    const PaymentSet two = select_contracts(d.payments, {0, 2});
    const double x = 10.0;
    const Matrix F = block_generator(d.model, two, MultiIndex{1, 1}, x);
    REQUIRE(F.rows() == 12);
    const RateSnapshot snap = take_snapshot(d.model, two, x);
    auto blk = [&](int r, int c) { return Matrix(F.block(3 * r, 3 * c, 3, 3)); };
    // Rows from the top: (1,1), (1,0), (0,1), 0.
    CHECK(blk(2, 3) == snap.reward_R(1));
    CHECK(blk(1, 3) == snap.reward_R(0));
    CHECK(blk(0, 3) == snap.reward_C(MultiIndex{1, 1}));
    CHECK(blk(0, 2) == snap.reward_R(0));
    CHECK(blk(0, 1) == snap.reward_R(1));
    CHECK(blk(1, 2).isZero(0.0));
}

TEST_CASE("zero payments decouple the blocks") {
    const auto& d = disability();
    PaymentSet none;
    none.names = {"nothing", "still nothing"};
    const BlockResult res = block_product_integral_moments(d.model, none, MultiIndex{1, 2}, 5.0, 40.0);
    const std::size_t K = res.order.size() - 1;
    const Matrix P = transition_probabilities(d.model, 5.0, 40.0);
    for (std::size_t r = 0; r <= K; ++r)
        for (std::size_t c = 0; c <= K; ++c)
            if (r != c) CHECK(res.block(r, c).isZero(0.0));
    CHECK(rel_error(res.block(K, K), P) <= 1e-12);
    for (std::size_t p = 0; p <= K; ++p) {
        const double ybar = res.order[p].total();
        CHECK(rel_error(res.block(K - p, K - p), std::exp(-ybar * 0.01 * 35.0) * P) <= 1e-10);
    }
}

TEST_CASE("block product integral reproduces the moment equations") {
    const auto& d = disability();
    const MultiIndex k{1, 0, 2};
    const BlockResult res = block_product_integral_moments(d.model, d.payments, k, 0.0, 70.0);
    MomentOptions opt;
    opt.s_min = 0.0;
    const MomentGrid grid = partial_moments(d.model, d.payments, k, 70.0, opt);
    for (const MultiIndex& y : lex_enumerate(k)) CHECK(rel_error(res.moment(y), grid.partial(0, y)) <= 1e-7);
    CHECK(rel_error(res.block(res.order.size() - 1, res.order.size() - 1),
                    transition_probabilities(d.model, 0.0, 70.0)) <= 1e-12);
    CHECK(verify_block_scaling(res, d.model, 0.0, 70.0).max_error <= 1e-8);

    const MomentGrid curves = block_moment_curves(d.model, d.payments, k, 70.0, opt);
    for (double s : {0.0, 25.0, 50.0})
        for (const MultiIndex& y : lex_enumerate(k))
            CHECK(rel_error(curves.partial(curves.node(s), y), grid.partial(grid.node(s), y)) <= 1e-7);
}
