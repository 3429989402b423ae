#include "mstate/block.hpp"

#include "mstate/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mstate {

BlockGenerator::BlockGenerator(const ModelSpec& model, const PaymentSet& payments, const MultiIndex& k)
    : model_(&model), payments_(&payments), order_(k), J_(model.num_states()) {
    if (k.size() != payments.num_contracts())
        throw ConfigError("multi-index " + k.to_string() + " does not match the number of contracts");
    std::vector<bool> cross(order_.size(), false);
    for (std::size_t p = 1; p < order_.size(); ++p) {
        for (std::size_t q = 0; q < p; ++q) {
            if (!order_[q].leq(order_[p])) continue;
            const MultiIndex d = order_[p] - order_[q];
            const int l = d.unit_direction();
            if (l >= 0) {
                entries_.push_back({p, q, Kind::Reward, l, 0, static_cast<double>(order_[p][l])});
            } else {
                const auto xp = order_.position(d);
                entries_.push_back({p, q, Kind::Cross, -1, xp, multi_binomial(order_[p], d)});
                cross[xp] = true;
            }
        }
    }
    for (std::size_t p = 0; p < cross.size(); ++p)
        if (cross[p]) cross_positions_.push_back(p);
}

std::vector<double> BlockGenerator::breakpoints() const {
    const auto a = model_->breakpoints();
    const auto b = payments_->breakpoints();
    return merge_breakpoints({a, b});
}

void BlockGenerator::evaluate(double x, Matrix& out) const {
    const RateSnapshot snap = take_snapshot(*model_, *payments_, x);
    const auto K = order_.size() - 1;
    const Eigen::Index J = J_;
    out.setZero(dim(), dim());
    std::vector<Matrix> R(static_cast<std::size_t>(order_.top().size()));
    for (int l = 0; l < order_.top().size(); ++l) R[l] = snap.reward_R(l);
    std::vector<Matrix> C(order_.size());
    for (auto xp : cross_positions_) C[xp] = snap.reward_C(order_[xp]);

    for (std::size_t p = 0; p <= K; ++p) {
        const auto r = static_cast<Eigen::Index>(K - p) * J;
        out.block(r, r, J, J) = snap.M;
        out.block(r, r, J, J).diagonal().array() -= order_[p].total() * snap.r;
    }
    for (const auto& e : entries_) {
        const auto r = static_cast<Eigen::Index>(K - e.p) * J;
        const auto c = static_cast<Eigen::Index>(K - e.q) * J;
        const Matrix& src = e.kind == Kind::Reward ? R[e.contract] : C[e.xi];
        out.block(r, c, J, J) = e.coeff * src;
    }
}

MatrixFunction BlockGenerator::as_function() const {
    MatrixFunction f;
    f.dim = dim();
    f.eval = [this](double x, Matrix& out) { evaluate(x, out); };
    f.breakpoints = breakpoints();
    return f;
}

Matrix block_generator(const ModelSpec& model, const PaymentSet& payments, const MultiIndex& k, double x) {
    Matrix out;
    BlockGenerator(model, payments, k).evaluate(x, out);
    return out;
}

Matrix BlockResult::block(std::size_t r, std::size_t c) const {
    const Eigen::Index J = num_states;
    return G.block(static_cast<Eigen::Index>(r) * J, static_cast<Eigen::Index>(c) * J, J, J);
}

Matrix BlockResult::moment(const MultiIndex& y) const {
    const auto K = order.size() - 1;
    return block(K - order.position(y), K);
}

namespace {

void check_cap(const BlockGenerator& gen, const MomentOptions& options) {
    if (static_cast<std::size_t>(gen.dim()) > options.block_cap) {
        std::ostringstream os;
        os << "block generator for k=" << gen.order().top().to_string() << " has dimension " << gen.dim()
           << ", above the cap of " << options.block_cap;
        throw CapExceeded(os.str());
    }
}

void check_span(const ModelSpec& model, double s, double t) {
    if (!(s >= 0.0) || !(s <= t) || t > model.horizon + 1e-12) {
        std::ostringstream os;
        os << "need 0 <= s <= t <= horizon (" << model.horizon << "), got s=" << s << " t=" << t;
        throw ConfigError(os.str());
    }
}

} // namespace

BlockResult block_product_integral_moments(const ModelSpec& model, const PaymentSet& payments,
                                           const MultiIndex& k, double s, double t, const MomentOptions& options) {
    check_span(model, s, t);
    const BlockGenerator gen(model, payments, k);
    check_cap(gen, options);
    BlockResult out{gen.order(), gen.num_states(), Matrix()};
    out.G = product_integral(gen.as_function(), s, t, options.scheme, options.h);
    return out;
}

MomentGrid block_moment_curves(const ModelSpec& model, const PaymentSet& payments, const MultiIndex& k, double t,
                               const MomentOptions& options) {
    check_span(model, options.s_min, t);
    const BlockGenerator gen(model, payments, k);
    check_cap(gen, options);
    const auto bps = gen.breakpoints();
    const TimeGrid grid = make_grid(options.s_min, t, options.h, bps);
    const Eigen::Index J = gen.num_states();
    const Eigen::Index N = gen.dim();
    const std::size_t K = gen.order().size() - 1;
    MomentGrid out(k, grid.nodes, static_cast<int>(J));

    auto store = [&](std::size_t g, const Matrix& slab) {
        for (std::size_t p = 0; p <= K; ++p)
            out.partial(g, p) = slab.block(static_cast<Eigen::Index>(K - p) * J, 0, J, J);
    };

    // Last block column of the identity.
    Matrix slab = Matrix::Zero(N, J);
    slab.bottomRows(J).setIdentity();
    Matrix gen_x(N, N), y(N, J), tmp(N, J);
    const std::size_t last = grid.nodes.size() - 1;
    store(last, slab);
    for (std::size_t g = last; g-- > 0;) {
        const double lo = grid.nodes[g];
        const double hi = grid.nodes[g + 1];
        const double dt = hi - lo;
        gen.evaluate(0.5 * (lo + hi), gen_x);
        if (options.scheme == Scheme::Euler) {
            tmp.noalias() = gen_x * slab;
            slab += dt * tmp;
        } else {
            // Horner form of sum_{j<=7} (A dt)^j / j! applied to the slab.
            y = slab;
            for (int j = 7; j >= 1; --j) {
                tmp.noalias() = gen_x * y;
                y = slab + (dt / j) * tmp;
            }
            slab.swap(y);
        }
        if (!slab.allFinite()) {
            std::ostringstream os;
            os << "non-finite block product integral on cell [" << lo << ", " << hi << "]";
            throw NumericalError(os.str());
        }
        store(g, slab);
    }
    return out;
}

ScalingReport verify_block_scaling(const BlockResult& result, const ModelSpec& model, double s, double t,
                                   double h) {
    const auto& order = result.order;
    const std::size_t K = order.size() - 1;
    const auto bps = model.interest.breakpoints();
    const TimeGrid grid = make_grid(s, t, h, bps);
    const double rate_integral = DiscountTable(model.interest, grid).integral(s, t);

    ScalingReport report;
    for (std::size_t i = 0; i <= K; ++i) {
        for (std::size_t m = 0; m <= K; ++m) {
            const Matrix actual = result.block(K - i, K - m);
            ScalingCheck check;
            check.i = i;
            check.m = m;
            if (m > i || !order[m].leq(order[i])) {
                check.expected_zero = true;
                check.error = actual.cwiseAbs().maxCoeff();
            } else {
                const MultiIndex d = order[i] - order[m];
                const Matrix expected = multi_binomial(order[i], order[m]) *
                                        std::exp(-order[m].total() * rate_integral) * result.moment(d);
                const double scale = expected.cwiseAbs().maxCoeff();
                const double diff = (actual - expected).cwiseAbs().maxCoeff();
                check.error = scale > 0.0 ? diff / scale : diff;
            }
            report.max_error = std::max(report.max_error, check.error);
            report.checks.push_back(check);
        }
    }
    return report;
}

} // namespace mstate
