#include "mstate/moments.hpp"

#include "mstate/errors.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <sstream>

namespace mstate {

namespace {

std::size_t find_node(const std::vector<double>& times, double s) {
    TimeGrid grid{times};
    const auto g = grid.find(s);
    if (g == TimeGrid::npos) {
        std::ostringstream os;
        os << "time " << s << " is not a grid node";
        throw ConfigError(os.str());
    }
    return g;
}

void check_horizon(const ModelSpec& model, double s_min, double t) {
    if (!(s_min >= 0.0) || !(s_min <= t) || t > model.horizon + 1e-12) {
        std::ostringstream os;
        os << "need 0 <= s <= t <= horizon (" << model.horizon << "), got s=" << s_min << " t=" << t;
        throw ConfigError(os.str());
    }
}

TimeGrid moment_grid(const ModelSpec& model, const PaymentSet& payments, double t, const MomentOptions& options) {
    check_horizon(model, options.s_min, t);
    const auto mb = model.breakpoints();
    const auto pb = payments.breakpoints();
    const auto bps = merge_breakpoints({mb, pb});
    return make_grid(options.s_min, t, options.h, bps);
}

void check_dimensions(const PaymentSet& payments, const MultiIndex& k) {
    if (k.size() != payments.num_contracts()) {
        std::ostringstream os;
        os << "multi-index " << k.to_string() << " has " << k.size() << " entries but the payment set has "
           << payments.num_contracts() << " contracts";
        throw ConfigError(os.str());
    }
}

// One contribution -coeff * X * V^(q) to the equation of V^(p), where X is
// R_l (kind_index = l, is_c = false) or C^(xi) (kind_index = position of xi).
struct CouplingTerm {
    std::size_t q;
    bool is_c;
    std::size_t kind_index;
    double coeff;
};

struct Couplings {
    std::vector<std::vector<CouplingTerm>> terms;  // per position p
    std::vector<bool> need_r;                      // per contract
    std::vector<std::size_t> c_positions;          // xi positions needing C^(xi)
};

Couplings build_couplings(const LowerSet& set) {
    const int n = set.top().size();
    Couplings c;
    c.terms.resize(set.size());
    c.need_r.assign(static_cast<std::size_t>(n), false);
    std::vector<bool> need_c(set.size(), false);
    for (std::size_t p = 1; p < set.size(); ++p) {
        const MultiIndex& y = set[p];
        for (int l = 0; l < n; ++l) {
            if (y[l] == 0) continue;
            const auto e = MultiIndex::unit(n, l);
            c.terms[p].push_back({set.position(y - e), false, static_cast<std::size_t>(l), static_cast<double>(y[l])});
            c.need_r[l] = true;
        }
        for (const auto& xi : lex_enumerate(y)) {
            if (xi.is_unit()) continue;
            const auto xp = set.position(xi);
            c.terms[p].push_back({set.position(y - xi), true, xp, multi_binomial(y, xi)});
            need_c[xp] = true;
        }
    }
    for (std::size_t p = 0; p < set.size(); ++p)
        if (need_c[p]) c.c_positions.push_back(p);
    return c;
}

} // namespace

// ---------------------------------------------------------------------------

MomentGrid::MomentGrid(const MultiIndex& k, std::vector<double> times, int num_states)
    : set_(k), times_(std::move(times)), J_(num_states),
      data_(times_.size() * set_.size() * static_cast<std::size_t>(num_states * num_states), 0.0) {}

Eigen::Map<const Matrix> MomentGrid::partial(std::size_t g, std::size_t p) const {
    const std::size_t block = static_cast<std::size_t>(J_ * J_);
    return Eigen::Map<const Matrix>(data_.data() + (g * set_.size() + p) * block, J_, J_);
}

Eigen::Map<Matrix> MomentGrid::partial(std::size_t g, std::size_t p) {
    const std::size_t block = static_cast<std::size_t>(J_ * J_);
    return Eigen::Map<Matrix>(data_.data() + (g * set_.size() + p) * block, J_, J_);
}

std::size_t MomentGrid::node(double s) const { return find_node(times_, s); }

MomentGrid partial_moments(const ModelSpec& model, const PaymentSet& payments, const MultiIndex& k, double t,
                           const MomentOptions& options) {
    check_dimensions(payments, k);
    if (k.cardinality() + 1 > options.block_cap)
        throw CapExceeded("moment order " + k.to_string() + " needs " + std::to_string(k.cardinality() + 1) +
                          " coupled systems, above the cap of " + std::to_string(options.block_cap));
    const TimeGrid grid = moment_grid(model, payments, t, options);
    const int J = model.num_states();
    MomentGrid out(k, grid.nodes, J);
    const LowerSet& set = out.indices();
    const Couplings couplings = build_couplings(set);
    const std::size_t count = set.size();
    const Eigen::Index block = J * J;

    RateSnapshot snap;
    std::vector<Matrix> R(static_cast<std::size_t>(k.size()));
    std::vector<Matrix> C(count);
    Matrix tmp(J, J);

    auto rhs = [&](double s, const Vector& y, Vector& dy) {
        take_snapshot(model, payments, s, snap);
        for (int l = 0; l < k.size(); ++l)
            if (couplings.need_r[l]) R[l] = snap.reward_R(l);
        for (auto xp : couplings.c_positions) C[xp] = snap.reward_C(set[xp]);
        dy.resize(y.size());
        for (std::size_t p = 0; p < count; ++p) {
            Eigen::Map<const Matrix> V(y.data() + p * block, J, J);
            Eigen::Map<Matrix> D(dy.data() + p * block, J, J);
            D.noalias() = -snap.M * V;
            D += (set[p].total() * snap.r) * V;
            for (const auto& term : couplings.terms[p]) {
                Eigen::Map<const Matrix> Vq(y.data() + term.q * block, J, J);
                const Matrix& X = term.is_c ? C[term.kind_index] : R[term.kind_index];
                tmp.noalias() = X * Vq;
                D -= term.coeff * tmp;
            }
        }
    };

    Vector state = Vector::Zero(static_cast<Eigen::Index>(count) * block);
    Eigen::Map<Matrix>(state.data(), J, J).setIdentity();
    try {
        rk4_backward(grid, state, rhs, [&](std::size_t g, const Vector& y) {
            for (std::size_t p = 0; p < count; ++p)
                out.partial(g, p) = Eigen::Map<const Matrix>(y.data() + p * block, J, J);
        });
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("partial moments for k=") + k.to_string() + ": " + e.what());
    }
    return out;
}

// ---------------------------------------------------------------------------

ConditionalMoments::ConditionalMoments(const MultiIndex& k, std::vector<double> times, int num_states)
    : set_(k), times_(std::move(times)), J_(num_states),
      data_(times_.size() * set_.size() * static_cast<std::size_t>(num_states), 0.0) {}

std::size_t ConditionalMoments::node(double s) const { return find_node(times_, s); }

ConditionalMoments conditional_moments(const MomentGrid& grid) {
    ConditionalMoments out(grid.indices().top(), grid.times(), grid.num_states());
    for (std::size_t g = 0; g < grid.times().size(); ++g)
        for (std::size_t p = 0; p < grid.indices().size(); ++p) {
            const Vector rows = grid.partial(g, p).rowwise().sum();
            for (int i = 0; i < grid.num_states(); ++i) out.value(g, p, i) = rows(i);
        }
    return out;
}

ConditionalMoments conditional_moments_direct(const ModelSpec& model, const PaymentSet& payments,
                                              const MultiIndex& k, double t, const MomentOptions& options) {
    check_dimensions(payments, k);
    if (k.cardinality() + 1 > options.block_cap)
        throw CapExceeded("moment order " + k.to_string() + " exceeds the block cap");
    const TimeGrid grid = moment_grid(model, payments, t, options);
    const int J = model.num_states();
    const int n = k.size();
    ConditionalMoments out(k, grid.nodes, J);
    const LowerSet& set = out.indices();
    const std::size_t count = set.size();

    // For each y: every xi in S~(y) with its binomial weight and the position
    // of y - xi.
    struct Term {
        std::size_t xi;
        std::size_t q;
        double coeff;
    };
    std::vector<std::vector<Term>> terms(count);
    for (std::size_t p = 0; p < count; ++p) {
        terms[p].push_back({0, p, 1.0});
        for (const auto& xi : lex_enumerate(set[p]))
            terms[p].push_back({set.position(xi), set.position(set[p] - xi), multi_binomial(set[p], xi)});
    }

    RateSnapshot snap;
    std::vector<double> weight(count);
    auto rhs = [&](double s, const Vector& y, Vector& dy) {
        take_snapshot(model, payments, s, snap);
        dy.resize(y.size());
        for (std::size_t p = 0; p < count; ++p) {
            const MultiIndex& yp = set[p];
            for (int i = 0; i < J; ++i) {
                double d = (yp.total() * snap.r - snap.M(i, i)) * y(p * J + i);
                for (int l = 0; l < n; ++l) {
                    if (yp[l] == 0) continue;
                    const auto q = set.position(yp - MultiIndex::unit(n, l));
                    d -= yp[l] * snap.b[l](i) * y(q * J + i);
                }
                dy(p * J + i) = d;
            }
        }
        for (int i = 0; i < J; ++i)
            for (int j = 0; j < J; ++j) {
                if (j == i || snap.M(i, j) == 0.0) continue;
                // prod_l b_ij^l ^ xi_l for every xi <= k, with 0^0 = 1.
                for (std::size_t x = 0; x < count; ++x) {
                    double w = 1.0;
                    for (int l = 0; l < n; ++l)
                        for (int e = 0; e < set[x][l]; ++e) w *= snap.B[l](i, j);
                    weight[x] = w;
                }
                for (std::size_t p = 0; p < count; ++p) {
                    double acc = 0.0;
                    for (const auto& term : terms[p]) acc += term.coeff * weight[term.xi] * y(term.q * J + j);
                    dy(p * J + i) -= snap.M(i, j) * acc;
                }
            }
    };

    Vector state = Vector::Zero(static_cast<Eigen::Index>(count) * J);
    state.head(J).setOnes();
    rk4_backward(grid, state, rhs, [&](std::size_t g, const Vector& y) {
        for (std::size_t p = 0; p < count; ++p)
            for (int i = 0; i < J; ++i) out.value(g, p, i) = y(p * J + i);
    });
    return out;
}

double central_moment(const ConditionalMoments& moments, const MultiIndex& k, int state, std::size_t g) {
    const LowerSet& set = moments.indices();
    if (!set.contains(k))
        throw ConfigError("central moment " + k.to_string() + " needs moments missing from the grid (top " +
                          set.top().to_string() + ")");
    const int n = k.size();
    std::vector<double> mean(static_cast<std::size_t>(n), 0.0);
    for (int l = 0; l < n; ++l)
        if (k[l] > 0) mean[l] = moments.value(g, MultiIndex::unit(n, l), state);

    double sum = 0.0;
    const LowerSet lower(k);
    for (const auto& y : lower.elements()) {
        double w = moments.value(g, y, state);
        for (int l = 0; l < n; ++l) {
            const int d = k[l] - y[l];
            w *= static_cast<double>(binomial(k[l], y[l])) * std::pow(-mean[l], d);
        }
        sum += w;
    }
    return sum;
}

// ---------------------------------------------------------------------------

std::size_t StateCurves::node(double s) const { return find_node(times, s); }

double HattendorffCurves::reserve(std::size_t g, int l, int state) const {
    return reserves[(g * num_contracts + l) * num_states + state];
}

double HattendorffCurves::covariance(std::size_t g, int l, int m, int state) const {
    return covariances[((g * num_contracts + l) * num_contracts + m) * num_states + state];
}

Matrix HattendorffCurves::covariance_matrix(std::size_t g, int state) const {
    Matrix sigma(num_contracts, num_contracts);
    for (int l = 0; l < num_contracts; ++l)
        for (int m = 0; m < num_contracts; ++m) sigma(l, m) = covariance(g, l, m, state);
    return sigma;
}

std::size_t HattendorffCurves::node(double s) const { return find_node(times, s); }

namespace {

// Stacked backward solve: Thiele reserves for `contracts`, then one
// covariance system per pair (indices into `contracts`).
struct HattendorffSystem {
    std::vector<int> contracts;
    std::vector<std::pair<int, int>> pairs;
};

void solve_hattendorff(const ModelSpec& model, const PaymentSet& payments, double t, const MomentOptions& options,
                       const HattendorffSystem& sys,
                       const std::function<void(std::size_t, double, const Vector&)>& visit,
                       std::vector<double>& times) {
    const TimeGrid grid = moment_grid(model, payments, t, options);
    times = grid.nodes;
    const int J = model.num_states();
    const int nc = static_cast<int>(sys.contracts.size());
    const int np = static_cast<int>(sys.pairs.size());
    RateSnapshot snap;
    std::vector<Matrix> risk(static_cast<std::size_t>(nc), Matrix::Zero(J, J));

    auto rhs = [&](double s, const Vector& y, Vector& dy) {
        take_snapshot(model, payments, s, snap);
        dy.resize(y.size());
        for (int c = 0; c < nc; ++c) {
            const int l = sys.contracts[c];
            for (int i = 0; i < J; ++i) {
                double d = snap.r * y(c * J + i) - snap.b[l](i);
                for (int j = 0; j < J; ++j) {
                    if (j == i) continue;
                    // Sum at risk: transition payment plus reserve jump.
                    risk[c](i, j) = snap.B[l](i, j) + y(c * J + j) - y(c * J + i);
                    d -= snap.M(i, j) * risk[c](i, j);
                }
                dy(c * J + i) = d;
            }
        }
        for (int q = 0; q < np; ++q) {
            const auto [a, b] = sys.pairs[q];
            const Eigen::Index base = (nc + q) * J;
            for (int i = 0; i < J; ++i) {
                double d = 2.0 * snap.r * y(base + i);
                for (int j = 0; j < J; ++j) {
                    if (j == i) continue;
                    d -= snap.M(i, j) * (risk[a](i, j) * risk[b](i, j) + y(base + j) - y(base + i));
                }
                dy(base + i) = d;
            }
        }
    };

    Vector state = Vector::Zero(static_cast<Eigen::Index>(nc + np) * J);
    rk4_backward(grid, state, rhs, [&](std::size_t g, const Vector& y) { visit(g, grid.nodes[g], y); });
}

} // namespace

HattendorffCurves hattendorff_covariances(const ModelSpec& model, const PaymentSet& payments, double t,
                                          const MomentOptions& options) {
    const int n = payments.num_contracts();
    const int J = model.num_states();
    HattendorffSystem sys;
    for (int l = 0; l < n; ++l) sys.contracts.push_back(l);
    for (int l = 0; l < n; ++l)
        for (int m = l; m < n; ++m) sys.pairs.emplace_back(l, m);

    HattendorffCurves out;
    out.num_states = J;
    out.num_contracts = n;
    std::vector<double> times;
    std::vector<std::vector<double>> rows;  // filled backward, indexed by node
    solve_hattendorff(model, payments, t, options, sys,
                      [&](std::size_t g, double, const Vector& y) {
                          if (rows.empty()) rows.resize(g + 1);
                          rows[g].assign(y.data(), y.data() + y.size());
                      },
                      times);
    out.times = times;
    const std::size_t G = times.size();
    out.reserves.assign(G * n * J, 0.0);
    out.covariances.assign(G * n * n * J, 0.0);
    for (std::size_t g = 0; g < G; ++g) {
        const auto& y = rows[g];
        for (int l = 0; l < n; ++l)
            for (int i = 0; i < J; ++i) out.reserves[(g * n + l) * J + i] = y[l * J + i];
        for (std::size_t q = 0; q < sys.pairs.size(); ++q) {
            const auto [l, m] = sys.pairs[q];
            for (int i = 0; i < J; ++i) {
                const double v = y[(n + q) * J + i];
                out.covariances[((g * n + l) * n + m) * J + i] = v;
                out.covariances[((g * n + m) * n + l) * J + i] = v;
            }
        }
    }
    return out;
}

StateCurves covariance_hattendorff(const ModelSpec& model, const PaymentSet& payments, int l, int m, double t,
                                   const MomentOptions& options) {
    const int n = payments.num_contracts();
    if (l < 0 || l >= n || m < 0 || m >= n) throw ConfigError("contract index out of range");
    HattendorffSystem sys;
    if (l == m) {
        sys.contracts = {l};
        sys.pairs = {{0, 0}};
    } else {
        sys.contracts = {l, m};
        sys.pairs = {{0, 1}};
    }
    const int J = model.num_states();
    const auto offset = static_cast<Eigen::Index>(sys.contracts.size()) * J;
    StateCurves out;
    out.num_states = J;
    solve_hattendorff(model, payments, t, options, sys,
                      [&](std::size_t g, double, const Vector& y) {
                          if (out.values.empty()) out.values.resize((g + 1) * J);
                          for (int i = 0; i < J; ++i) out.values[g * J + i] = y(offset + i);
                      },
                      out.times);
    return out;
}

Matrix covariance_matrix(const ModelSpec& model, const PaymentSet& payments, int state, double s, double t,
                         const MomentOptions& options) {
    if (state < 0 || state >= model.num_states()) throw ConfigError("state index out of range");
    MomentOptions opts = options;
    opts.s_min = s;
    const auto curves = hattendorff_covariances(model, payments, t, opts);
    return curves.covariance_matrix(0, state);
}

CorrelationMatrix correlation_from_covariance(const Matrix& sigma) {
    const auto n = sigma.rows();
    CorrelationMatrix out{Matrix::Zero(n, n), Eigen::MatrixXi::Zero(n, n)};
    for (Eigen::Index l = 0; l < n; ++l)
        for (Eigen::Index m = 0; m < n; ++m) {
            const double vl = sigma(l, l);
            const double vm = sigma(m, m);
            if (vl < kDegenerateVariance || vm < kDegenerateVariance) {
                out.degenerate(l, m) = 1;
                continue;
            }
            out.rho(l, m) = l == m ? 1.0 : std::clamp(sigma(l, m) / std::sqrt(vl * vm), -1.0, 1.0);
        }
    return out;
}

CorrelationMatrix correlation_matrix(const ModelSpec& model, const PaymentSet& payments, int state, double s,
                                     double t, const MomentOptions& options) {
    return correlation_from_covariance(covariance_matrix(model, payments, state, s, t, options));
}

Margins clt_margins(const Vector& mean, const Matrix& sigma, double confidence, double portfolio_size) {
    if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must lie in (0, 1)");
    if (!(portfolio_size >= 1.0)) throw ConfigError("portfolio size must be at least 1");
    if (sigma.rows() != mean.size() || sigma.cols() != mean.size())
        throw ConfigError("covariance matrix does not match the mean vector");
    for (Eigen::Index l = 0; l < sigma.rows(); ++l)
        if (sigma(l, l) < 0.0) throw ConfigError("covariance matrix has a negative variance");

    Margins out;
    out.z = boost::math::quantile(boost::math::normal_distribution<double>(), confidence);
    out.per_product = (sigma.diagonal().array() / portfolio_size).sqrt() * out.z;
    out.aggregate = out.z * std::sqrt(std::max(0.0, sigma.sum()) / portfolio_size);
    return out;
}

} // namespace mstate
