#include "mstate/markov.hpp"

#include "mstate/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace mstate {

namespace {

constexpr double kNodeTolerance = 1e-12;
// Relative offset of RK4 end-stage points into the cell interior.
constexpr double kInteriorNudge = 1e-9;

bool all_finite(const Matrix& m) { return m.allFinite(); }

} // namespace

std::vector<double> ModelSpec::breakpoints() const {
    std::set<double> all(interest.breakpoints().begin(), interest.breakpoints().end());
    for (const auto& mu : intensities) all.insert(mu.rate.breakpoints().begin(), mu.rate.breakpoints().end());
    return {all.begin(), all.end()};
}

void validate_model(const ModelSpec& model) {
    const int J = model.num_states();
    if (J < 1) throw ValidationError("model needs at least one state");
    if (!(model.horizon > 0.0) || !std::isfinite(model.horizon))
        throw ValidationError("model horizon must be positive and finite");
    std::set<std::pair<int, int>> seen;
    for (const auto& mu : model.intensities) {
        if (mu.from < 0 || mu.from >= J || mu.to < 0 || mu.to >= J || mu.from == mu.to) {
            std::ostringstream os;
            os << "intensity (" << mu.from << "," << mu.to << ") refers to an invalid state pair";
            throw ValidationError(os.str());
        }
        if (!seen.insert({mu.from, mu.to}).second) {
            std::ostringstream os;
            os << "intensity (" << mu.from << "," << mu.to << ") listed twice";
            throw ValidationError(os.str());
        }
    }

    // Dense scan: step 1/64, every breakpoint and points just either side of it.
    std::vector<double> probes;
    const int steps = static_cast<int>(std::ceil(model.horizon * 64.0));
    for (int g = 0; g <= steps; ++g) probes.push_back(std::min(model.horizon, g / 64.0));
    for (double b : model.breakpoints()) {
        if (b < 0.0 || b > model.horizon) continue;
        probes.push_back(b);
        probes.push_back(std::max(0.0, b - 1e-9));
        probes.push_back(std::min(model.horizon, b + 1e-9));
    }
    for (const auto& mu : model.intensities) {
        for (double t : probes) {
            double v = 0.0;
            try {
                v = mu.rate(t);
            } catch (const DomainError& e) {
                std::ostringstream os;
                os << "intensity (" << mu.from << "," << mu.to << ") cannot be evaluated: " << e.what();
                throw ValidationError(os.str());
            }
            if (v < 0.0) {
                std::ostringstream os;
                os << "negative intensity (" << mu.from << "," << mu.to << ") = " << v << " at t=" << t;
                throw ValidationError(os.str());
            }
        }
    }
    for (double t : probes) {
        try {
            (void)model.interest(t);
        } catch (const DomainError& e) {
            throw ValidationError(std::string("interest rate cannot be evaluated: ") + e.what());
        }
    }
}

void intensity_matrix(const ModelSpec& model, double t, Matrix& out) {
    const int J = model.num_states();
    out.setZero(J, J);
    for (const auto& mu : model.intensities) {
        const double v = mu.rate(t);
        if (v < 0.0) {
            std::ostringstream os;
            os << "negative intensity (" << mu.from << "," << mu.to << ") = " << v << " at t=" << t;
            throw ValidationError(os.str());
        }
        out(mu.from, mu.to) = v;
    }
    for (int i = 0; i < J; ++i) {
        double row = 0.0;
        for (int j = 0; j < J; ++j)
            if (j != i) row += out(i, j);
        out(i, i) = -row;
    }
}

Matrix intensity_matrix(const ModelSpec& model, double t) {
    Matrix m;
    intensity_matrix(model, t, m);
    return m;
}

std::size_t TimeGrid::find(double x) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), x - kNodeTolerance * std::max(1.0, std::abs(x)));
    if (it != nodes.end() && std::abs(*it - x) <= kNodeTolerance * std::max(1.0, std::abs(x)))
        return static_cast<std::size_t>(it - nodes.begin());
    return npos;
}

TimeGrid make_grid(double s, double t, double h, std::span<const double> breakpoints) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("grid step must be positive and finite");
    if (!(s <= t)) throw ConfigError("grid requires s <= t");
    TimeGrid grid;
    grid.nodes.push_back(s);
    if (s == t) return grid;

    std::vector<double> fixed;
    for (double b : breakpoints)
        if (b > s && b < t) fixed.push_back(b);
    fixed.push_back(t);
    std::sort(fixed.begin(), fixed.end());

    auto close = [](double a, double b) { return std::abs(a - b) <= kNodeTolerance * std::max(1.0, std::abs(a)); };

    auto g = static_cast<long long>(std::floor(s / h)) + 1;
    std::size_t next_fixed = 0;
    while (next_fixed < fixed.size()) {
        const double x = static_cast<double>(g) * h;
        if (x < fixed[next_fixed] && !close(x, fixed[next_fixed])) {
            if (!close(x, grid.nodes.back())) grid.nodes.push_back(x);
            ++g;
        } else {
            if (!close(fixed[next_fixed], grid.nodes.back())) grid.nodes.push_back(fixed[next_fixed]);
            if (close(x, fixed[next_fixed])) ++g;
            ++next_fixed;
        }
    }
    grid.nodes.back() = t;
    return grid;
}

std::vector<double> merge_breakpoints(std::initializer_list<std::span<const double>> lists) {
    std::set<double> all;
    for (auto l : lists) all.insert(l.begin(), l.end());
    return {all.begin(), all.end()};
}

Scheme parse_scheme(const std::string& name) {
    if (name == "euler") return Scheme::Euler;
    if (name == "midpoint-exp") return Scheme::MidpointExp;
    throw ConfigError("unknown scheme '" + name + "' (expected euler or midpoint-exp)");
}

std::string to_string(Scheme scheme) { return scheme == Scheme::Euler ? "euler" : "midpoint-exp"; }

void cell_factor(const Matrix& a, double dt, Scheme scheme, Matrix& out) {
    const auto n = a.rows();
    if (scheme == Scheme::Euler) {
        out = a * dt;
        out.diagonal().array() += 1.0;
        return;
    }
    // Horner form of sum_{j=0}^{7} (A dt)^j / j!
    const Matrix x = a * dt;
    out = x / 7.0;
    out.diagonal().array() += 1.0;
    Matrix tmp(n, n);
    for (int j = 6; j >= 1; --j) {
        tmp.noalias() = x * out;
        out = tmp / static_cast<double>(j);
        out.diagonal().array() += 1.0;
    }
}

void product_integral_sweep(const MatrixFunction& a, const TimeGrid& grid, Scheme scheme,
                            const Matrix& terminal,
                            const std::function<void(std::size_t, const Matrix&)>& visit) {
    Matrix acc = terminal;
    Matrix gen(a.dim, a.dim);
    Matrix factor(a.dim, a.dim);
    Matrix tmp(acc.rows(), acc.cols());
    const std::size_t last = grid.nodes.size() - 1;
    visit(last, acc);
    for (std::size_t g = last; g-- > 0;) {
        const double lo = grid.nodes[g];
        const double hi = grid.nodes[g + 1];
        a.eval(0.5 * (lo + hi), gen);
        cell_factor(gen, hi - lo, scheme, factor);
        tmp.noalias() = factor * acc;
        acc.swap(tmp);
        if (!all_finite(acc)) {
            std::ostringstream os;
            os << "non-finite product integral on cell [" << lo << ", " << hi << "]";
            throw NumericalError(os.str());
        }
        visit(g, acc);
    }
}

void product_integral_sweep(const MatrixFunction& a, const TimeGrid& grid, Scheme scheme,
                            const std::function<void(std::size_t, const Matrix&)>& visit) {
    product_integral_sweep(a, grid, scheme, Matrix::Identity(a.dim, a.dim), visit);
}

Matrix product_integral(const MatrixFunction& a, double s, double t, Scheme scheme, double h) {
    if (s > t) throw ConfigError("product integral requires s <= t");
    const TimeGrid grid = make_grid(s, t, h, a.breakpoints);
    Matrix result;
    product_integral_sweep(a, grid, scheme, [&](std::size_t g, const Matrix& m) {
        if (g == 0) result = m;
    });
    return result;
}

MatrixFunction intensity_function(const ModelSpec& model) {
    MatrixFunction f;
    f.dim = model.num_states();
    f.eval = [&model](double x, Matrix& out) { intensity_matrix(model, x, out); };
    f.breakpoints = model.breakpoints();
    return f;
}

namespace {

Matrix checked_probabilities(Matrix p, double s, double t) {
    constexpr double tol = 1e-10;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double row = p.row(i).sum();
        if (std::abs(row - 1.0) > tol) {
            std::ostringstream os;
            os << "row " << i << " of P(" << s << "," << t << ") sums to " << row;
            throw NumericalError(os.str());
        }
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            if (p(i, j) < -tol || p(i, j) > 1.0 + tol) {
                std::ostringstream os;
                os << "P(" << s << "," << t << ")[" << i << "," << j << "] = " << p(i, j) << " outside [0,1]";
                throw NumericalError(os.str());
            }
        }
    }
    return p.cwiseMax(0.0).cwiseMin(1.0);
}

} // namespace

Matrix transition_probabilities(const ModelSpec& model, double s, double t, double h, Scheme scheme) {
    if (s < 0.0 || t > model.horizon + 1e-12) throw ConfigError("transition probabilities need 0 <= s <= t <= horizon");
    return checked_probabilities(product_integral(intensity_function(model), s, t, scheme, h), s, t);
}

TransitionCurves transition_probability_curves(const ModelSpec& model, double s0, double t, double h,
                                               Scheme scheme) {
    if (s0 < 0.0 || s0 > t || t > model.horizon + 1e-12)
        throw ConfigError("transition probabilities need 0 <= s <= t <= horizon");
    const auto a = intensity_function(model);
    const TimeGrid grid = make_grid(s0, t, h, a.breakpoints);
    TransitionCurves out;
    out.times = grid.nodes;
    out.p.resize(grid.nodes.size());
    product_integral_sweep(a, grid, scheme, [&](std::size_t g, const Matrix& m) {
        out.p[g] = checked_probabilities(m, grid.nodes[g], t);
    });
    return out;
}

double simpson_cell(const TimeFunction& f, double a, double b) {
    if (b <= a) return 0.0;
    const double d = (b - a) * kInteriorNudge;
    return (b - a) / 6.0 * (f(a + d) + 4.0 * f(0.5 * (a + b)) + f(b - d));
}

DiscountTable::DiscountTable(const TimeFunction& rate, const TimeGrid& grid)
    : rate_(&rate), nodes_(grid.nodes), cumulative_(grid.nodes.size(), 0.0) {
    for (std::size_t g = 1; g < nodes_.size(); ++g)
        cumulative_[g] = cumulative_[g - 1] + simpson_cell(rate, nodes_[g - 1], nodes_[g]);
}

double DiscountTable::integral_to(double x) const {
    if (nodes_.size() == 1) return 0.0;
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    std::size_t g = it == nodes_.begin() ? 0 : static_cast<std::size_t>(it - nodes_.begin()) - 1;
    if (g >= nodes_.size() - 1) g = nodes_.size() - 2;
    if (x == nodes_[g]) return cumulative_[g];
    if (x == nodes_[g + 1]) return cumulative_[g + 1];
    // Within the cell, Simpson from the left node; interior to the cell, so
    // both ends sample the correct branch.
    const double a = nodes_[g];
    const double d = (nodes_[g + 1] - a) * kInteriorNudge;
    const double lo = a + d;
    const double hi = std::max(lo, std::min(x, nodes_[g + 1] - d));
    return cumulative_[g] + (x - a) / 6.0 * ((*rate_)(lo) + 4.0 * (*rate_)(0.5 * (a + x)) + (*rate_)(hi));
}

void rk4_backward(const TimeGrid& grid, Vector& y, const OdeRhs& rhs,
                  const std::function<void(std::size_t, const Vector&)>& visit) {
    const auto n = y.size();
    Vector k1(n), k2(n), k3(n), k4(n), tmp(n);
    const std::size_t last = grid.nodes.size() - 1;
    visit(last, y);
    for (std::size_t g = last; g-- > 0;) {
        const double hi = grid.nodes[g + 1];
        const double lo = grid.nodes[g];
        const double step = lo - hi;  // negative: integrating backward
        const double nudge = (hi - lo) * kInteriorNudge;
        const double mid = 0.5 * (lo + hi);
        rhs(hi - nudge, y, k1);
        tmp = y + 0.5 * step * k1;
        rhs(mid, tmp, k2);
        tmp = y + 0.5 * step * k2;
        rhs(mid, tmp, k3);
        tmp = y + step * k3;
        rhs(lo + nudge, tmp, k4);
        y += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!y.allFinite()) {
            std::ostringstream os;
            os << "non-finite ODE state at s=" << lo;
            throw NumericalError(os.str());
        }
        visit(g, y);
    }
}

} // namespace mstate
