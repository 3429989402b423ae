#include "mstate/mgf.hpp"

#include "mstate/errors.hpp"

#include <cmath>
#include <exception>
#include <sstream>

namespace mstate {

namespace {

constexpr double kMaxExponent = 700.0;

void check_theta(const PaymentSet& payments, const Vector& theta) {
    if (theta.size() != payments.num_contracts())
        throw ConfigError("theta has " + std::to_string(theta.size()) + " entries but there are " +
                          std::to_string(payments.num_contracts()) + " contracts");
    if (!theta.allFinite()) throw ConfigError("theta must be finite");
}

std::vector<double> all_breakpoints(const ModelSpec& model, const PaymentSet& payments) {
    const auto a = model.breakpoints();
    const auto b = payments.breakpoints();
    return merge_breakpoints({a, b});
}

// A(s, u; theta) evaluated at u, given v = v(s, u).
void mgf_generator(const RateSnapshot& snap, const Vector& theta, double v, Matrix& out) {
    const auto J = snap.M.rows();
    out = snap.M;
    for (Eigen::Index i = 0; i < J; ++i) {
        for (Eigen::Index j = 0; j < J; ++j) {
            if (i == j) continue;
            double e = 0.0;
            for (Eigen::Index l = 0; l < theta.size(); ++l) e += theta(l) * snap.B[l](i, j);
            e *= v;
            if (e > kMaxExponent) {
                std::ostringstream os;
                os << "mgf exponent " << e << " overflows at u=" << snap.t << " for transition " << i << "->" << j;
                throw NumericalError(os.str());
            }
            out(i, j) *= std::exp(e);
        }
        double d = 0.0;
        for (Eigen::Index l = 0; l < theta.size(); ++l) d += theta(l) * snap.b[l](i);
        out(i, i) += v * d;
    }
}

} // namespace

Matrix mgf(const ModelSpec& model, const PaymentSet& payments, const Vector& theta, double s, double t, double h,
           Scheme scheme) {
    check_theta(payments, theta);
    if (!(s >= 0.0) || !(s <= t) || t > model.horizon + 1e-12) throw ConfigError("mgf needs 0 <= s <= t <= horizon");
    const auto bps = all_breakpoints(model, payments);
    const TimeGrid grid = make_grid(s, t, h, bps);
    const DiscountTable discount(model.interest, grid);

    MatrixFunction a;
    a.dim = model.num_states();
    a.breakpoints = bps;
    a.eval = [&](double u, Matrix& out) {
        const RateSnapshot snap = take_snapshot(model, payments, u);
        mgf_generator(snap, theta, discount.discount(s, u), out);
    };
    Matrix result;
    product_integral_sweep(a, grid, scheme, [&](std::size_t g, const Matrix& m) {
        if (g == 0) result = m;
    });
    return result;
}

std::vector<MgfResidual> mgf_pde_residual(const ModelSpec& model, const PaymentSet& payments, const Vector& theta,
                                          const std::vector<double>& s_points, double t, double h, Scheme scheme,
                                          double theta_step, bool parallel) {
    check_theta(payments, theta);
    if (!(h > 0.0) || !(theta_step > 0.0)) throw ConfigError("finite-difference steps must be positive");
    const auto bps = all_breakpoints(model, payments);
    const int n = payments.num_contracts();
    std::vector<MgfResidual> out(s_points.size());
    std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::size_t q = 0; q < s_points.size(); ++q) {
        const double s = s_points[q];
        MgfResidual& res = out[q];
        res.s = s;
        bool excluded = s - h < 0.0 || s + h > t;
        for (double b : bps)
            if (b >= s - h && b <= s + h) excluded = true;
        res.excluded = excluded;
        if (excluded) continue;
        try {
            const Matrix f = mgf(model, payments, theta, s, t, h, scheme);
            const Matrix ds = (mgf(model, payments, theta, s + h, t, h, scheme) -
                               mgf(model, payments, theta, s - h, t, h, scheme)) /
                              (2.0 * h);
            const RateSnapshot snap = take_snapshot(model, payments, s);
            Matrix a;
            mgf_generator(snap, theta, 1.0, a);
            Matrix r = ds + a * f;
            for (int l = 0; l < n; ++l) {
                if (theta(l) == 0.0) continue;
                Vector up = theta, down = theta;
                up(l) += theta_step;
                down(l) -= theta_step;
                const Matrix dtheta = (mgf(model, payments, up, s, t, h, scheme) -
                                       mgf(model, payments, down, s, t, h, scheme)) /
                                      (2.0 * theta_step);
                r -= snap.r * theta(l) * dtheta;
            }
            res.residual = r.cwiseAbs().maxCoeff();
        } catch (...) {
#pragma omp critical(mgf_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

} // namespace mstate
