#include "mstate/payments.hpp"

#include "mstate/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace mstate {

std::vector<double> PaymentSet::breakpoints() const {
    std::set<double> all;
    for (const auto& s : sojourn) all.insert(s.rate.breakpoints().begin(), s.rate.breakpoints().end());
    for (const auto& p : transition) all.insert(p.amount.breakpoints().begin(), p.amount.breakpoints().end());
    return {all.begin(), all.end()};
}

namespace {

constexpr double kPaymentBound = 1e12;

void scan_bounded(const TimeFunction& f, double horizon, const std::vector<double>& extra,
                  const std::string& label) {
    auto check = [&](double t) {
        double v = 0.0;
        try {
            v = f(t);
        } catch (const DomainError& e) {
            throw ValidationError(label + " cannot be evaluated: " + e.what());
        }
        if (std::abs(v) > kPaymentBound) {
            std::ostringstream os;
            os << label << " = " << v << " is unbounded at t=" << t;
            throw ValidationError(os.str());
        }
    };
    const int steps = static_cast<int>(std::ceil(horizon * 64.0));
    for (int g = 0; g <= steps; ++g) check(std::min(horizon, g / 64.0));
    for (double b : extra) {
        if (b < 0.0 || b > horizon) continue;
        check(b);
        check(std::max(0.0, b - 1e-9));
        check(std::min(horizon, b + 1e-9));
    }
}

} // namespace

void validate_payments(const ModelSpec& model, const PaymentSet& payments) {
    const int J = model.num_states();
    const int n = payments.num_contracts();
    if (n < 1) throw ValidationError("payment set needs at least one contract");
    const auto bps = payments.breakpoints();
    std::set<std::pair<int, int>> seen_sojourn;
    for (const auto& s : payments.sojourn) {
        if (s.contract < 0 || s.contract >= n || s.state < 0 || s.state >= J) {
            std::ostringstream os;
            os << "sojourn payment (contract " << s.contract << ", state " << s.state << ") out of range";
            throw ValidationError(os.str());
        }
        if (!seen_sojourn.insert({s.contract, s.state}).second)
            throw ValidationError("duplicate sojourn payment for contract " + payments.names[s.contract]);
        scan_bounded(s.rate, model.horizon, bps,
                     "sojourn payment b_" + std::to_string(s.state) + " of " + payments.names[s.contract]);
    }
    std::set<std::tuple<int, int, int>> seen_transition;
    for (const auto& p : payments.transition) {
        if (p.contract < 0 || p.contract >= n || p.from < 0 || p.from >= J || p.to < 0 || p.to >= J ||
            p.from == p.to) {
            std::ostringstream os;
            os << "transition payment (contract " << p.contract << ", " << p.from << "->" << p.to
               << ") out of range";
            throw ValidationError(os.str());
        }
        if (!seen_transition.insert({p.contract, p.from, p.to}).second)
            throw ValidationError("duplicate transition payment for contract " + payments.names[p.contract]);
        scan_bounded(p.amount, model.horizon, bps,
                     "transition payment b_" + std::to_string(p.from) + std::to_string(p.to) + " of " +
                         payments.names[p.contract]);
    }
}

PaymentSet aggregate(const PaymentSet& payments, const std::string& name) {
    // Sum of DSL trees via their printed forms keeps the result a TimeFunction.
    std::map<int, std::string> sojourn;
    std::map<std::pair<int, int>, std::string> transition;
    for (const auto& s : payments.sojourn) {
        auto& acc = sojourn[s.state];
        acc += (acc.empty() ? "" : " + ") + s.rate.to_string();
    }
    for (const auto& p : payments.transition) {
        auto& acc = transition[{p.from, p.to}];
        acc += (acc.empty() ? "" : " + ") + p.amount.to_string();
    }
    PaymentSet out;
    out.names = {name};
    for (const auto& [state, src] : sojourn) out.sojourn.push_back({0, state, parse_timefun(src)});
    for (const auto& [key, src] : transition) out.transition.push_back({0, key.first, key.second, parse_timefun(src)});
    return out;
}

PaymentSet select_contracts(const PaymentSet& payments, const std::vector<int>& contracts) {
    PaymentSet out;
    for (std::size_t c = 0; c < contracts.size(); ++c) {
        const int src = contracts[c];
        if (src < 0 || src >= payments.num_contracts()) throw ConfigError("contract index out of range");
        out.names.push_back(payments.names[src]);
        for (const auto& s : payments.sojourn)
            if (s.contract == src) out.sojourn.push_back({static_cast<int>(c), s.state, s.rate});
        for (const auto& p : payments.transition)
            if (p.contract == src) out.transition.push_back({static_cast<int>(c), p.from, p.to, p.amount});
    }
    return out;
}

Vector sojourn_vector(const ModelSpec& model, const PaymentSet& payments, int contract, double t) {
    if (contract < 0 || contract >= payments.num_contracts()) throw ConfigError("contract index out of range");
    Vector v = Vector::Zero(model.num_states());
    for (const auto& s : payments.sojourn)
        if (s.contract == contract) v(s.state) = s.rate(t);
    return v;
}

Matrix transition_payment_matrix(const ModelSpec& model, const PaymentSet& payments, int contract, double t) {
    if (contract < 0 || contract >= payments.num_contracts()) throw ConfigError("contract index out of range");
    const int J = model.num_states();
    Matrix m = Matrix::Zero(J, J);
    for (const auto& p : payments.transition)
        if (p.contract == contract) m(p.from, p.to) = p.amount(t);
    return m;
}

void take_snapshot(const ModelSpec& model, const PaymentSet& payments, double t, RateSnapshot& out) {
    const int J = model.num_states();
    const int n = payments.num_contracts();
    out.t = t;
    out.r = model.interest(t);
    intensity_matrix(model, t, out.M);
    out.B.resize(static_cast<std::size_t>(n));
    out.b.resize(static_cast<std::size_t>(n));
    for (int l = 0; l < n; ++l) {
        out.B[l].setZero(J, J);
        out.b[l].setZero(J);
    }
    for (const auto& s : payments.sojourn) out.b[s.contract](s.state) = s.rate(t);
    for (const auto& p : payments.transition) out.B[p.contract](p.from, p.to) = p.amount(t);
}

RateSnapshot take_snapshot(const ModelSpec& model, const PaymentSet& payments, double t) {
    RateSnapshot s;
    take_snapshot(model, payments, t, s);
    return s;
}

Matrix RateSnapshot::reward_R(int contract) const {
    Matrix r = M.cwiseProduct(B.at(static_cast<std::size_t>(contract)));
    r.diagonal() += b[contract];
    return r;
}

Matrix RateSnapshot::reward_C(const MultiIndex& y) const {
    if (y.size() != static_cast<int>(B.size())) throw ConfigError("multi-index dimension does not match contract count");
    if (y.is_zero() || y.is_unit())
        throw ConfigError("C^(y) is defined only for y outside E_n and 0, got " + y.to_string());
    Matrix c = M;
    for (int l = 0; l < y.size(); ++l) {
        // Zeroth Hadamard power is the all-ones matrix, so it is skipped.
        for (int p = 0; p < y[l]; ++p) c = c.cwiseProduct(B[l]);
    }
    return c;
}

Matrix reward_matrix_R(const ModelSpec& model, const PaymentSet& payments, int contract, double t) {
    if (contract < 0 || contract >= payments.num_contracts()) throw ConfigError("contract index out of range");
    return take_snapshot(model, payments, t).reward_R(contract);
}

Matrix reward_matrix_C(const ModelSpec& model, const PaymentSet& payments, const MultiIndex& y, double t) {
    return take_snapshot(model, payments, t).reward_C(y);
}

} // namespace mstate
