#pragma once

#include "mstate/markov.hpp"
#include "mstate/multi_index.hpp"

#include <string>
#include <vector>

namespace mstate {

// b_i^l(t): rate paid to contract l while the process sits in state i.
struct SojournPayment {
    int contract = 0;
    int state = 0;
    TimeFunction rate;
};

// b_ij^l(t): lump sum paid to contract l on an i -> j transition.
struct TransitionPayment {
    int contract = 0;
    int from = 0;
    int to = 0;
    TimeFunction amount;
};

// n-dimensional payment process: contract l pays sojourn rates and transition
// lump sums; unlisted entries are zero. Lump sums at deterministic times are
// not representable.
struct PaymentSet {
    std::vector<std::string> names;
    std::vector<SojournPayment> sojourn;
    std::vector<TransitionPayment> transition;

    int num_contracts() const { return static_cast<int>(names.size()); }
    std::vector<double> breakpoints() const;
};

// Throws ValidationError for out-of-range indices, duplicate entries, a
// transition payment on the diagonal, or payment functions that are not
// finite and bounded (|b| <= 1e12) on a dense scan of [0, horizon].
void validate_payments(const ModelSpec& model, const PaymentSet& payments);

// Sum of the listed contracts into a single contract (the aggregate payment
// stream).
PaymentSet aggregate(const PaymentSet& payments, const std::string& name = "total");

// Restriction to a subset of contracts, in the given order.
PaymentSet select_contracts(const PaymentSet& payments, const std::vector<int>& contracts);

// b^l(t), length J.
Vector sojourn_vector(const ModelSpec& model, const PaymentSet& payments, int contract, double t);
// B_l(t), J x J with zero diagonal.
Matrix transition_payment_matrix(const ModelSpec& model, const PaymentSet& payments, int contract, double t);

// Every input of the moment equations evaluated at one time point.
struct RateSnapshot {
    double t = 0.0;
    double r = 0.0;
    Matrix M;                 // intensity matrix
    std::vector<Matrix> B;    // B_l: transition payments, zero diagonal
    std::vector<Vector> b;    // b^l: sojourn rates

    // R_l = M . B_l + diag(b^l)
    Matrix reward_R(int contract) const;
    // C^(y) = M . B_1^{.y_1} . ... . B_n^{.y_n}, y not in E_n u {0}; 0^0 = 1.
    Matrix reward_C(const MultiIndex& y) const;
};

RateSnapshot take_snapshot(const ModelSpec& model, const PaymentSet& payments, double t);
void take_snapshot(const ModelSpec& model, const PaymentSet& payments, double t, RateSnapshot& out);

Matrix reward_matrix_R(const ModelSpec& model, const PaymentSet& payments, int contract, double t);
Matrix reward_matrix_C(const ModelSpec& model, const PaymentSet& payments, const MultiIndex& y, double t);

} // namespace mstate
