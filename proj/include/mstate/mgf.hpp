#pragma once

#include "mstate/payments.hpp"

#include <vector>

namespace mstate {

// F(theta; s, t): entry (i, j) is E[exp(<theta, U(s,t)>) 1{Z(t) = j} | Z(s) = i],
// the product integral of
//   A(s, u; theta) = M(u) . {exp(v(s,u) <theta, b_ij(u)>)} + v(s,u) sum_l theta_l diag(b^l(u)).
// The Hadamard factor on the diagonal is exp(0) = 1. Throws NumericalError when an
// exponent exceeds 700 instead of producing inf.
Matrix mgf(const ModelSpec& model, const PaymentSet& payments, const Vector& theta, double s, double t,
           double h = kDefaultStep, Scheme scheme = Scheme::MidpointExp);

struct MgfResidual {
    double s = 0.0;
    double residual = 0.0;  // max-norm of the PDE residual matrix
    bool excluded = false;  // [s - h, s + h] touches a breakpoint
};

// Finite-difference residual of
//   dF/ds + [M . {exp(<theta, b_ij>)} + sum_l theta_l diag(b^l)] F - r sum_l theta_l dF/dtheta_l
// at each s, with central differences of step h in s and theta_step in theta.
// Points are independent and processed in parallel unless `parallel` is false;
// both kernels give identical results.
std::vector<MgfResidual> mgf_pde_residual(const ModelSpec& model, const PaymentSet& payments, const Vector& theta,
                                          const std::vector<double>& s_points, double t, double h = kDefaultStep,
                                          Scheme scheme = Scheme::MidpointExp, double theta_step = 1e-4,
                                          bool parallel = true);

} // namespace mstate
