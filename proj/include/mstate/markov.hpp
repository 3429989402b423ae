#pragma once

#include "mstate/timefun.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mstate {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultStep = 1.0 / 256.0;

struct Intensity {
    int from = 0;
    int to = 0;
    TimeFunction rate;
};

// Time-inhomogeneous Markov jump process on {0, ..., J-1} together with a
// deterministic short rate. Intensities not listed are identically zero.
struct ModelSpec {
    std::vector<std::string> states;
    std::vector<Intensity> intensities;
    TimeFunction interest;
    double horizon = 0.0;

    int num_states() const { return static_cast<int>(states.size()); }
    // Breakpoints of the intensities and the interest rate.
    std::vector<double> breakpoints() const;
};

// Throws ValidationError when a state index is out of range, a pair is listed
// twice, or an intensity is negative or non-finite on a dense scan of
// [0, horizon]. The message names the offending (i, j, t).
void validate_model(const ModelSpec& model);

// M(t): off-diagonal mu_ij(t), diagonal minus the row sum.
Matrix intensity_matrix(const ModelSpec& model, double t);
void intensity_matrix(const ModelSpec& model, double t, Matrix& out);

// Breakpoint-aligned time grid: multiples of h anchored at 0, plus s, t and
// every breakpoint strictly inside (s, t). Nodes ascend; front() == s,
// back() == t.
struct TimeGrid {
    std::vector<double> nodes;

    std::size_t cells() const { return nodes.empty() ? 0 : nodes.size() - 1; }
    // Index of the node equal to x (within 1e-12), or npos.
    std::size_t find(double x) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

TimeGrid make_grid(double s, double t, double h, std::span<const double> breakpoints);

// Sorted, deduplicated union.
std::vector<double> merge_breakpoints(std::initializer_list<std::span<const double>> lists);

enum class Scheme { Euler, MidpointExp };

Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme scheme);

// Square-matrix-valued function of time with its discontinuity points.
struct MatrixFunction {
    Eigen::Index dim = 0;
    std::function<void(double, Matrix&)> eval;
    std::vector<double> breakpoints;
};

// Per-cell factor: I + A dt (Euler) or the 8-term Taylor polynomial of
// exp(A dt) (MidpointExp). A is the generator sampled at the cell midpoint.
void cell_factor(const Matrix& a, double dt, Scheme scheme, Matrix& out);

// prod_{(s,t]} (I + A(x) dx) on make_grid(s, t, h, A.breakpoints).
Matrix product_integral(const MatrixFunction& a, double s, double t,
                        Scheme scheme = Scheme::MidpointExp, double h = kDefaultStep);

// Backward sweep over a grid: visit(g, G) is called for g = G..0 with
// G = prod_{(nodes[g], nodes.back()]}. The visitor sees every start point of a
// fixed end point in one pass.
void product_integral_sweep(const MatrixFunction& a, const TimeGrid& grid, Scheme scheme,
                            const std::function<void(std::size_t, const Matrix&)>& visit);

// Right-multiplied variant that only carries an N x c slab (e.g. the last block
// column of a block product integral): visit sees prod * terminal.
void product_integral_sweep(const MatrixFunction& a, const TimeGrid& grid, Scheme scheme,
                            const Matrix& terminal,
                            const std::function<void(std::size_t, const Matrix&)>& visit);

MatrixFunction intensity_function(const ModelSpec& model);

// P(s,t); rows are checked to sum to 1 within 1e-10 and entries are clamped
// to [0,1] after a tolerance check.
Matrix transition_probabilities(const ModelSpec& model, double s, double t, double h = kDefaultStep,
                                Scheme scheme = Scheme::MidpointExp);

struct TransitionCurves {
    std::vector<double> times;
    std::vector<Matrix> p;  // p[g] = P(times[g], t)
};

TransitionCurves transition_probability_curves(const ModelSpec& model, double s0, double t,
                                               double h = kDefaultStep,
                                               Scheme scheme = Scheme::MidpointExp);

// Cumulative integral of the short rate on a grid, with Simpson's rule per
// cell and sub-cell evaluation for arbitrary points.
class DiscountTable {
public:
    DiscountTable(const TimeFunction& rate, const TimeGrid& grid);

    // int_{grid.front()}^{x} r(u) du, for x inside the grid span.
    double integral_to(double x) const;
    double integral(double a, double b) const { return integral_to(b) - integral_to(a); }
    // v(a, b) = exp(-int_a^b r).
    double discount(double a, double b) const { return std::exp(-integral(a, b)); }

private:
    const TimeFunction* rate_;
    std::vector<double> nodes_;
    std::vector<double> cumulative_;
};

// Simpson's rule on [a, b] evaluating at one-sided interior points so that a
// breakpoint at either end does not leak into the cell.
double simpson_cell(const TimeFunction& f, double a, double b);

// Fixed-step classic RK4 integrating dy/ds = f(s, y) backward from
// grid.back() to grid.front(). Stage evaluations at cell ends use points
// nudged into the cell interior. visit(g, y) runs at every node, starting with
// the terminal node.
using OdeRhs = std::function<void(double, const Vector&, Vector&)>;
void rk4_backward(const TimeGrid& grid, Vector& y, const OdeRhs& rhs,
                  const std::function<void(std::size_t, const Vector&)>& visit);

} // namespace mstate
