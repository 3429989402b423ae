#pragma once

#include "mstate/markov.hpp"
#include "mstate/multi_index.hpp"
#include "mstate/payments.hpp"

#include <vector>

namespace mstate {

inline constexpr std::size_t kDefaultBlockCap = 512;

struct MomentOptions {
    double h = kDefaultStep;
    // Earliest start time solved for; the grid runs from s_min to t.
    double s_min = 0.0;
    std::size_t block_cap = kDefaultBlockCap;
    Scheme scheme = Scheme::MidpointExp;
};

// Conditional partial moments V^(y)(s_g, t) (J x J) for every y in S~(k) and
// every node s_g of the breakpoint-aligned grid on [s_min, t].
class MomentGrid {
public:
    MomentGrid(const MultiIndex& k, std::vector<double> times, int num_states);

    const LowerSet& indices() const { return set_; }
    const std::vector<double>& times() const { return times_; }
    int num_states() const { return J_; }

    Eigen::Map<const Matrix> partial(std::size_t g, std::size_t p) const;
    Eigen::Map<Matrix> partial(std::size_t g, std::size_t p);
    Matrix partial(std::size_t g, const MultiIndex& y) const { return partial(g, set_.position(y)); }

    // Node index of time s; throws ConfigError if s is not a node.
    std::size_t node(double s) const;

private:
    LowerSet set_;
    std::vector<double> times_;
    int J_;
    std::vector<double> data_;
};

// Backward RK4 solve of the stacked partial-moment equations for all
// y in S~(k) jointly, lowest lex order first.
MomentGrid partial_moments(const ModelSpec& model, const PaymentSet& payments, const MultiIndex& k, double t,
                           const MomentOptions& options = {});

// Per-state conditional moments V_i^(y)(s_g, t).
class ConditionalMoments {
public:
    ConditionalMoments(const MultiIndex& k, std::vector<double> times, int num_states);

    const LowerSet& indices() const { return set_; }
    const std::vector<double>& times() const { return times_; }
    int num_states() const { return J_; }

    double value(std::size_t g, std::size_t p, int state) const { return data_[offset(g, p) + state]; }
    double& value(std::size_t g, std::size_t p, int state) { return data_[offset(g, p) + state]; }
    double value(std::size_t g, const MultiIndex& y, int state) const {
        return value(g, set_.position(y), state);
    }
    std::size_t node(double s) const;

private:
    std::size_t offset(std::size_t g, std::size_t p) const {
        return (g * set_.size() + p) * static_cast<std::size_t>(J_);
    }
    LowerSet set_;
    std::vector<double> times_;
    int J_;
    std::vector<double> data_;
};

// Row sums of the partial moments.
ConditionalMoments conditional_moments(const MomentGrid& grid);

// Independent route: backward RK4 on the per-state moment equations, without
// forming partial moments.
ConditionalMoments conditional_moments_direct(const ModelSpec& model, const PaymentSet& payments,
                                              const MultiIndex& k, double t, const MomentOptions& options = {});

// m_i^(k)(s_g, t) from the non-central moments via the multidimensional
// binomial formula. Requires k <= the grid's top index.
double central_moment(const ConditionalMoments& moments, const MultiIndex& k, int state, std::size_t g);

// Per-state curves over a grid.
struct StateCurves {
    std::vector<double> times;
    int num_states = 0;
    std::vector<double> values;  // [g * J + i]

    double at(std::size_t g, int state) const { return values[g * static_cast<std::size_t>(num_states) + state]; }
    std::size_t node(double s) const;
};

// Reserves of every contract and the covariance of every contract pair,
// from Thiele's equations and the sum-at-risk covariance equations.
struct HattendorffCurves {
    std::vector<double> times;
    int num_states = 0;
    int num_contracts = 0;
    std::vector<double> reserves;     // [(g * n + l) * J + i]
    std::vector<double> covariances;  // [((g * n + l) * n + m) * J + i], symmetric

    double reserve(std::size_t g, int l, int state) const;
    double covariance(std::size_t g, int l, int m, int state) const;
    Matrix covariance_matrix(std::size_t g, int state) const;
    std::size_t node(double s) const;
};

HattendorffCurves hattendorff_covariances(const ModelSpec& model, const PaymentSet& payments, double t,
                                          const MomentOptions& options = {});

// m_i^(e_l + e_m)(., t) for one pair, terminal value 0.
StateCurves covariance_hattendorff(const ModelSpec& model, const PaymentSet& payments, int l, int m, double t,
                                   const MomentOptions& options = {});

// Conditional covariance matrix Sigma_i(s, t) (n x n), via the covariance
// equations above.
Matrix covariance_matrix(const ModelSpec& model, const PaymentSet& payments, int state, double s, double t,
                         const MomentOptions& options = {});

struct CorrelationMatrix {
    Matrix rho;
    // degenerate(l, m) != 0 when either variance is below kDegenerateVariance;
    // the matching rho entry is then reported as 0.
    Eigen::MatrixXi degenerate;
};

inline constexpr double kDegenerateVariance = 1e-14;

CorrelationMatrix correlation_from_covariance(const Matrix& sigma);

CorrelationMatrix correlation_matrix(const ModelSpec& model, const PaymentSet& payments, int state, double s,
                                     double t, const MomentOptions& options = {});

struct Margins {
    double z = 0.0;
    Vector per_product;  // z * sqrt(Sigma_ll / N)
    double aggregate = 0.0;  // z * sqrt(1' Sigma 1 / N)
};

// Normal-approximation safety margins for a portfolio of N independent
// copies. `mean` only fixes the dimension.
Margins clt_margins(const Vector& mean, const Matrix& sigma, double confidence, double portfolio_size);

} // namespace mstate
