#pragma once

#include "mstate/multi_index.hpp"
#include "mstate/payments.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace mstate {

// One realisation of Z on [s, t]: states[0] = Z(s) and states[m] is entered
// at times[m] (times[0] = s).
struct SamplePath {
    std::vector<double> times;
    std::vector<int> states;
    double end = 0.0;

    int final_state() const { return states.back(); }
    std::size_t jumps() const { return states.size() - 1; }
};

// Engine for one path: mt19937_64 seeded from (seed, index) through seed_seq,
// so a path depends only on its index.
std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t index);

// Thinning sampler. Per grid cell and state the dominating rate is 1.01 times
// the largest exit rate seen at the cell ends and midpoint. If a candidate
// exposes a larger rate, the bound of that cell is raised on an 8x finer
// subdivision (at most three times) and the candidates of the difference are
// drawn on the stretch already sampled, so the jump hazard is exact wherever
// the raised bound holds.
class PathSimulator {
public:
    PathSimulator(const ModelSpec& model, double s, double t, double h = kDefaultStep);

    SamplePath simulate(int initial_state, std::uint64_t seed, std::uint64_t index) const;
    SamplePath simulate(int initial_state, std::mt19937_64& engine) const;

    const TimeGrid& grid() const { return grid_; }

private:
    double exit_rate(int state, double x) const;
    int choose_target(int state, double x, double u) const;
    // Called when the candidate tau in `cell` exceeds the cell bound; the
    // state has been sampled from `start`. Returns the jump time (<= tau).
    double resolve_violation(int state, std::size_t cell, double start, double tau,
                             std::mt19937_64& engine) const;

    const ModelSpec* model_;
    TimeGrid grid_;
    int J_;
    std::vector<std::vector<double>> bound_;       // [state][cell]
    std::vector<std::vector<double>> cumulative_;  // [state][node]
};

SamplePath simulate_path(const ModelSpec& model, double s, double t, int initial_state, std::uint64_t seed,
                         std::uint64_t index, double h = kDefaultStep);

// Discounted payments of a path: sojourn parts by the trapezoid rule on the
// grid cells (clipped to each stay), jump parts v(s, tau) b_ij(tau).
class PresentValueEvaluator {
public:
    PresentValueEvaluator(const ModelSpec& model, const PaymentSet& payments, double s, double t,
                          double h = kDefaultStep);

    Vector evaluate(const SamplePath& path) const;
    void evaluate(const SamplePath& path, double* out) const;

private:
    double sojourn_integral(int contract, int state, double a, double b) const;
    double integrand(int contract, int state, double u) const;

    const ModelSpec* model_;
    const PaymentSet* payments_;
    double s_;
    TimeGrid grid_;
    DiscountTable discount_;
    int J_, n_;
    std::vector<const TimeFunction*> sojourn_;     // [l * J + i], null if zero
    std::vector<const TimeFunction*> transition_;  // [(l * J + i) * J + j]
    std::vector<double> cumulative_;               // [(l * J + i) * nodes + g]
};

struct MonteCarloOptions {
    double h = kDefaultStep;
    bool parallel = true;
    // Raw mixed moments E[prod U_l^{y_l}] for y in S(k) are reported when set.
    std::optional<MultiIndex> k;
};

struct MonteCarloStats {
    std::size_t paths = 0;
    Vector mean, mean_se;
    Matrix covariance, covariance_se;
    std::vector<MultiIndex> moment_index;
    Vector raw_moment, raw_moment_se;
    Vector occupancy, occupancy_se;  // fraction of paths in each state at t
};

// Simulates N paths from initial_state at s and returns sample statistics.
// The statistics are reduced in path order, so the serial and parallel
// kernels agree bit for bit.
MonteCarloStats present_value_samples(const ModelSpec& model, const PaymentSet& payments, double s, double t,
                                      int initial_state, std::size_t paths, std::uint64_t seed,
                                      const MonteCarloOptions& options = {});

// Raw per-path output: values (N x n) and final states.
struct PathSamples {
    Matrix values;
    std::vector<int> final_states;
};

PathSamples sample_present_values(const ModelSpec& model, const PaymentSet& payments, double s, double t,
                                  int initial_state, std::size_t paths, std::uint64_t seed, double h = kDefaultStep,
                                  bool parallel = true);

MonteCarloStats summarize(const PathSamples& samples, int num_states, const std::optional<MultiIndex>& k);

} // namespace mstate
