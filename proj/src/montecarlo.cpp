#include "mstate/montecarlo.hpp"

#include "mstate/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

namespace mstate {

namespace {

constexpr double kBoundSlack = 1.01;
constexpr int kRefinement = 8;
constexpr int kMaxRefinementDepth = 3;
constexpr double kNudge = 1e-9;

double uniform(std::mt19937_64& engine) { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }

double exponential(std::mt19937_64& engine) { return -std::log1p(-uniform(engine)); }

std::vector<double> all_breakpoints(const ModelSpec& model, const PaymentSet* payments) {
    const auto a = model.breakpoints();
    if (!payments) return a;
    const auto b = payments->breakpoints();
    return merge_breakpoints({a, b});
}

void check_window(const ModelSpec& model, double s, double t) {
    if (!(s >= 0.0) || !(s <= t) || t > model.horizon + 1e-12) {
        std::ostringstream os;
        os << "need 0 <= s <= t <= horizon (" << model.horizon << "), got s=" << s << " t=" << t;
        throw ConfigError(os.str());
    }
}

} // namespace

std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

PathSimulator::PathSimulator(const ModelSpec& model, double s, double t, double h)
    : model_(&model), J_(model.num_states()) {
    check_window(model, s, t);
    grid_ = make_grid(s, t, h, model.breakpoints());
    const auto& x = grid_.nodes;
    const std::size_t cells = grid_.cells();
    bound_.assign(static_cast<std::size_t>(J_), std::vector<double>(cells, 0.0));
    cumulative_.assign(static_cast<std::size_t>(J_), std::vector<double>(x.size(), 0.0));
    for (int i = 0; i < J_; ++i) {
        for (std::size_t c = 0; c < cells; ++c) {
            const double e = (x[c + 1] - x[c]) * kNudge;
            const double peak = std::max({exit_rate(i, x[c] + e), exit_rate(i, 0.5 * (x[c] + x[c + 1])),
                                          exit_rate(i, x[c + 1] - e)});
            bound_[i][c] = kBoundSlack * peak;
            cumulative_[i][c + 1] = cumulative_[i][c] + bound_[i][c] * (x[c + 1] - x[c]);
        }
    }
}

double PathSimulator::exit_rate(int state, double x) const {
    double total = 0.0;
    for (const auto& q : model_->intensities)
        if (q.from == state && q.to != state) total += q.rate(x);
    return total;
}

int PathSimulator::choose_target(int state, double x, double u) const {
    std::vector<std::pair<int, double>> rates;
    double total = 0.0;
    for (const auto& q : model_->intensities) {
        if (q.from != state || q.to == state) continue;
        const double r = q.rate(x);
        if (r > 0.0) {
            rates.emplace_back(q.to, r);
            total += r;
        }
    }
    if (rates.empty()) throw NumericalError("accepted a jump from a state with zero exit rate");
    double acc = 0.0;
    const double target = u * total;
    for (const auto& [to, r] : rates) {
        acc += r;
        if (target < acc) return to;
    }
    return rates.back().first;
}

namespace {

// Thinning inside one grid cell after a candidate exposed a rate above the
// cell's bound B_0. Refinement d splits the cell into 8^d pieces with bounds
// B_d >= B_{d-1} and adds an independent layer of candidates with rate
// B_d - B_{d-1}, accepted with probability
// (min(rate, B_d) - B_{d-1})^+ / (B_d - B_{d-1}). Layer 0 accepts with
// min(rate, B_0) / B_0, so the layer hazards add up to the exit rate. A
// candidate above its own layer's bound is always accepted and the next
// layer is drawn on [start, candidate) to see whether it jumps first.
template <class Rate>
class CellRefinement {
public:
    CellRefinement(const Rate& rate, int state, double a, double b, double coarse, std::mt19937_64& engine)
        : rate_(rate), state_(state), a_(a), b_(b), engine_(engine) {
        levels_.push_back({coarse});
    }

    // The layer-0 candidate at tau exceeded B_0 and every layer-0 candidate in
    // [start, tau) was rejected. Returns the jump time, at most tau.
    double resolve(double start, double tau) { return layer(1, start, tau); }

private:
    double level(int d, double x) const {
        const auto& lv = levels_[static_cast<std::size_t>(d)];
        const auto n = lv.size();
        const auto p = static_cast<std::size_t>(std::max(0.0, (x - a_) / (b_ - a_) * static_cast<double>(n)));
        return lv[std::min(p, n - 1)];
    }

    void build(int d, double at) {
        if (d > kMaxRefinementDepth) {
            std::ostringstream os;
            os << "thinning bound for state " << state_ << " still exceeded at t=" << at << " after "
               << kMaxRefinementDepth << " refinements";
            throw NumericalError(os.str());
        }
        if (static_cast<int>(levels_.size()) > d) return;
        const auto& prev = levels_.back();
        std::vector<double> next(prev.size() * kRefinement);
        const double width = (b_ - a_) / static_cast<double>(next.size());
        for (std::size_t q = 0; q < next.size(); ++q) {
            const double lo = a_ + static_cast<double>(q) * width;
            const double hi = lo + width;
            const double e = width * kNudge;
            const double peak = std::max({rate_(lo + e), rate_(0.5 * (lo + hi)), rate_(hi - e)});
            next[q] = std::max(prev[q / kRefinement], kBoundSlack * peak);
        }
        levels_.push_back(std::move(next));
    }

    // First accepted candidate of layers >= d in [start, end), or end.
    double layer(int d, double start, double end) {
        build(d, end);
        const double pieces = static_cast<double>(levels_[static_cast<std::size_t>(d)].size());
        const double width = (b_ - a_) / pieces;
        double x = start;
        double budget = exponential(engine_);
        while (x < end) {
            const double p = std::min(pieces - 1.0, std::floor((x - a_) / width));
            double edge = std::min(end, a_ + (p + 1.0) * width);
            if (edge <= x) edge = std::min(end, a_ + (p + 2.0) * width);
            const double mid = 0.5 * (x + edge);
            const double below = level(d - 1, mid);
            const double gap = level(d, mid) - below;
            if (gap > 0.0 && budget < gap * (edge - x)) {
                const double y = x + budget / gap;
                const double r = rate_(y);
                if (r > level(d, y)) return layer(d + 1, start, y);
                if (uniform(engine_) * gap < r - below) return y;
                x = y;
                budget = exponential(engine_);
                continue;
            }
            if (gap > 0.0) budget -= gap * (edge - x);
            x = edge;
        }
        return end;
    }

    const Rate& rate_;
    int state_;
    double a_, b_;
    std::mt19937_64& engine_;
    std::vector<std::vector<double>> levels_;
};

} // namespace

double PathSimulator::resolve_violation(int state, std::size_t cell, double start, double tau,
                                        std::mt19937_64& engine) const {
    const auto rate = [&](double x) { return exit_rate(state, x); };
    const auto& x = grid_.nodes;
    CellRefinement<decltype(rate)> refine(rate, state, x[cell], x[cell + 1], bound_[state][cell], engine);
    return refine.resolve(start, tau);
}

SamplePath PathSimulator::simulate(int initial_state, std::uint64_t seed, std::uint64_t index) const {
    auto engine = path_engine(seed, index);
    return simulate(initial_state, engine);
}

SamplePath PathSimulator::simulate(int initial_state, std::mt19937_64& engine) const {
    if (initial_state < 0 || initial_state >= J_) throw ConfigError("initial state out of range");
    const auto& x = grid_.nodes;
    const std::size_t cells = grid_.cells();
    SamplePath path;
    path.end = x.back();
    path.times.push_back(x.front());
    path.states.push_back(initial_state);
    if (cells == 0) return path;

    int state = initial_state;
    double now = x.front();
    std::size_t g = 0;
    while (g < cells) {
        const auto& cum = cumulative_[state];
        const auto& bd = bound_[state];
        const double target = cum[g] + bd[g] * (now - x[g]) + exponential(engine);
        if (target >= cum.back()) break;
        // Largest c >= g with cum[c] <= target; then cum[c + 1] > target.
        auto it = std::upper_bound(cum.begin() + static_cast<std::ptrdiff_t>(g), cum.end(), target);
        std::size_t c = static_cast<std::size_t>(it - cum.begin()) - 1;
        c = std::min(c, cells - 1);
        if (bd[c] <= 0.0) {
            now = x[c + 1];
            g = c + 1;
            continue;
        }
        double tau = std::clamp(x[c] + (target - cum[c]) / bd[c], x[c], x[c + 1]);
        const double rate = exit_rate(state, tau);
        if (rate > bd[c]) {
            tau = resolve_violation(state, c, std::max(x[c], path.times.back()), tau, engine);
        } else if (uniform(engine) * bd[c] >= rate) {
            now = tau;
            g = c;
            continue;
        }
        state = choose_target(state, tau, uniform(engine));
        path.times.push_back(tau);
        path.states.push_back(state);
        now = tau;
        g = c;
    }
    return path;
}

SamplePath simulate_path(const ModelSpec& model, double s, double t, int initial_state, std::uint64_t seed,
                         std::uint64_t index, double h) {
    return PathSimulator(model, s, t, h).simulate(initial_state, seed, index);
}

// ---------------------------------------------------------------------------

PresentValueEvaluator::PresentValueEvaluator(const ModelSpec& model, const PaymentSet& payments, double s, double t,
                                             double h)
    : model_(&model), payments_(&payments), s_(s),
      grid_(make_grid(s, t, h, all_breakpoints(model, &payments))),
      discount_(model.interest, grid_), J_(model.num_states()), n_(payments.num_contracts()) {
    check_window(model, s, t);
    sojourn_.assign(static_cast<std::size_t>(n_ * J_), nullptr);
    transition_.assign(static_cast<std::size_t>(n_ * J_ * J_), nullptr);
    for (const auto& p : payments.sojourn)
        if (!p.rate.is_zero()) sojourn_[p.contract * J_ + p.state] = &p.rate;
    for (const auto& p : payments.transition)
        if (!p.amount.is_zero()) transition_[(p.contract * J_ + p.from) * J_ + p.to] = &p.amount;

    const auto& x = grid_.nodes;
    const std::size_t nodes = x.size();
    cumulative_.assign(static_cast<std::size_t>(n_ * J_) * nodes, 0.0);
    for (int l = 0; l < n_; ++l)
        for (int i = 0; i < J_; ++i) {
            if (!sojourn_[l * J_ + i]) continue;
            double* cum = cumulative_.data() + static_cast<std::size_t>(l * J_ + i) * nodes;
            for (std::size_t c = 0; c + 1 < nodes; ++c) {
                const double e = (x[c + 1] - x[c]) * kNudge;
                cum[c + 1] = cum[c] + 0.5 * (x[c + 1] - x[c]) *
                                          (integrand(l, i, x[c] + e) + integrand(l, i, x[c + 1] - e));
            }
        }
}

double PresentValueEvaluator::integrand(int contract, int state, double u) const {
    return discount_.discount(s_, u) * (*sojourn_[contract * J_ + state])(u);
}

double PresentValueEvaluator::sojourn_integral(int contract, int state, double a, double b) const {
    if (!sojourn_[contract * J_ + state] || b <= a) return 0.0;
    const auto& x = grid_.nodes;
    const std::size_t cells = grid_.cells();
    auto cell_of = [&](double v, bool right) {
        // right: the cell whose closure ends at v from the left.
        auto it = right ? std::lower_bound(x.begin(), x.end(), v) : std::upper_bound(x.begin(), x.end(), v);
        std::size_t c = it == x.begin() ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
        return std::min(c, cells - 1);
    };
    auto trapezoid = [&](std::size_t c, double lo, double hi) {
        if (hi <= lo) return 0.0;
        const double e = (x[c + 1] - x[c]) * kNudge;
        const double u0 = std::max(lo, x[c] + e);
        const double u1 = std::min(hi, x[c + 1] - e);
        return 0.5 * (hi - lo) * (integrand(contract, state, u0) + integrand(contract, state, u1));
    };
    const std::size_t ga = cell_of(a, false);
    const std::size_t gb = cell_of(b, true);
    if (ga >= gb) return trapezoid(ga, a, b);
    const double* cum = cumulative_.data() + static_cast<std::size_t>(contract * J_ + state) * x.size();
    return trapezoid(ga, a, x[ga + 1]) + (cum[gb] - cum[ga + 1]) + trapezoid(gb, x[gb], b);
}

void PresentValueEvaluator::evaluate(const SamplePath& path, double* out) const {
    std::fill(out, out + n_, 0.0);
    const std::size_t stays = path.states.size();
    for (std::size_t m = 0; m < stays; ++m) {
        const int i = path.states[m];
        const double a = path.times[m];
        const double b = m + 1 < stays ? path.times[m + 1] : path.end;
        for (int l = 0; l < n_; ++l) out[l] += sojourn_integral(l, i, a, b);
        if (m == 0) continue;
        const int from = path.states[m - 1];
        double v = -1.0;
        for (int l = 0; l < n_; ++l) {
            const TimeFunction* f = transition_[(l * J_ + from) * J_ + i];
            if (!f) continue;
            if (v < 0.0) v = discount_.discount(s_, a);
            out[l] += v * (*f)(a);
        }
    }
}

Vector PresentValueEvaluator::evaluate(const SamplePath& path) const {
    Vector out(n_);
    evaluate(path, out.data());
    return out;
}

// ---------------------------------------------------------------------------

PathSamples sample_present_values(const ModelSpec& model, const PaymentSet& payments, double s, double t,
                                  int initial_state, std::size_t paths, std::uint64_t seed, double h,
                                  bool parallel) {
    const PathSimulator simulator(model, s, t, h);
    const PresentValueEvaluator evaluator(model, payments, s, t, h);
    const int n = payments.num_contracts();
    PathSamples out;
    out.values.resize(static_cast<Eigen::Index>(paths), n);
    out.final_states.assign(paths, 0);
    std::exception_ptr failure;

    auto run = [&](std::size_t p) {
        const SamplePath path = simulator.simulate(initial_state, seed, p);
        Vector v(n);
        evaluator.evaluate(path, v.data());
        out.values.row(static_cast<Eigen::Index>(p)) = v.transpose();
        out.final_states[p] = path.final_state();
    };

    if (parallel) {
#pragma omp parallel for schedule(dynamic, 256)
        for (std::size_t p = 0; p < paths; ++p) {
            try {
                run(p);
            } catch (...) {
#pragma omp critical(mc_failure)
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
    } else {
        for (std::size_t p = 0; p < paths; ++p) run(p);
    }
    return out;
}

MonteCarloStats summarize(const PathSamples& samples, int num_states, const std::optional<MultiIndex>& k) {
    const auto N = samples.values.rows();
    const auto n = samples.values.cols();
    if (N < 2) throw ConfigError("Monte Carlo statistics need at least 2 paths");
    const double dn = static_cast<double>(N);
    MonteCarloStats st;
    st.paths = static_cast<std::size_t>(N);

    // Sample mean and standard error of a per-path quantity, summed in path order.
    auto mean_se = [&](auto&& value, double& mean, double& se) {
        double sum = 0.0;
        for (Eigen::Index p = 0; p < N; ++p) sum += value(p);
        mean = sum / dn;
        double ss = 0.0;
        for (Eigen::Index p = 0; p < N; ++p) {
            const double d = value(p) - mean;
            ss += d * d;
        }
        se = std::sqrt(ss / (dn - 1.0) / dn);
    };

    st.mean.resize(n);
    st.mean_se.resize(n);
    for (Eigen::Index l = 0; l < n; ++l)
        mean_se([&](Eigen::Index p) { return samples.values(p, l); }, st.mean(l), st.mean_se(l));

    st.covariance.resize(n, n);
    st.covariance_se.resize(n, n);
    for (Eigen::Index l = 0; l < n; ++l)
        for (Eigen::Index m = l; m < n; ++m) {
            double c = 0.0, se = 0.0;
            mean_se(
                [&](Eigen::Index p) {
                    return (samples.values(p, l) - st.mean(l)) * (samples.values(p, m) - st.mean(m));
                },
                c, se);
            // Unbiased normalisation.
            c *= dn / (dn - 1.0);
            st.covariance(l, m) = st.covariance(m, l) = c;
            st.covariance_se(l, m) = st.covariance_se(m, l) = se;
        }

    if (k) {
        if (k->size() != n) throw ConfigError("moment multi-index does not match the number of contracts");
        st.moment_index = lex_enumerate(*k);
        const auto count = static_cast<Eigen::Index>(st.moment_index.size());
        st.raw_moment.resize(count);
        st.raw_moment_se.resize(count);
        for (Eigen::Index q = 0; q < count; ++q) {
            const MultiIndex& y = st.moment_index[static_cast<std::size_t>(q)];
            mean_se(
                [&](Eigen::Index p) {
                    double w = 1.0;
                    for (int l = 0; l < y.size(); ++l)
                        for (int e = 0; e < y[l]; ++e) w *= samples.values(p, l);
                    return w;
                },
                st.raw_moment(q), st.raw_moment_se(q));
        }
    }

    st.occupancy.resize(num_states);
    st.occupancy_se.resize(num_states);
    for (int j = 0; j < num_states; ++j)
        mean_se([&](Eigen::Index p) { return samples.final_states[static_cast<std::size_t>(p)] == j ? 1.0 : 0.0; },
                st.occupancy(j), st.occupancy_se(j));
    return st;
}

MonteCarloStats present_value_samples(const ModelSpec& model, const PaymentSet& payments, double s, double t,
                                      int initial_state, std::size_t paths, std::uint64_t seed,
                                      const MonteCarloOptions& options) {
    if (paths < 2) throw ConfigError("Monte Carlo needs at least 2 paths");
    const auto samples =
        sample_present_values(model, payments, s, t, initial_state, paths, seed, options.h, options.parallel);
    return summarize(samples, model.num_states(), options.k);
}

} // namespace mstate
