#include "mstate/block.hpp"
#include "mstate/errors.hpp"
#include "mstate/mgf.hpp"
#include "mstate/model_io.hpp"
#include "mstate/moments.hpp"
#include "mstate/montecarlo.hpp"
#include "mstate/output.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <iostream>
#include <optional>

#ifndef MSTATE_MODEL_DIR
#define MSTATE_MODEL_DIR "models"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mstate;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumerical = 3, kValidation = 4 };

struct Options {
    std::string model = "disability_g82m";
    std::vector<std::string> set;
    std::string k;
    std::optional<double> s0, s1, t;
    double h = kDefaultStep;
    std::string scheme = "midpoint-exp";
    std::string theta;
    std::size_t paths = 10000;
    std::uint64_t seed = 1;
    double confidence = 0.995;
    double portfolio = 1.0;
    int state = 0;
    double step = 0.25;
    std::string route = "ode";
    std::string out = ".";
    std::string format = "csv";
};

struct Context {
    LoadedModel loaded;
    double s0, s1, t;
    MomentOptions moment;
    fs::path out;
    bool svg;

    const ModelSpec& model() const { return loaded.model; }
    const PaymentSet& payments() const { return loaded.payments; }
};

ConstantTable parse_overrides(const std::vector<std::string>& items) {
    ConstantTable table;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects NAME=VALUE, got '" + item + "'");
        try {
            std::size_t used = 0;
            const double v = std::stod(item.substr(eq + 1), &used);
            if (used != item.size() - eq - 1) throw std::invalid_argument("trailing");
            table[item.substr(0, eq)] = v;
        } catch (const std::logic_error&) {
            throw ConfigError("--set value for '" + item.substr(0, eq) + "' is not a number");
        }
    }
    return table;
}

Vector parse_vector(const std::string& text, int n, const char* what) {
    Vector v = Vector::Zero(n);
    if (text.empty()) return v;
    std::stringstream ss(text);
    std::string item;
    int l = 0;
    while (std::getline(ss, item, ',')) {
        if (l >= n) throw ConfigError(std::string(what) + " has more than " + std::to_string(n) + " entries");
        try {
            v(l++) = std::stod(item);
        } catch (const std::logic_error&) {
            throw ConfigError(std::string("bad ") + what + " entry '" + item + "'");
        }
    }
    if (l != n) throw ConfigError(std::string(what) + " needs " + std::to_string(n) + " entries");
    return v;
}

MultiIndex moment_index(const Options& o, int n) {
    if (o.k.empty()) {
        MultiIndex ones(std::vector<int>(static_cast<std::size_t>(n), 1));
        return ones;
    }
    MultiIndex k = parse_multi_index(o.k);
    if (k.size() != n)
        throw ConfigError("--k has " + std::to_string(k.size()) + " entries but the model has " + std::to_string(n) +
                          " contracts");
    return k;
}

Context make_context(const Options& o, double default_s1_fraction = 1.0) {
    Context c;
    const fs::path path = resolve_model_path(o.model, MSTATE_MODEL_DIR);
    c.loaded = load_model(path, parse_overrides(o.set));
    c.t = o.t.value_or(c.loaded.model.horizon);
    c.s0 = o.s0.value_or(0.0);
    c.s1 = o.s1.value_or(default_s1_fraction * c.t);
    if (!(o.h > 0.0)) throw ConfigError("--h must be positive");
    if (!(c.t > 0.0) || c.t > c.loaded.model.horizon) throw ConfigError("--t must lie in (0, horizon]");
    if (c.s0 < 0.0 || c.s0 > c.t || c.s1 < c.s0 || c.s1 > c.t) throw ConfigError("need 0 <= s0 <= s1 <= t");
    if (!(o.step > 0.0)) throw ConfigError("--step must be positive");
    if (o.state < 0 || o.state >= c.loaded.model.num_states()) throw ConfigError("--state out of range");
    c.moment.h = o.h;
    c.moment.s_min = c.s0;
    c.moment.scheme = parse_scheme(o.scheme);
    c.out = o.out;
    if (o.format != "csv" && o.format != "csv+svg") throw ConfigError("--format must be csv or csv+svg");
    c.svg = o.format == "csv+svg";
    fs::create_directories(c.out);
    return c;
}

// Nodes closest to s0, s0 + step, ... up to s1.
std::vector<std::size_t> output_nodes(const std::vector<double>& times, double s0, double s1, double step) {
    std::vector<std::size_t> nodes;
    for (int q = 0;; ++q) {
        const double target = s0 + q * step;
        if (target > s1 + 1e-9) break;
        auto it = std::lower_bound(times.begin(), times.end(), target);
        std::size_t g = static_cast<std::size_t>(it - times.begin());
        if (g == times.size() || (g > 0 && target - times[g - 1] < *it - target)) --g;
        if (nodes.empty() || nodes.back() != g) nodes.push_back(g);
    }
    return nodes;
}

std::string state_label(const Context& c, int i) { return c.model().states[static_cast<std::size_t>(i)]; }

std::string index_label(const MultiIndex& y) {
    std::string s;
    for (int l = 0; l < y.size(); ++l) s += (l ? "-" : "") + std::to_string(y[l]);
    return s;
}

void emit(const json& summary) { std::cout << summary.dump(2) << "\n"; }

// ---------------------------------------------------------------------------

int cmd_validate(const Options& o) {
    Context c = make_context(o);
    json j;
    j["model"] = c.loaded.name;
    j["states"] = c.model().states;
    j["contracts"] = c.payments().names;
    j["horizon"] = c.model().horizon;
    j["parameters"] = c.loaded.parameters;
    const auto a = c.model().breakpoints();
    const auto b = c.payments().breakpoints();
    j["breakpoints"] = merge_breakpoints({a, b});
    j["status"] = "valid";
    emit(j);
    return kOk;
}

int cmd_probabilities(const Options& o) {
    Context c = make_context(o);
    const auto curves = transition_probability_curves(c.model(), c.s0, c.t, o.h, c.moment.scheme);
    const int J = c.model().num_states();
    std::vector<std::string> header{"s"};
    for (int i = 0; i < J; ++i)
        for (int j = 0; j < J; ++j) header.push_back("p_" + std::to_string(i) + "_" + std::to_string(j));
    std::vector<std::vector<double>> rows;
    for (auto g : output_nodes(curves.times, c.s0, c.s1, o.step)) {
        std::vector<double> row{curves.times[g]};
        for (int i = 0; i < J; ++i)
            for (int j = 0; j < J; ++j) row.push_back(curves.p[g](i, j));
        rows.push_back(std::move(row));
    }
    write_csv(c.out / "probabilities.csv", header, rows);
    emit({{"command", "probabilities"}, {"t", c.t}, {"rows", rows.size()}, {"file", (c.out / "probabilities.csv").string()}});
    return kOk;
}

int cmd_reserves(const Options& o) {
    Context c = make_context(o);
    const auto curves = hattendorff_covariances(c.model(), c.payments(), c.t, c.moment);
    const int J = c.model().num_states();
    const int n = c.payments().num_contracts();
    std::vector<std::string> header{"s"};
    for (int l = 0; l < n; ++l)
        for (int i = 0; i < J; ++i) header.push_back("V_c" + std::to_string(l + 1) + "_" + state_label(c, i));
    std::vector<std::vector<double>> rows;
    std::vector<Series> series;
    for (int l = 0; l < n; ++l) series.push_back({c.payments().names[l], {}, {}});
    for (auto g : output_nodes(curves.times, c.s0, c.s1, o.step)) {
        std::vector<double> row{curves.times[g]};
        for (int l = 0; l < n; ++l) {
            for (int i = 0; i < J; ++i) row.push_back(curves.reserve(g, l, i));
            series[l].x.push_back(curves.times[g]);
            series[l].y.push_back(curves.reserve(g, l, o.state));
        }
        rows.push_back(std::move(row));
    }
    write_csv(c.out / "reserves.csv", header, rows);
    if (c.svg)
        write_svg(c.out / "reserves.svg",
                  svg_line_chart("Reserves in state " + state_label(c, o.state), "s", "reserve", series));
    json summary{{"command", "reserves"}, {"t", c.t}, {"s0", c.s0}};
    for (int l = 0; l < n; ++l) summary["reserve_at_s0"][c.payments().names[l]] = curves.reserve(0, l, o.state);
    emit(summary);
    return kOk;
}

int cmd_moments(const Options& o) {
    Context c = make_context(o);
    const MultiIndex k = moment_index(o, c.payments().num_contracts());
    const int J = c.model().num_states();
    ConditionalMoments cm(k, {0.0}, J);
    std::optional<MomentGrid> partial;
    if (o.route == "ode") {
        partial = partial_moments(c.model(), c.payments(), k, c.t, c.moment);
        cm = conditional_moments(*partial);
    } else if (o.route == "block") {
        partial = block_moment_curves(c.model(), c.payments(), k, c.t, c.moment);
        cm = conditional_moments(*partial);
    } else if (o.route == "direct") {
        cm = conditional_moments_direct(c.model(), c.payments(), k, c.t, c.moment);
    } else {
        throw ConfigError("--route must be ode, block or direct");
    }
    const LowerSet& set = cm.indices();
    const auto nodes = output_nodes(cm.times(), c.s0, c.s1, o.step);

    std::vector<std::string> header{"s"};
    for (const auto& y : set.elements())
        for (int i = 0; i < J; ++i) header.push_back("V_" + index_label(y) + "_" + state_label(c, i));
    for (const auto& y : lex_enumerate(k))
        for (int i = 0; i < J; ++i) header.push_back("m_" + index_label(y) + "_" + state_label(c, i));
    std::vector<std::vector<double>> rows;
    for (auto g : nodes) {
        std::vector<double> row{cm.times()[g]};
        for (std::size_t p = 0; p < set.size(); ++p)
            for (int i = 0; i < J; ++i) row.push_back(cm.value(g, p, i));
        for (const auto& y : lex_enumerate(k))
            for (int i = 0; i < J; ++i) row.push_back(central_moment(cm, y, i, g));
        rows.push_back(std::move(row));
    }
    write_csv(c.out / "moments.csv", header, rows);

    if (partial) {
        std::vector<std::string> ph{"s"};
        for (const auto& y : set.elements())
            for (int i = 0; i < J; ++i)
                for (int j = 0; j < J; ++j)
                    ph.push_back("V_" + index_label(y) + "_" + std::to_string(i) + "_" + std::to_string(j));
        std::vector<std::vector<double>> prow;
        for (auto g : nodes) {
            std::vector<double> row{partial->times()[g]};
            for (std::size_t p = 0; p < set.size(); ++p) {
                const auto V = partial->partial(g, p);
                for (int i = 0; i < J; ++i)
                    for (int j = 0; j < J; ++j) row.push_back(V(i, j));
            }
            prow.push_back(std::move(row));
        }
        write_csv(c.out / "partial_moments.csv", ph, prow);
    }
    json summary{{"command", "moments"}, {"k", k.to_string()}, {"route", o.route}, {"t", c.t}, {"s0", c.s0}};
    for (std::size_t p = 0; p < set.size(); ++p) summary["moments_at_s0"][set[p].to_string()] = cm.value(0, p, o.state);
    emit(summary);
    return kOk;
}

struct PairCurves {
    std::vector<double> s;
    std::vector<std::vector<double>> cov, corr;
    std::vector<std::vector<int>> degenerate;
    std::vector<std::string> cov_names, corr_names;
};

PairCurves pair_curves(const Context& c, int state, double step) {
    const auto curves = hattendorff_covariances(c.model(), c.payments(), c.t, c.moment);
    const int n = c.payments().num_contracts();
    PairCurves out;
    for (int l = 0; l < n; ++l)
        for (int m = l; m < n; ++m) {
            out.cov_names.push_back("cov_" + std::to_string(l + 1) + std::to_string(m + 1));
            if (m > l) out.corr_names.push_back("corr_" + std::to_string(l + 1) + std::to_string(m + 1));
        }
    for (auto g : output_nodes(curves.times, c.s0, c.s1, step)) {
        const Matrix sigma = curves.covariance_matrix(g, state);
        const auto rho = correlation_from_covariance(sigma);
        std::vector<double> cov, corr;
        std::vector<int> deg;
        for (int l = 0; l < n; ++l)
            for (int m = l; m < n; ++m) {
                cov.push_back(sigma(l, m));
                if (m > l) {
                    corr.push_back(rho.rho(l, m));
                    deg.push_back(rho.degenerate(l, m));
                }
            }
        out.s.push_back(curves.times[g]);
        out.cov.push_back(std::move(cov));
        out.corr.push_back(std::move(corr));
        out.degenerate.push_back(std::move(deg));
    }
    return out;
}

std::vector<Series> to_series(const std::vector<double>& s, const std::vector<std::vector<double>>& values,
                              const std::vector<std::string>& names) {
    std::vector<Series> series;
    for (std::size_t q = 0; q < names.size(); ++q) {
        Series sr{names[q], s, {}};
        for (const auto& row : values) sr.y.push_back(row[q]);
        series.push_back(std::move(sr));
    }
    return series;
}

void write_pair_csv(const fs::path& path, const std::vector<double>& s, const std::vector<std::vector<double>>& values,
                    const std::vector<std::string>& names, const std::vector<std::vector<int>>* flags = nullptr) {
    std::vector<std::string> header{"s"};
    header.insert(header.end(), names.begin(), names.end());
    if (flags)
        for (const auto& name : names) header.push_back("degenerate_" + name.substr(name.find('_') + 1));
    std::vector<std::vector<double>> rows;
    for (std::size_t g = 0; g < s.size(); ++g) {
        std::vector<double> row{s[g]};
        row.insert(row.end(), values[g].begin(), values[g].end());
        if (flags)
            for (int f : (*flags)[g]) row.push_back(f);
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

int cmd_covariance(const Options& o) {
    Context c = make_context(o);
    const auto pc = pair_curves(c, o.state, o.step);
    write_pair_csv(c.out / "covariance.csv", pc.s, pc.cov, pc.cov_names);
    if (c.svg)
        write_svg(c.out / "covariance.svg",
                  svg_line_chart("Conditional covariances, state " + state_label(c, o.state), "s", "covariance",
                                 to_series(pc.s, pc.cov, pc.cov_names)));
    json summary{{"command", "covariance"}, {"state", o.state}, {"t", c.t}};
    for (std::size_t q = 0; q < pc.cov_names.size(); ++q) summary["at_s0"][pc.cov_names[q]] = pc.cov.front()[q];
    emit(summary);
    return kOk;
}

int cmd_correlation(const Options& o) {
    Context c = make_context(o);
    const auto pc = pair_curves(c, o.state, o.step);
    write_pair_csv(c.out / "correlation.csv", pc.s, pc.corr, pc.corr_names, &pc.degenerate);
    if (c.svg)
        write_svg(c.out / "correlation.svg",
                  svg_line_chart("Conditional correlations, state " + state_label(c, o.state), "s", "correlation",
                                 to_series(pc.s, pc.corr, pc.corr_names)));
    json summary{{"command", "correlation"}, {"state", o.state}, {"t", c.t}};
    for (std::size_t q = 0; q < pc.corr_names.size(); ++q) summary["at_s0"][pc.corr_names[q]] = pc.corr.front()[q];
    emit(summary);
    return kOk;
}

int cmd_mgf(const Options& o) {
    Context c = make_context(o, 0.0);
    const int J = c.model().num_states();
    const Vector theta = parse_vector(o.theta, c.payments().num_contracts(), "--theta");
    const Matrix F = mgf(c.model(), c.payments(), theta, c.s0, c.t, o.h, c.moment.scheme);
    std::vector<std::string> header{"from"};
    for (int j = 0; j < J; ++j) header.push_back("to_" + std::to_string(j));
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < J; ++i) {
        std::vector<double> row{static_cast<double>(i)};
        for (int j = 0; j < J; ++j) row.push_back(F(i, j));
        rows.push_back(std::move(row));
    }
    write_csv(c.out / "mgf.csv", header, rows);
    json summary{{"command", "mgf"}, {"s", c.s0}, {"t", c.t}};
    for (int i = 0; i < J; ++i) summary["row_sums"].push_back(F.row(i).sum());

    if (c.s1 > c.s0) {
        std::vector<double> points;
        for (int q = 0;; ++q) {
            const double s = c.s0 + q * o.step;
            if (s > c.s1 + 1e-9) break;
            points.push_back(s);
        }
        const auto res = mgf_pde_residual(c.model(), c.payments(), theta, points, c.t, o.h, c.moment.scheme);
        std::vector<std::vector<double>> rrows;
        double worst = 0.0;
        for (const auto& r : res) {
            rrows.push_back({r.s, r.excluded ? NAN : r.residual, r.excluded ? 1.0 : 0.0});
            if (!r.excluded) worst = std::max(worst, r.residual);
        }
        write_csv(c.out / "mgf_residual.csv", {"s", "residual", "excluded"}, rrows);
        summary["max_residual"] = worst;
    }
    emit(summary);
    return kOk;
}

int cmd_block(const Options& o) {
    Context c = make_context(o, 0.0);
    const MultiIndex k = moment_index(o, c.payments().num_contracts());
    const auto result = block_product_integral_moments(c.model(), c.payments(), k, c.s0, c.t, c.moment);
    const auto report = verify_block_scaling(result, c.model(), c.s0, c.t, o.h);
    const int J = c.model().num_states();

    std::vector<std::string> gh;
    for (Eigen::Index j = 0; j < result.G.cols(); ++j) gh.push_back("c" + std::to_string(j));
    std::vector<std::vector<double>> grows;
    for (Eigen::Index i = 0; i < result.G.rows(); ++i) {
        std::vector<double> row;
        for (Eigen::Index j = 0; j < result.G.cols(); ++j) row.push_back(result.G(i, j));
        grows.push_back(std::move(row));
    }
    write_csv(c.out / "block_matrix.csv", gh, grows);

    std::vector<std::string> mh{"y"};
    for (int i = 0; i < J; ++i)
        for (int j = 0; j < J; ++j) mh.push_back("V_" + std::to_string(i) + "_" + std::to_string(j));
    std::vector<std::vector<std::string>> mrows;
    for (const auto& y : result.order.elements()) {
        const Matrix V = result.moment(y);
        std::vector<std::string> row{index_label(y)};
        for (int i = 0; i < J; ++i)
            for (int j = 0; j < J; ++j) row.push_back(format_number(V(i, j)));
        mrows.push_back(std::move(row));
    }
    write_csv_text(c.out / "block_moments.csv", mh, mrows);

    std::vector<std::vector<std::string>> srows;
    for (const auto& chk : report.checks)
        srows.push_back({std::to_string(chk.i), std::to_string(chk.m), index_label(result.order[chk.i]),
                         index_label(result.order[chk.m]), chk.expected_zero ? "1" : "0", format_number(chk.error)});
    write_csv_text(c.out / "block_scaling.csv", {"i", "m", "y_i", "y_m", "expected_zero", "relative_error"}, srows);
    emit({{"command", "block-prodint"},
          {"k", k.to_string()},
          {"dimension", result.G.rows()},
          {"s", c.s0},
          {"t", c.t},
          {"scaling_max_error", report.max_error}});
    return kOk;
}

int cmd_simulate(const Options& o) {
    Context c = make_context(o, 0.0);
    if (o.paths < 2) throw ConfigError("--paths must be at least 2");
    MonteCarloOptions mc;
    mc.h = o.h;
    if (!o.k.empty()) mc.k = moment_index(o, c.payments().num_contracts());
    const auto st = present_value_samples(c.model(), c.payments(), c.s0, c.t, o.state, o.paths, o.seed, mc);
    const int n = c.payments().num_contracts();
    std::vector<std::vector<std::string>> rows;
    auto add = [&](const std::string& q, double v, double se) {
        rows.push_back({q, format_number(v), format_number(se)});
    };
    for (int l = 0; l < n; ++l) add("mean_" + std::to_string(l + 1), st.mean(l), st.mean_se(l));
    for (int l = 0; l < n; ++l)
        for (int m = l; m < n; ++m)
            add("cov_" + std::to_string(l + 1) + std::to_string(m + 1), st.covariance(l, m), st.covariance_se(l, m));
    for (std::size_t q = 0; q < st.moment_index.size(); ++q)
        add("raw_" + index_label(st.moment_index[q]), st.raw_moment(static_cast<Eigen::Index>(q)),
            st.raw_moment_se(static_cast<Eigen::Index>(q)));
    for (int j = 0; j < c.model().num_states(); ++j)
        add("occupancy_" + state_label(c, j), st.occupancy(j), st.occupancy_se(j));
    write_csv_text(c.out / "simulate.csv", {"quantity", "estimate", "standard_error"}, rows);
    json summary{{"command", "simulate"}, {"paths", o.paths}, {"seed", o.seed}, {"state", o.state}};
    for (int l = 0; l < n; ++l) {
        summary["mean"].push_back(st.mean(l));
        summary["mean_se"].push_back(st.mean_se(l));
    }
    emit(summary);
    return kOk;
}

int cmd_margins(const Options& o) {
    Context c = make_context(o, 0.0);
    if (!(o.portfolio >= 1.0)) throw ConfigError("--portfolio must be at least 1");
    MomentOptions opts = c.moment;
    const auto curves = hattendorff_covariances(c.model(), c.payments(), c.t, opts);
    const int n = c.payments().num_contracts();
    Vector mean(n);
    for (int l = 0; l < n; ++l) mean(l) = curves.reserve(0, l, o.state);
    const Matrix sigma = curves.covariance_matrix(0, o.state);
    const Margins mg = clt_margins(mean, sigma, o.confidence, o.portfolio);
    std::vector<std::vector<std::string>> rows;
    for (int l = 0; l < n; ++l)
        rows.push_back({c.payments().names[l], format_number(mean(l)), format_number(std::sqrt(sigma(l, l))),
                        format_number(mg.per_product(l))});
    rows.push_back({"aggregate", format_number(mean.sum()), format_number(std::sqrt(std::max(0.0, sigma.sum()))),
                    format_number(mg.aggregate)});
    write_csv_text(c.out / "margins.csv", {"contract", "reserve", "sd", "margin"}, rows);
    json summary{{"command", "margins"}, {"z", mg.z}, {"confidence", o.confidence}, {"portfolio", o.portfolio}};
    for (int l = 0; l < n; ++l) summary["per_product"].push_back(mg.per_product(l));
    summary["aggregate"] = mg.aggregate;
    emit(summary);
    return kOk;
}

int cmd_reproduce(Options o) {
    if (!o.s1) o.s1 = 25.0;
    Context c = make_context(o);
    const auto pc = pair_curves(c, o.state, o.step);
    write_pair_csv(c.out / "disability_covariance.csv", pc.s, pc.cov, pc.cov_names);
    write_pair_csv(c.out / "disability_correlation.csv", pc.s, pc.corr, pc.corr_names, &pc.degenerate);
    write_svg(c.out / "disability_covariance.svg",
              svg_line_chart("Pair-wise conditional covariances, state " + state_label(c, o.state), "s",
                             "covariance", to_series(pc.s, pc.cov, pc.cov_names)));
    write_svg(c.out / "disability_correlation.svg",
              svg_line_chart("Pair-wise conditional correlations, state " + state_label(c, o.state), "s",
                             "correlation", to_series(pc.s, pc.corr, pc.corr_names)));

    const auto& corr0 = pc.corr.front();
    std::size_t largest = 0;
    for (std::size_t q = 1; q < corr0.size(); ++q)
        if (std::abs(corr0[q]) > std::abs(corr0[largest])) largest = q;
    json summary{{"command", "reproduce-disability"}, {"state", o.state}, {"t", c.t}, {"s_range", {c.s0, c.s1}}};
    for (std::size_t q = 0; q < pc.corr_names.size(); ++q) summary["correlation_at_s0"][pc.corr_names[q]] = corr0[q];
    for (std::size_t q = 0; q < pc.cov_names.size(); ++q) summary["covariance_at_s0"][pc.cov_names[q]] = pc.cov.front()[q];
    summary["strongest_pair"] = pc.corr_names[largest];
    emit(summary);
    return kOk;
}

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--model", o.model, "Model JSON file or bundled model name")->capture_default_str();
    sub->add_option("--set", o.set, "Override a model parameter, NAME=VALUE");
    sub->add_option("--t", o.t, "Terminal time (default: model horizon)");
    sub->add_option("--h", o.h, "Grid step in years")->capture_default_str();
    sub->add_option("--scheme", o.scheme, "euler or midpoint-exp")->capture_default_str();
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--format", o.format, "csv or csv+svg")->capture_default_str();
}

void add_range(CLI::App* sub, Options& o) {
    sub->add_option("--s0", o.s0, "First valuation time");
    sub->add_option("--s1", o.s1, "Last valuation time");
    sub->add_option("--step", o.step, "Spacing of output rows in years")->capture_default_str();
}

void add_state(CLI::App* sub, Options& o) {
    sub->add_option("--state", o.state, "Conditioning state index")->capture_default_str();
}

void print_error(const char* kind, const std::string& message, int code) {
    std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Moments of multivariate present values in multi-state Markov models"};
    // --h is the grid step, so help is long-form only.
    app.set_help_flag("--help", "Print this help message and exit");
    app.require_subcommand(1);
    Options o;
    std::function<int()> action;

    auto sub = [&](const char* name, const char* help, auto fn) {
        CLI::App* s = app.add_subcommand(name, help);
        s->set_help_flag("--help", "Print this help message and exit");
        add_common(s, o);
        s->callback([&action, fn, &o] { action = [fn, &o] { return fn(o); }; });
        return s;
    };

    sub("validate", "Load and validate a model", cmd_validate);
    auto* prob = sub("probabilities", "Transition probability curves P(s,t)", cmd_probabilities);
    add_range(prob, o);
    auto* res = sub("reserves", "Prospective reserves of every contract", cmd_reserves);
    add_range(res, o);
    add_state(res, o);
    auto* mom = sub("moments", "Conditional moments for all y <= k", cmd_moments);
    add_range(mom, o);
    add_state(mom, o);
    mom->add_option("--k", o.k, "Moment multi-index, e.g. 1,1,0 (default all ones)");
    mom->add_option("--route", o.route, "ode, block or direct")->capture_default_str();
    auto* cov = sub("covariance", "Conditional covariance curves", cmd_covariance);
    add_range(cov, o);
    add_state(cov, o);
    auto* cor = sub("correlation", "Conditional correlation curves", cmd_correlation);
    add_range(cor, o);
    add_state(cor, o);
    auto* m = sub("mgf", "Moment generating function F(theta; s, t)", cmd_mgf);
    add_range(m, o);
    m->add_option("--theta", o.theta, "Comma-separated theta (default 0)");
    auto* blk = sub("block-prodint", "Block product integral and its scaling check", cmd_block);
    blk->add_option("--s0", o.s0, "Valuation time");
    blk->add_option("--k", o.k, "Moment multi-index (default all ones)");
    auto* sim = sub("simulate", "Monte Carlo estimates of the present values", cmd_simulate);
    sim->add_option("--s0", o.s0, "Valuation time");
    add_state(sim, o);
    sim->add_option("--paths", o.paths, "Number of paths")->capture_default_str();
    sim->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    sim->add_option("--k", o.k, "Also report raw moments for all y <= k");
    auto* mar = sub("margins", "Normal-approximation safety margins", cmd_margins);
    mar->add_option("--s0", o.s0, "Valuation time");
    add_state(mar, o);
    mar->add_option("--confidence", o.confidence, "Confidence level in (0,1)")->capture_default_str();
    mar->add_option("--portfolio", o.portfolio, "Number of independent policies")->capture_default_str();
    auto* rep = sub("reproduce-disability", "Covariance and correlation curves of the disability example",
                    cmd_reproduce);
    add_range(rep, o);
    add_state(rep, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("ConfigError", e.what(), kConfig);
        return kConfig;
    }

    try {
        return action();
    } catch (const ValidationError& e) {
        print_error("ValidationError", e.what(), kValidation);
        return kValidation;
    } catch (const ParseError& e) {
        print_error("ParseError", e.what(), kConfig);
        return kConfig;
    } catch (const ConfigError& e) {
        print_error("ConfigError", e.what(), kConfig);
        return kConfig;
    } catch (const CapExceeded& e) {
        print_error("CapExceeded", e.what(), kNumerical);
        return kNumerical;
    } catch (const NumericalError& e) {
        print_error("NumericalError", e.what(), kNumerical);
        return kNumerical;
    } catch (const fs::filesystem_error& e) {
        print_error("ConfigError", e.what(), kConfig);
        return kConfig;
    } catch (const std::exception& e) {
        print_error("NumericalError", e.what(), kNumerical);
        return kNumerical;
    }
}
