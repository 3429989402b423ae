#include "mstate/errors.hpp"
#include "mstate/model_io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace mstate;

namespace {

const char* const kSmall = R"({
  "states": ["healthy", "sick", "dead"],
  "horizon": 10,
  "parameters": {"a": 0.2},
  "intensities": {"healthy->sick": "a", "sick->healthy": "0.1", "0->2": 0.05},
  "contracts": [{"name": "benefit", "transition": {"0->2": "1"}, "sojourn": {"sick": "a"}}]
})";

std::string with(std::string text, const std::string& from, const std::string& to) {
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    return text.replace(pos, from.size(), to);
}

} // namespace

TEST_CASE("bundled model") {
    const auto& d = mstate::testing::disability();
    CHECK(d.model.num_states() == 3);
    CHECK(d.payments.num_contracts() == 3);
    CHECK(d.model.horizon == 70.0);
    CHECK(d.payments.names[0] == "death benefit");
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 70.0);
    for (int q = 0; q < 100; ++q) {
        const double t = u(rng);
        const double x = t + 40.0;
        const double before = t <= 25.0 ? 1.0 : 0.0;
        const double mu02 = 0.0005 + std::pow(10.0, 5.88 + 0.038 * x - 10.0);
        const Matrix M = intensity_matrix(d.model, t);
        CHECK(M(0, 1) == doctest::Approx((0.0004 + std::pow(10.0, 4.54 + 0.06 * x - 10.0)) * before).epsilon(1e-14));
        CHECK(M(1, 0) == doctest::Approx(2.0058 * std::exp(-0.117 * x) * before).epsilon(1e-14));
        CHECK(M(0, 2) == doctest::Approx(mu02).epsilon(1e-14));
        CHECK(M(1, 2) == doctest::Approx(mu02 * (1.0 + before)).epsilon(1e-14));
        CHECK(d.model.interest(t) == 0.01);
    }
}

TEST_CASE("names, indices and parameters") {
    const LoadedModel m = parse_model(kSmall);
    CHECK(m.model.states[1] == "sick");
    CHECK(intensity_matrix(m.model, 1.0)(0, 1) == 0.2);
    CHECK(intensity_matrix(m.model, 1.0)(0, 2) == 0.05);
    CHECK(sojourn_vector(m.model, m.payments, 0, 1.0)(1) == 0.2);
    CHECK(m.model.interest.is_zero());
    const LoadedModel o = parse_model(kSmall, "small", {{"a", 0.5}});
    CHECK(intensity_matrix(o.model, 1.0)(0, 1) == 0.5);
    CHECK(o.parameters.at("a") == 0.5);
    CHECK_THROWS_AS(parse_model(kSmall, "small", {{"zzz", 1.0}}), ConfigError);
}

TEST_CASE("negative intensity is a validation error") {
    const std::string text = with(kSmall, "\"sick->healthy\": \"0.1\"", "\"sick->healthy\": \"-0.1\"");
    CHECK_THROWS_AS(parse_model(text, "neg"), ValidationError);
    try {
        parse_model(text, "neg");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).rfind("neg:", 0) == 0);
    }
}

TEST_CASE("schema errors name the field") {
    const std::string text = with(kSmall, "\"0->2\": 0.05", "\"0->5\": 0.05");
    try {
        parse_model(text, "bad");
        FAIL("expected a schema error");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("intensities") != std::string::npos);
        CHECK(msg.find("out of range") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_model(with(kSmall, "\"horizon\": 10", "\"horizon\": -1")), ConfigError);
    CHECK_THROWS_AS(parse_model(with(kSmall, "\"a\"", "\"ghost\"")), ConfigError);
    CHECK_THROWS_AS(parse_model(with(kSmall, "\"sick->healthy\"", "\"sick->sick\"")), ConfigError);
    CHECK_THROWS_AS(parse_model(with(kSmall, "\"0.1\"", "\"0.1 +\"")), ConfigError);
    CHECK_THROWS_AS(parse_model("[1, 2]"), ConfigError);
}

TEST_CASE("JSON syntax errors report the line") {
    const std::string text = with(kSmall, "\"horizon\": 10,", "\"horizon\": 10,,");
    try {
        parse_model(text, "broken");
        FAIL("expected a syntax error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("bundled names resolve to files") {
    const auto p = resolve_model_path("disability_g82m", MSTATE_MODEL_DIR);
    CHECK(std::filesystem::exists(p));
    CHECK(resolve_model_path("other.json", MSTATE_MODEL_DIR) == std::filesystem::path("other.json"));
    CHECK_THROWS_AS(load_model("/nonexistent/model.json"), ConfigError);
}
