#include "mstate/model_io.hpp"

#include "mstate/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace mstate {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& source, const std::string& where, const std::string& what) {
    throw ConfigError(source + ": " + where + ": " + what);
}

const json& require(const json& doc, const char* key, const std::string& source) {
    if (!doc.contains(key)) schema_error(source, "document", std::string("missing field '") + key + "'");
    return doc.at(key);
}

std::string line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t p = 0; p < byte && p < text.size(); ++p) {
        if (text[p] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

class StateNames {
public:
    StateNames(const std::vector<std::string>& names, std::string source) : names_(names), source_(std::move(source)) {}

    int resolve(const std::string& key, const std::string& where) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == key) return static_cast<int>(i);
        if (!key.empty() && key.find_first_not_of("0123456789") == std::string::npos) {
            const long v = std::stol(key);
            if (v >= 0 && v < static_cast<long>(names_.size())) return static_cast<int>(v);
            schema_error(source_, where,
                         "state " + key + " out of range for a " + std::to_string(names_.size()) + "-state model");
        }
        schema_error(source_, where, "unknown state '" + key + "'");
    }

    std::pair<int, int> resolve_pair(const std::string& key, const std::string& where) const {
        const auto arrow = key.find("->");
        if (arrow == std::string::npos) schema_error(source_, where, "transition key '" + key + "' is not 'i->j'");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        const int i = resolve(trim(key.substr(0, arrow)), where);
        const int j = resolve(trim(key.substr(arrow + 2)), where);
        if (i == j) schema_error(source_, where, "transition '" + key + "' has identical endpoints");
        return {i, j};
    }

private:
    const std::vector<std::string>& names_;
    std::string source_;
};

TimeFunction expression(const json& value, const ConstantTable& constants, const std::string& source,
                        const std::string& where) {
    if (value.is_number()) return TimeFunction::constant(value.get<double>());
    if (!value.is_string()) schema_error(source, where, "expected an expression string");
    try {
        return parse_timefun(value.get<std::string>(), constants);
    } catch (const ConfigError& e) {
        schema_error(source, where, e.what());
    }
}

} // namespace

LoadedModel parse_model(std::string_view text, const std::string& source, const ConstantTable& overrides) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError(source + ": JSON syntax error at " + line_column(text, e.byte) + ": " + e.what());
    }
    if (!doc.is_object()) schema_error(source, "document", "top level must be an object");

    LoadedModel out;
    try {
        out.name = doc.value("name", std::string{});

        const json& states = require(doc, "states", source);
        if (!states.is_array() || states.empty()) schema_error(source, "states", "expected a non-empty array");
        for (const auto& s : states) out.model.states.push_back(s.get<std::string>());
        std::set<std::string> unique(out.model.states.begin(), out.model.states.end());
        if (unique.size() != out.model.states.size()) schema_error(source, "states", "duplicate state name");

        const json& horizon = require(doc, "horizon", source);
        if (!horizon.is_number() || !(horizon.get<double>() > 0.0))
            schema_error(source, "horizon", "expected a positive number");
        out.model.horizon = horizon.get<double>();

        if (doc.contains("parameters")) {
            const json& params = doc.at("parameters");
            if (!params.is_object()) schema_error(source, "parameters", "expected an object");
            for (const auto& [key, value] : params.items()) {
                if (!value.is_number()) schema_error(source, "parameters." + key, "expected a number");
                out.parameters[key] = value.get<double>();
            }
        }
        for (const auto& [key, value] : overrides) {
            if (!out.parameters.contains(key))
                throw ConfigError(source + ": cannot override unknown parameter '" + key + "'");
            out.parameters[key] = value;
        }

        const StateNames names(out.model.states, source);
        out.model.interest = expression(doc.value("interest", json("0")), out.parameters, source, "interest");

        const json& intensities = require(doc, "intensities", source);
        if (!intensities.is_object()) schema_error(source, "intensities", "expected an object");
        for (const auto& [key, value] : intensities.items()) {
            const std::string where = "intensities[\"" + key + "\"]";
            const auto [i, j] = names.resolve_pair(key, where);
            out.model.intensities.push_back({i, j, expression(value, out.parameters, source, where)});
        }

        const json contracts = doc.value("contracts", json::array());
        if (!contracts.is_array()) schema_error(source, "contracts", "expected an array");
        for (std::size_t l = 0; l < contracts.size(); ++l) {
            const json& c = contracts[l];
            const std::string base = "contracts[" + std::to_string(l) + "]";
            if (!c.is_object()) schema_error(source, base, "expected an object");
            out.payments.names.push_back(c.value("name", "contract " + std::to_string(l + 1)));
            const int contract = static_cast<int>(l);
            const json sojourn = c.value("sojourn", json::object());
            const json transition = c.value("transition", json::object());
            if (!sojourn.is_object() || !transition.is_object())
                schema_error(source, base, "sojourn and transition must be objects");
            for (const auto& [key, value] : sojourn.items()) {
                const std::string where = base + ".sojourn[\"" + key + "\"]";
                out.payments.sojourn.push_back(
                    {contract, names.resolve(key, where), expression(value, out.parameters, source, where)});
            }
            for (const auto& [key, value] : transition.items()) {
                const std::string where = base + ".transition[\"" + key + "\"]";
                const auto [i, j] = names.resolve_pair(key, where);
                out.payments.transition.push_back({contract, i, j, expression(value, out.parameters, source, where)});
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(source + ": schema error: " + e.what());
    }

    try {
        validate_model(out.model);
        validate_payments(out.model, out.payments);
    } catch (const ValidationError& e) {
        throw ValidationError(source + ": " + e.what());
    } catch (const DomainError& e) {
        throw ValidationError(source + ": " + e.what());
    }
    return out;
}

LoadedModel load_model(const std::filesystem::path& path, const ConstantTable& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open model file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_model(buffer.str(), path.string(), overrides);
}

std::filesystem::path resolve_model_path(const std::string& name_or_path, const std::filesystem::path& bundled_dir) {
    const std::filesystem::path p(name_or_path);
    if (!p.has_parent_path() && !p.has_extension()) {
        const auto bundled = bundled_dir / (name_or_path + ".json");
        if (std::filesystem::exists(bundled)) return bundled;
    }
    return p;
}

} // namespace mstate
