#pragma once

#include "mstate/payments.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace mstate {

struct LoadedModel {
    std::string name;
    ModelSpec model;
    PaymentSet payments;
    ConstantTable parameters;
};

// Model document:
//   { "name": ..., "states": [names], "horizon": 70,
//     "parameters": {"S": 1, ...},            // constants usable in expressions
//     "interest": "<expr>",
//     "intensities": {"0->1": "<expr>", "active->dead": "<expr>", ...},
//     "contracts": [{"name": ..., "sojourn": {"<state>": "<expr>"},
//                    "transition": {"<i>-><j>": "<expr>"}}] }
// States may be referred to by index or by name. `overrides` replace entries
// of "parameters". The result is validated: malformed documents throw
// ConfigError (with line and column for JSON syntax errors), model
// constraint violations throw ValidationError.
LoadedModel parse_model(std::string_view text, const std::string& source = "<model>",
                        const ConstantTable& overrides = {});
LoadedModel load_model(const std::filesystem::path& path, const ConstantTable& overrides = {});

// A bare name without extension or directory ("disability_g82m") resolves to
// <bundled_dir>/<name>.json when that file exists.
std::filesystem::path resolve_model_path(const std::string& name_or_path, const std::filesystem::path& bundled_dir);

} // namespace mstate
