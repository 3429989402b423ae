#pragma once

#include "mstate/model_io.hpp"

#include <algorithm>
#include <cmath>

#ifndef MSTATE_MODEL_DIR
#define MSTATE_MODEL_DIR "models"
#endif

namespace mstate::testing {

inline const LoadedModel& disability() {
    static const LoadedModel model = load_model(std::filesystem::path(MSTATE_MODEL_DIR) / "disability_g82m.json");
    return model;
}

// max|a - b| / max|b|; falls back to max|a - b| when b vanishes.
template <class A, class B>
double rel_error(const A& a, const B& b) {
    const double scale = b.cwiseAbs().maxCoeff();
    const double diff = (a - b).cwiseAbs().maxCoeff();
    return scale > 0.0 ? diff / scale : diff;
}

inline double rel_error(double a, double b) {
    const double scale = std::abs(b);
    return scale > 0.0 ? std::abs(a - b) / scale : std::abs(a - b);
}

} // namespace mstate::testing
