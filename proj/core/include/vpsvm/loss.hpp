#pragma once

#include "vpsvm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace vpsvm {

/// Restriction of t to [-1, 1]. Throws parameter_error on NaN.
[[nodiscard]] inline double clip(double t) {
    if (std::isnan(t)) {
        throw parameter_error("cannot clip NaN");
    }
    return std::max(-1.0, std::min(t, 1.0));
}

/// max(0, 1 - y t).
[[nodiscard]] inline double hinge_loss(int y, double t) noexcept {
    return std::max(0.0, 1.0 - static_cast<double>(y) * t);
}

/// Sign with sign(0) = +1.
[[nodiscard]] inline int classify(double t) noexcept { return t >= 0.0 ? 1 : -1; }

}  // namespace vpsvm
