#pragma once

// Pointwise losses on a raw model output z against a target y.

#include <string_view>

namespace shortvid::core {

enum class LossKind { squared, huber, weighted_log };

struct Loss {
    LossKind kind = LossKind::squared;
    double delta = 1.0; ///< Huber transition point

    /// squared: (z-y)^2/2. huber: quadratic inside |z-y| <= delta, linear outside.
    /// weighted_log: -y*log(sigmoid z) - log(1 - sigmoid z), y >= 0.
    double value(double z, double y) const;
    double grad(double z, double y) const; ///< d value / dz

    /// Point prediction implied by the raw output (exp(z) for weighted_log).
    double predict(double z) const;
};

std::string_view to_string(LossKind k);
LossKind loss_from_name(std::string_view name);

double sigmoid(double z);

} // namespace shortvid::core
