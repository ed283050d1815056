#include "shortvid/losses.hpp"

#include <cmath>
#include <string>

#include "shortvid/error.hpp"

namespace shortvid::core {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

// log(1 + exp(z)) without overflow
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

} // namespace

double Loss::value(double z, double y) const {
    switch (kind) {
    case LossKind::squared: return 0.5 * (z - y) * (z - y);
    case LossKind::huber: {
        const double r = std::abs(z - y);
        return r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
    }
    case LossKind::weighted_log:
        // -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
        return y * softplus(-z) + softplus(z);
    }
    return 0.0;
}

double Loss::grad(double z, double y) const {
    switch (kind) {
    case LossKind::squared: return z - y;
    case LossKind::huber: {
        const double r = z - y;
        if (r > delta) return delta;
        if (r < -delta) return -delta;
        return r;
    }
    case LossKind::weighted_log: {
        const double p = sigmoid(z);
        return p * (1.0 + y) - y;
    }
    }
    return 0.0;
}

double Loss::predict(double z) const { return kind == LossKind::weighted_log ? std::exp(z) : z; }

std::string_view to_string(LossKind k) {
    switch (k) {
    case LossKind::squared: return "squared";
    case LossKind::huber: return "huber";
    case LossKind::weighted_log: return "weighted_log";
    }
    return "?";
}

LossKind loss_from_name(std::string_view name) {
    if (name == "squared" || name == "mse") return LossKind::squared;
    if (name == "huber") return LossKind::huber;
    if (name == "weighted_log") return LossKind::weighted_log;
    throw InvalidParameter("unknown loss '" + std::string(name) + "'");
}

} // namespace shortvid::core
