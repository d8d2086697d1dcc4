#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>

#include "core.hpp"
#include "random.hpp"

namespace ensf {

enum class ObservationOperator { arctan, linear_identity };

inline std::string_view to_string(ObservationOperator op) {
    return op == ObservationOperator::arctan ? "arctan" : "linear";
}

/// y = g(x) + eps, eps ~ N(0, sigma^2 I). The observation dimension equals the state dimension.
struct ObservationModel {
    ObservationOperator op = ObservationOperator::arctan;
    double sigma = 0.05;

    void validate() const {
        if (!(sigma > 0.0)) throw InvalidConfiguration("observation sigma must be > 0");
    }

    double apply(double x) const { return op == ObservationOperator::arctan ? std::atan(x) : x; }

    void apply(std::span<const double> x, std::span<double> out) const {
        require_same_dim(x, out, "observation operator");
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = apply(x[i]);
    }

    StateVector apply(std::span<const double> x) const {
        StateVector out(x.size());
        apply(x, out);
        return out;
    }

    /// Unnormalized log-likelihood -|g(z) - y|^2 / (2 sigma^2).
    double log_likelihood(std::span<const double> z, std::span<const double> y) const {
        require_same_dim(z, y, "log_likelihood");
        double acc = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double r = apply(z[i]) - y[i];
            acc += r * r;
        }
        return -acc / (2.0 * sigma * sigma);
    }
};

inline StateVector observe(std::span<const double> x, const ObservationModel& model, RandomStream& rng) {
    StateVector y = model.apply(x);
    for (double& v : y) v += model.sigma * rng.normal();
    return y;
}

/// out += scale * grad_z log p(y | z).
inline void add_grad_log_likelihood(std::span<const double> z, std::span<const double> y,
                                    const ObservationModel& model, double scale, std::span<double> out) {
    if (!(model.sigma > 0.0)) throw InvalidConfiguration("observation sigma must be > 0");
    require_same_dim(z, y, "grad_log_likelihood");
    require_same_dim(z, out, "grad_log_likelihood");
    const double inv_var = scale / (model.sigma * model.sigma);
    if (model.op == ObservationOperator::arctan) {
        for (std::size_t i = 0; i < z.size(); ++i)
            out[i] -= inv_var * (std::atan(z[i]) - y[i]) / (1.0 + z[i] * z[i]);
    } else {
        for (std::size_t i = 0; i < z.size(); ++i) out[i] -= inv_var * (z[i] - y[i]);
    }
}

inline StateVector grad_log_likelihood(std::span<const double> z, std::span<const double> y,
                                       const ObservationModel& model) {
    StateVector g(z.size(), 0.0);
    add_grad_log_likelihood(z, y, model, 1.0, g);
    return g;
}

}  // namespace ensf
