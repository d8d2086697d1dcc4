#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "core.hpp"

namespace ensf {

/// Pseudo-time schedule of the forward/backward diffusion on tau in [0, 1].
///
///   alpha_bar(tau)   = 1 - tau (1 - eps_alpha)
///   beta_bar_sq(tau) = eps_beta + tau (1 - eps_beta)
///
/// Drift and diffusion follow from b = d log(alpha_bar)/dtau and
/// sigma^2 = d(beta_bar_sq)/dtau - 2 b beta_bar_sq, so that the forward
/// conditional law is exactly N(alpha_bar z0, beta_bar_sq I).
class DiffusionSchedule {
public:
    DiffusionSchedule() = default;
    DiffusionSchedule(double eps_alpha, double eps_beta, std::size_t steps)
        : eps_alpha_(eps_alpha), eps_beta_(eps_beta), steps_(steps) {
        validate();
    }

    double eps_alpha() const noexcept { return eps_alpha_; }
    double eps_beta() const noexcept { return eps_beta_; }
    std::size_t steps() const noexcept { return steps_; }
    double step_size() const noexcept { return 1.0 / static_cast<double>(steps_); }
    /// tau_k = k / K on the uniform partition.
    double tau(std::size_t k) const noexcept { return static_cast<double>(k) / static_cast<double>(steps_); }

    double alpha_bar(double tau) const {
        check(tau);
        // Convex-combination form keeps both endpoints exact in floating point.
        return (1.0 - tau) + tau * eps_alpha_;
    }

    double beta_bar_sq(double tau) const {
        check(tau);
        return (1.0 - tau) * eps_beta_ + tau;
    }

    double drift(double tau) const { return -(1.0 - eps_alpha_) / alpha_bar(tau); }

    double diffusion_sq(double tau) const {
        return (1.0 - eps_beta_) + 2.0 * (1.0 - eps_alpha_) * beta_bar_sq(tau) / alpha_bar(tau);
    }

    /// log q(z | z0) at tau up to its normalizing constant.
    double gaussian_log_kernel(std::span<const double> z, std::span<const double> z0, double tau) const {
        require_same_dim(z, z0, "gaussian_log_kernel");
        const double a = alpha_bar(tau);
        const double b2 = beta_bar_sq(tau);
        double acc = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double r = z[i] - a * z0[i];
            acc += r * r;
        }
        return -acc / (2.0 * b2);
    }

    void validate() const {
        if (!(eps_alpha_ > 0.0 && eps_alpha_ <= 1.0))
            throw InvalidConfiguration("eps_alpha must lie in (0, 1], got " + std::to_string(eps_alpha_));
        if (!(eps_beta_ > 0.0 && eps_beta_ <= 1.0))
            throw InvalidConfiguration("eps_beta must lie in (0, 1], got " + std::to_string(eps_beta_));
        if (steps_ < 1) throw InvalidConfiguration("pseudo-time steps must be >= 1");
    }

private:
    static void check(double tau) {
        if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("pseudo-time outside [0, 1]: " + std::to_string(tau));
    }

    double eps_alpha_ = 0.5;
    double eps_beta_ = 0.025;
    std::size_t steps_ = 500;
};

}  // namespace ensf
