#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "core.hpp"
#include "diffusion.hpp"
#include "observation.hpp"
#include "random.hpp"

namespace ensf {

/// Damping h(tau) that gates the likelihood gradient: h(0) = 1, h(1) = 0,
/// non-increasing in between. Either 1 - tau or a piecewise-linear table.
class DampingFunction {
public:
    static DampingFunction one_minus_tau() { return {}; }

    /// Knots (tau, h) with tau strictly increasing from 0 to 1.
    static DampingFunction table(std::vector<std::pair<double, double>> knots) {
        DampingFunction f;
        f.knots_ = std::move(knots);
        f.validate();
        return f;
    }

    bool is_default() const noexcept { return knots_.empty(); }
    const std::vector<std::pair<double, double>>& knots() const noexcept { return knots_; }

    double operator()(double tau) const {
        if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("damping evaluated outside [0, 1]");
        if (knots_.empty()) return 1.0 - tau;
        auto hi = std::upper_bound(knots_.begin(), knots_.end(), tau,
                                   [](double t, const auto& k) { return t < k.first; });
        if (hi == knots_.end()) return knots_.back().second;
        auto lo = std::prev(hi);
        const double w = (tau - lo->first) / (hi->first - lo->first);
        return lo->second + w * (hi->second - lo->second);
    }

    void validate() const {
        if (knots_.empty()) return;
        if (knots_.size() < 2 || knots_.front().first != 0.0 || knots_.back().first != 1.0)
            throw InvalidConfiguration("damping table must start at tau = 0 and end at tau = 1");
        if (knots_.front().second != 1.0 || knots_.back().second != 0.0)
            throw InvalidConfiguration("damping table must satisfy h(0) = 1 and h(1) = 0");
        for (std::size_t k = 1; k < knots_.size(); ++k) {
            if (!(knots_[k].first > knots_[k - 1].first))
                throw InvalidConfiguration("damping table tau values must be strictly increasing");
            if (knots_[k].second > knots_[k - 1].second)
                throw InvalidConfiguration("damping table must be monotonically decreasing");
        }
    }

private:
    std::vector<std::pair<double, double>> knots_;
};

/// Everything the training-free score estimator needs at one filtering step.
/// Non-owning: `predictions` must outlive the context.
struct ScoreContext {
    const Ensemble& predictions;
    DiffusionSchedule schedule;
    std::size_t batch_size = 1;
    DampingFunction damping;

    void validate() const {
        if (predictions.empty()) throw InvalidConfiguration("score context has no predictions");
        if (batch_size < 1 || batch_size > predictions.size())
            throw InvalidConfiguration("mini-batch size must satisfy 1 <= N <= J");
    }
};

/// N distinct indices drawn uniformly from [0, J) (Floyd's algorithm).
/// N == J returns 0..J-1 in order without consuming randomness.
inline std::vector<std::size_t> sample_minibatch(std::size_t J, std::size_t N, RandomStream& rng) {
    if (N < 1 || N > J) throw InvalidConfiguration("mini-batch size must satisfy 1 <= N <= J");
    std::vector<std::size_t> out;
    out.reserve(N);
    if (N == J) {
        out.resize(J);
        std::iota(out.begin(), out.end(), std::size_t{0});
        return out;
    }
    if (N == 1) {
        out.push_back(static_cast<std::size_t>(rng.below(J)));
        return out;
    }
    // Linear membership scans beat hashing for the small batches used in practice.
    if (N <= 64) {
        for (std::size_t m = J - N; m < J; ++m) {
            const auto t = static_cast<std::size_t>(rng.below(m + 1));
            const bool taken = std::find(out.begin(), out.end(), t) != out.end();
            out.push_back(taken ? m : t);
        }
        return out;
    }
    std::unordered_set<std::size_t> seen;
    seen.reserve(2 * N);
    for (std::size_t m = J - N; m < J; ++m) {
        const auto t = static_cast<std::size_t>(rng.below(m + 1));
        const std::size_t pick = seen.contains(t) ? m : t;
        seen.insert(pick);
        out.push_back(pick);
    }
    return out;
}

/// Normalized kernel weights over the batch, computed in the log domain with
/// max subtraction so that far-away batch points underflow to exactly zero.
inline void minibatch_weights(std::span<const double> z, double tau, const ScoreContext& ctx,
                              std::span<const std::size_t> batch, std::vector<double>& weights) {
    weights.resize(batch.size());
    if (batch.size() == 1) {
        weights[0] = 1.0;
        return;
    }
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < batch.size(); ++n) {
        weights[n] = ctx.schedule.gaussian_log_kernel(z, ctx.predictions.member(batch[n]), tau);
        max_log = std::max(max_log, weights[n]);
    }
    if (!std::isfinite(max_log)) throw NumericalError("non-finite kernel log-weight in score estimator");
    double total = 0.0;
    for (double& w : weights) {
        w = std::exp(w - max_log);
        total += w;
    }
    for (double& w : weights) w /= total;
}

inline std::vector<double> minibatch_weights(std::span<const double> z, double tau, const ScoreContext& ctx,
                                             std::span<const std::size_t> batch) {
    std::vector<double> w;
    minibatch_weights(z, tau, ctx, batch, w);
    return w;
}

/// Mini-batch Monte Carlo estimate of the prior score
///   S(z, tau) ~= sum_n -(z - alpha_bar x_n) / beta_bar_sq * w_n
/// written into `out`. `weights` is scratch space.
inline void estimate_prior_score(std::span<const double> z, double tau, const ScoreContext& ctx,
                                 std::span<const std::size_t> batch, std::span<double> out,
                                 std::vector<double>& weights) {
    if (batch.empty()) throw InvalidConfiguration("empty mini-batch");
    require_same_dim(z, out, "estimate_prior_score");
    const double a = ctx.schedule.alpha_bar(tau);
    const double inv_b2 = 1.0 / ctx.schedule.beta_bar_sq(tau);
    const std::size_t d = z.size();

    if (batch.size() == 1) {
        auto x = ctx.predictions.member(batch[0]);
        require_same_dim(z, x, "estimate_prior_score");
        for (std::size_t i = 0; i < d; ++i) out[i] = -(z[i] - a * x[i]) * inv_b2;
    } else {
        minibatch_weights(z, tau, ctx, batch, weights);
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t n = 0; n < batch.size(); ++n) {
            const double w = weights[n];
            if (w == 0.0) continue;
            auto x = ctx.predictions.member(batch[n]);
            for (std::size_t i = 0; i < d; ++i) out[i] += -(z[i] - a * x[i]) * inv_b2 * w;
        }
    }
    for (double v : out)
        if (!std::isfinite(v)) throw NumericalError("non-finite prior score estimate");
}

inline StateVector estimate_prior_score(std::span<const double> z, double tau, const ScoreContext& ctx,
                                        std::span<const std::size_t> batch) {
    StateVector out(z.size());
    std::vector<double> weights;
    estimate_prior_score(z, tau, ctx, batch, out, weights);
    return out;
}

inline double damping(double tau, const ScoreContext& ctx) { return ctx.damping(tau); }

/// Prior score plus h(tau) times the log-likelihood gradient.
inline void posterior_score(std::span<const double> z, double tau, const ScoreContext& ctx,
                            std::span<const std::size_t> batch, std::span<const double> y,
                            const ObservationModel& obs, std::span<double> out, std::vector<double>& weights) {
    estimate_prior_score(z, tau, ctx, batch, out, weights);
    const double h = ctx.damping(tau);
    if (h != 0.0) add_grad_log_likelihood(z, y, obs, h, out);
}

inline StateVector posterior_score(std::span<const double> z, double tau, const ScoreContext& ctx,
                                   std::span<const std::size_t> batch, std::span<const double> y,
                                   const ObservationModel& obs) {
    StateVector out(z.size());
    std::vector<double> weights;
    posterior_score(z, tau, ctx, batch, y, obs, out, weights);
    return out;
}

}  // namespace ensf
