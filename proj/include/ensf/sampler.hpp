#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "diffusion.hpp"
#include "lorenz96.hpp"
#include "observation.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "score.hpp"

namespace ensf {

/// How the score mini-batch is chosen along one backward trajectory.
enum class BatchPolicy {
    /// A fresh batch for every (member, pseudo-step) evaluation.
    redraw,
    /// Member j always uses prediction j plus N-1 other predictions drawn once
    /// at the start of its trajectory.
    anchored,
};

struct EnSFConfig {
    std::size_t ensemble_size = 20;
    std::size_t batch_size = 1;
    DiffusionSchedule schedule{0.5, 0.025, 500};
    DampingFunction damping = DampingFunction::one_minus_tau();
    BatchPolicy batch_policy = BatchPolicy::redraw;
    /// Std of additive Gaussian noise put on each prediction (model noise omega). 0 disables.
    double prediction_noise = 0.0;
    unsigned threads = 1;

    void validate() const {
        if (ensemble_size < 1) throw InvalidConfiguration("EnSF ensemble size must be >= 1");
        if (batch_size < 1 || batch_size > ensemble_size)
            throw InvalidConfiguration("EnSF mini-batch size must satisfy 1 <= N <= J");
        schedule.validate();
        damping.validate();
        if (!(prediction_noise >= 0.0)) throw InvalidConfiguration("prediction_noise must be >= 0");
    }
};

/// Euler-Maruyama integration of the backward SDE from tau = 1 to tau = 0,
/// for `members` independent trajectories started from N(0, I).
///
///   z_k = z_{k+1} - [b z_{k+1} - sigma^2 S(z_{k+1}, tau_{k+1})] dtau + sigma dW,  dW ~ N(0, dtau I)
///
/// `score(z, tau, member, rng, out, scratch)` writes the score at (z, tau).
/// Each member owns a substream derived from one draw of `rng`, so results do
/// not depend on `threads`.
template <class ScoreFn>
Ensemble backward_sample_with(std::size_t members, std::size_t dim, const DiffusionSchedule& schedule,
                              ScoreFn&& score, RandomStream& rng, unsigned threads = 1) {
    Ensemble out(members, dim);
    const std::uint64_t base = rng.split();
    const std::size_t K = schedule.steps();
    const double dtau = schedule.step_size();
    const double sqrt_dtau = std::sqrt(dtau);

    parallel_for(members, threads, [&](std::size_t j) {
        RandomStream member_rng(derive_seed(base, {j}));
        auto z = out.member(j);
        member_rng.fill_normal(z);
        std::vector<double> s(dim);
        std::vector<double> scratch;
        for (std::size_t k = K; k-- > 0;) {
            const double tau = schedule.tau(k + 1);
            const double b = schedule.drift(tau);
            const double g2 = schedule.diffusion_sq(tau);
            const double g = std::sqrt(g2);
            score(std::span<const double>(z), tau, j, member_rng, std::span<double>(s), scratch);
            bool finite = true;
            for (std::size_t i = 0; i < dim; ++i) {
                z[i] += -(b * z[i] - g2 * s[i]) * dtau + g * sqrt_dtau * member_rng.normal();
                finite = finite && std::isfinite(z[i]);
            }
            if (!finite) throw SamplerDivergence(k, j);
        }
    });
    return out;
}

/// EnSF analysis: samples the posterior given the prediction ensemble and
/// the observation y. Output has as many members as `predictions`.
inline Ensemble backward_sample(const Ensemble& predictions, std::span<const double> y,
                                const ObservationModel& obs, const EnSFConfig& cfg, RandomStream& rng) {
    if (predictions.empty()) throw InvalidConfiguration("backward_sample: empty prediction ensemble");
    require_same_dim(predictions.member(0), y, "backward_sample");
    cfg.schedule.validate();
    obs.validate();
    const std::size_t J = predictions.size();
    const std::size_t N = cfg.batch_size;
    if (N < 1 || N > J) throw InvalidConfiguration("mini-batch size must satisfy 1 <= N <= J");

    const ScoreContext ctx{predictions, cfg.schedule, N, cfg.damping};

    // Anchored batches are fixed per member, drawn from a separate substream.
    std::vector<std::vector<std::size_t>> anchored;
    if (cfg.batch_policy == BatchPolicy::anchored) {
        RandomStream batch_rng(rng.split());
        anchored.resize(J);
        for (std::size_t j = 0; j < J; ++j) {
            auto& b = anchored[j];
            b.push_back(j);
            if (N > 1) {
                // N-1 distinct picks from the other J-1 predictions.
                for (std::size_t idx : sample_minibatch(J - 1, N - 1, batch_rng)) b.push_back(idx < j ? idx : idx + 1);
            }
        }
    }

    std::vector<std::size_t> full_batch;
    if (N == J) {
        full_batch.resize(J);
        for (std::size_t n = 0; n < J; ++n) full_batch[n] = n;
    }

    auto score = [&](std::span<const double> z, double tau, std::size_t j, RandomStream& member_rng,
                     std::span<double> out, std::vector<double>& scratch) {
        if (cfg.batch_policy == BatchPolicy::anchored) {
            posterior_score(z, tau, ctx, anchored[j], y, obs, out, scratch);
        } else if (N == J) {
            posterior_score(z, tau, ctx, full_batch, y, obs, out, scratch);
        } else if (N == 1) {
            const std::size_t pick = static_cast<std::size_t>(member_rng.below(J));
            posterior_score(z, tau, ctx, std::span<const std::size_t>(&pick, 1), y, obs, out, scratch);
        } else {
            const auto batch = sample_minibatch(J, N, member_rng);
            posterior_score(z, tau, ctx, batch, y, obs, out, scratch);
        }
    };
    return backward_sample_with(J, predictions.dim(), cfg.schedule, score, rng, cfg.threads);
}

/// Adds N(0, noise^2) to every prediction component. No-op for noise == 0.
inline void add_prediction_noise(Ensemble& predictions, double noise, RandomStream& rng) {
    if (noise <= 0.0) return;
    for (double& v : predictions.data()) v += noise * rng.normal();
}

/// One full filtering step: forecast with the model, then the score-based update.
inline Ensemble ensf_step(const Ensemble& posterior_prev, std::span<const double> y, const Lorenz96Params& model,
                          const ObservationModel& obs, const EnSFConfig& cfg, std::size_t steps_between,
                          RandomStream& rng) {
    if (posterior_prev.empty()) throw InvalidConfiguration("ensf_step: ensemble has no members");
    Ensemble predictions = posterior_prev;
    propagate(predictions, model, steps_between, cfg.threads);
    add_prediction_noise(predictions, cfg.prediction_noise, rng);
    return backward_sample(predictions, y, obs, cfg, rng);
}

}  // namespace ensf
