#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include <ensf/sampler.hpp>

using namespace ensf;

namespace {

Ensemble random_ensemble(std::size_t J, std::size_t d, std::uint64_t seed, double scale = 1.0, double shift = 0.0) {
    Ensemble e(J, d);
    RandomStream rng(seed);
    for (double& v : e.data()) v = shift + scale * rng.normal();
    return e;
}

std::uint64_t fnv(std::span<const double> v) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* p = reinterpret_cast<const unsigned char*>(v.data());
    for (std::size_t i = 0; i < v.size_bytes(); ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Analytic score of the tau-marginal of N(mu, s^2 I) under the forward kernel.
auto gaussian_score(const DiffusionSchedule& sched, double mu, double s) {
    return [&sched, mu, s](std::span<const double> z, double tau, std::size_t, RandomStream&, std::span<double> out,
                           std::vector<double>&) {
        const double a = sched.alpha_bar(tau);
        const double var = a * a * s * s + sched.beta_bar_sq(tau);
        for (std::size_t i = 0; i < z.size(); ++i) out[i] = -(z[i] - a * mu) / var;
    };
}

}  // namespace

TEST(Sampler, SingleStepMatchesHandEvaluation) {
    const std::size_t d = 4;
    const auto preds = random_ensemble(1, d, 1, 2.0);
    EnSFConfig cfg;
    cfg.ensemble_size = 1;
    cfg.schedule = DiffusionSchedule(0.5, 0.025, 1);
    const ObservationModel obs;
    const StateVector y{0.3, -0.2, 1.0, 0.0};

    RandomStream rng(2), replay(2);
    const Ensemble out = backward_sample(preds, y, obs, cfg, rng);

    // tau_1 = 1: h(1) = 0, so the score is the batch-one prior score.
    RandomStream member(derive_seed(replay.split(), {0}));
    StateVector z(d);
    member.fill_normal(z);
    const double b = -(1.0 - 0.5) / 0.5;
    const double g2 = (1.0 - 0.025) + 2.0 * 0.5 * 1.0 / 0.5;
    for (std::size_t i = 0; i < d; ++i) {
        const double s = -(z[i] - 0.5 * preds(0, i)) / 1.0;
        const double expected = z[i] - (b * z[i] - g2 * s) * 1.0 + std::sqrt(g2) * member.normal();
        EXPECT_NEAR(out(0, i), expected, 1e-14 * (1 + std::abs(expected)));
    }
}

TEST(Sampler, FrozenScheduleLeavesInitialDraw) {
    // eps_alpha = eps_beta = 1 makes b and sigma^2 vanish, so nothing moves.
    const std::size_t d = 3;
    const auto preds = random_ensemble(2, d, 3, 2.0);
    EnSFConfig cfg;
    cfg.ensemble_size = 2;
    cfg.schedule = DiffusionSchedule(1.0, 1.0, 50);
    const ObservationModel obs;
    RandomStream rng(4), replay(4);
    const Ensemble out = backward_sample(preds, StateVector(d, 0.3), obs, cfg, rng);
    const std::uint64_t base = replay.split();
    for (std::size_t j = 0; j < 2; ++j) {
        RandomStream member(derive_seed(base, {j}));
        StateVector z(d);
        member.fill_normal(z);
        for (std::size_t i = 0; i < d; ++i) EXPECT_EQ(out(j, i), z[i]);
    }
}

TEST(Sampler, NearFrozenScheduleContractsTowardPrediction) {
    const std::size_t d = 50;
    Ensemble preds(1, d, 3.0);
    EnSFConfig cfg;
    cfg.ensemble_size = 1;
    cfg.schedule = DiffusionSchedule(0.9, 0.9, 200);
    const ObservationModel obs{ObservationOperator::linear_identity, 1e6};
    RandomStream rng(5), replay(5);
    const Ensemble out = backward_sample(preds, StateVector(d, 0.0), obs, cfg, rng);
    RandomStream member(derive_seed(replay.split(), {0}));
    StateVector z(d);
    member.fill_normal(z);
    double before = 0, after = 0;
    for (std::size_t i = 0; i < d; ++i) {
        before += std::abs(z[i] - 3.0);
        after += std::abs(out(0, i) - 3.0);
    }
    EXPECT_LT(after, 0.8 * before);
}

TEST(Sampler, OutputShapeMatchesPredictions) {
    const ObservationModel obs;
    for (std::size_t J : {1u, 3u, 8u})
        for (std::size_t d : {1u, 5u}) {
            const auto preds = random_ensemble(J, d, J * 10 + d);
            EnSFConfig cfg;
            cfg.ensemble_size = J;
            cfg.batch_size = J;
            cfg.schedule = DiffusionSchedule(0.5, 0.025, 20);
            RandomStream rng(5);
            const auto out = backward_sample(preds, StateVector(d, 0.1), obs, cfg, rng);
            EXPECT_EQ(out.size(), J);
            EXPECT_EQ(out.dim(), d);
            EXPECT_TRUE(out.all_finite());
        }
}

TEST(Sampler, DeterministicAcrossSeedsAndThreads) {
    const auto preds = random_ensemble(12, 16, 6, 3.0);
    const ObservationModel obs;
    const StateVector y(16, 0.4);
    for (auto policy : {BatchPolicy::redraw, BatchPolicy::anchored})
        for (std::size_t N : {1u, 4u, 12u}) {
            EnSFConfig cfg;
            cfg.ensemble_size = 12;
            cfg.batch_size = N;
            cfg.batch_policy = policy;
            cfg.schedule = DiffusionSchedule(0.5, 0.025, 40);
            RandomStream r1(7), r2(7), r3(8);
            const auto a = backward_sample(preds, y, obs, cfg, r1);
            cfg.threads = 4;
            const auto b = backward_sample(preds, y, obs, cfg, r2);
            const auto c = backward_sample(preds, y, obs, cfg, r3);
            EXPECT_EQ(a, b);
            EXPECT_NE(a, c);
        }
}

TEST(Sampler, AnalyticScoreRecoversGaussianTarget) {
    const DiffusionSchedule sched(0.5, 0.025, 500);
    const double mu = 0.0, s = 1.0;
    RandomStream rng(9);
    const auto out = backward_sample_with(4000, 2, sched, gaussian_score(sched, mu, s), rng);
    // The tau = 0 marginal is N(mu, s^2 + eps_beta).
    const double target_var = s * s + sched.beta_bar_sq(0.0);
    for (std::size_t i = 0; i < 2; ++i) {
        double m = 0, m2 = 0;
        for (std::size_t j = 0; j < out.size(); ++j) m += out(j, i);
        m /= static_cast<double>(out.size());
        for (std::size_t j = 0; j < out.size(); ++j) m2 += (out(j, i) - m) * (out(j, i) - m);
        m2 /= static_cast<double>(out.size() - 1);
        EXPECT_LT(std::abs(m - mu), 0.1 * std::sqrt(target_var));
        EXPECT_NEAR(m2 / target_var, 1.0, 0.15);
    }
}

TEST(Sampler, ContractsToFarGaussianPrior) {
    // Near-degenerate endpoints make N(0, I) the exact tau = 1 marginal.
    const DiffusionSchedule sched(1e-3, 1e-3, 500);
    const double mu = 6.0, s = 0.5;
    const std::size_t J = 2000;
    RandomStream rng(10);
    const auto out = backward_sample_with(J, 3, sched, gaussian_score(sched, mu, s), rng);
    const double sd = std::sqrt(s * s + 1e-3);
    for (std::size_t i = 0; i < 3; ++i) {
        double m = 0;
        for (std::size_t j = 0; j < J; ++j) m += out(j, i);
        m /= static_cast<double>(J);
        EXPECT_LT(std::abs(m - mu), 3.0 * sd / std::sqrt(static_cast<double>(J)));
    }
}

TEST(Sampler, NonFiniteStateRaisesDivergence) {
    const DiffusionSchedule sched(0.5, 0.025, 10);
    RandomStream rng(11);
    auto bad = [](std::span<const double>, double tau, std::size_t j, RandomStream&, std::span<double> out,
                  std::vector<double>&) {
        for (auto& v : out) v = (j == 2 && tau < 0.55) ? std::numeric_limits<double>::infinity() : 0.0;
    };
    try {
        backward_sample_with(4, 3, sched, bad, rng);
        FAIL() << "expected SamplerDivergence";
    } catch (const SamplerDivergence& e) {
        EXPECT_EQ(e.member(), 2u);
        EXPECT_EQ(e.pseudo_step(), 4u);  // tau_{k+1} = 0.5 is the first step below 0.55
    }
}

TEST(Sampler, NoClippingInsideBackwardSolve) {
    Ensemble preds(4, 2, 200.0);
    EnSFConfig cfg;
    cfg.ensemble_size = 4;
    cfg.batch_size = 4;
    cfg.schedule = DiffusionSchedule(0.5, 0.025, 100);
    const ObservationModel obs{ObservationOperator::linear_identity, 1e3};
    RandomStream rng(12);
    const auto out = backward_sample(preds, StateVector(2, 200.0), obs, cfg, rng);
    for (double v : out.data()) EXPECT_GT(v, 100.0);
}

TEST(Sampler, ConfigErrors) {
    EnSFConfig cfg;
    cfg.ensemble_size = 4;
    cfg.batch_size = 5;
    EXPECT_THROW(cfg.validate(), InvalidConfiguration);
    const auto preds = random_ensemble(4, 3, 13);
    RandomStream rng(14);
    EXPECT_THROW(backward_sample(preds, StateVector(3, 0.0), ObservationModel{}, cfg, rng), InvalidConfiguration);
    EXPECT_THROW(backward_sample(Ensemble{}, StateVector(3, 0.0), ObservationModel{}, EnSFConfig{}, rng),
                 InvalidConfiguration);
    EXPECT_THROW(backward_sample(preds, StateVector(2, 0.0), ObservationModel{}, EnSFConfig{}, rng),
                 InvalidDimension);
}

TEST(EnsfStep, EmptyEnsembleRejected) {
    RandomStream rng(15);
    EXPECT_THROW(ensf_step(Ensemble{}, StateVector(10, 0.0), Lorenz96Params{}, ObservationModel{}, EnSFConfig{}, 10, rng),
                 InvalidConfiguration);
}

TEST(EnsfStep, ForecastThenUpdate) {
    Lorenz96Params model;
    model.dim = 10;
    const auto prev = random_ensemble(6, 10, 16, 3.0);
    EnSFConfig cfg;
    cfg.ensemble_size = 6;
    cfg.schedule = DiffusionSchedule(0.5, 0.025, 30);
    const ObservationModel obs;
    const StateVector y(10, 0.2);

    Ensemble preds = prev;
    propagate(preds, model, 10);
    RandomStream r1(17), r2(17);
    const auto direct = backward_sample(preds, y, obs, cfg, r1);
    EXPECT_EQ(ensf_step(prev, y, model, obs, cfg, 10, r2), direct);
}

TEST(EnsfStep, PredictionNoiseHook) {
    Ensemble e(3, 4, 1.0);
    RandomStream rng(18);
    add_prediction_noise(e, 0.0, rng);
    for (double v : e.data()) EXPECT_EQ(v, 1.0);
    add_prediction_noise(e, 0.5, rng);
    int changed = 0;
    for (double v : e.data()) changed += v != 1.0;
    EXPECT_EQ(changed, 12);
}

TEST(EnsfStep, GoldenRun) {
    Lorenz96Params model;
    model.dim = 10;
    RandomStream init(19);
    Ensemble prev(20, 10);
    init.fill_normal(prev.data(), 3.0);
    RandomStream truth_rng(20), obs_rng(21), rng(22);
    auto truth = init_true_state(truth_rng, model);
    const auto y = observe(truth, ObservationModel{}, obs_rng);
    EnSFConfig cfg;
    const auto post = ensf_step(prev, y, model, ObservationModel{}, cfg, 10, rng);
    EXPECT_EQ(fnv(post.data()), 0x9d9e0cb8901f5bbeULL) << std::hex << fnv(post.data());
}
