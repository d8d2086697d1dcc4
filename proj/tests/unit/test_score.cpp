#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include <ensf/score.hpp>

using namespace ensf;

namespace {

Ensemble gaussian_ensemble(std::size_t J, std::size_t d, double mu, double s, std::uint64_t seed) {
    Ensemble e(J, d);
    RandomStream rng(seed);
    for (double& v : e.data()) v = mu + s * rng.normal();
    return e;
}

double rel_l2(const StateVector& a, const StateVector& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

std::vector<std::size_t> all_indices(std::size_t J) {
    std::vector<std::size_t> v(J);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

}  // namespace

TEST(Damping, DefaultExamples) {
    const auto h = DampingFunction::one_minus_tau();
    EXPECT_EQ(h(0.0), 1.0);
    EXPECT_EQ(h(1.0), 0.0);
    EXPECT_DOUBLE_EQ(h(0.25), 0.75);
    EXPECT_THROW(h(1.5), DomainError);
}

TEST(Damping, TableInterpolatesAndValidates) {
    const auto h = DampingFunction::table({{0.0, 1.0}, {0.5, 0.2}, {1.0, 0.0}});
    EXPECT_DOUBLE_EQ(h(0.25), 0.6);
    EXPECT_DOUBLE_EQ(h(0.75), 0.1);
    EXPECT_EQ(h(1.0), 0.0);
    double prev = 2.0;
    for (int k = 0; k <= 100; ++k) {
        EXPECT_LE(h(k / 100.0), prev);
        prev = h(k / 100.0);
    }
    EXPECT_THROW(DampingFunction::table({{0.0, 1.0}, {0.5, 0.6}, {0.7, 0.8}, {1.0, 0.0}}), InvalidConfiguration);
    EXPECT_THROW(DampingFunction::table({{0.0, 0.9}, {1.0, 0.0}}), InvalidConfiguration);
    EXPECT_THROW(DampingFunction::table({{0.1, 1.0}, {1.0, 0.0}}), InvalidConfiguration);
    EXPECT_THROW(DampingFunction::table({{0.0, 1.0}, {0.0, 0.5}, {1.0, 0.0}}), InvalidConfiguration);
}

TEST(Minibatch, FullBatchIsIdentityAndConsumesNothing) {
    RandomStream a(1), b(1);
    EXPECT_EQ(sample_minibatch(6, 6, a), all_indices(6));
    EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Minibatch, SingleIndexAndErrors) {
    RandomStream rng(2);
    for (int i = 0; i < 100; ++i) {
        const auto b = sample_minibatch(20, 1, rng);
        ASSERT_EQ(b.size(), 1u);
        EXPECT_LT(b[0], 20u);
    }
    EXPECT_THROW(sample_minibatch(5, 6, rng), InvalidConfiguration);
    EXPECT_THROW(sample_minibatch(5, 0, rng), InvalidConfiguration);
}

TEST(Minibatch, DistinctDeterministicAndUniform) {
    for (std::size_t N : {3u, 100u}) {
        const std::size_t J = N == 3 ? 10 : 400;
        RandomStream a(3), b(3);
        std::vector<int> counts(J, 0);
        const int trials = 20000;
        for (int t = 0; t < trials; ++t) {
            const auto x = sample_minibatch(J, N, a);
            ASSERT_EQ(x, sample_minibatch(J, N, b));
            ASSERT_EQ(std::set<std::size_t>(x.begin(), x.end()).size(), N);
            for (auto i : x) {
                ASSERT_LT(i, J);
                ++counts[i];
            }
        }
        const double expect = trials * static_cast<double>(N) / static_cast<double>(J);
        double chi2 = 0.0;
        for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
        // Without-replacement draws have slightly less variance than multinomial.
        EXPECT_LT(chi2, static_cast<double>(J) + 5.0 * std::sqrt(2.0 * static_cast<double>(J)));
    }
}

TEST(PriorScore, BatchOfOneIsExact) {
    const auto preds = gaussian_ensemble(5, 4, 0.0, 2.0, 4);
    const ScoreContext ctx{preds, DiffusionSchedule(0.5, 0.025, 500), 1, {}};
    const StateVector z{0.3, -1.0, 2.0, 0.5};
    const double t = 0.37;
    const std::size_t idx = 3;
    const auto s = estimate_prior_score(z, t, ctx, std::vector<std::size_t>{idx});
    const double a = ctx.schedule.alpha_bar(t), b2 = ctx.schedule.beta_bar_sq(t);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(s[i], -(z[i] - a * preds(idx, i)) / b2);
}

TEST(PriorScore, SymmetricPairCancels) {
    Ensemble preds(2, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        preds(0, i) = 1.5 * (i + 1.0);
        preds(1, i) = -1.5 * (i + 1.0);
    }
    const ScoreContext ctx{preds, DiffusionSchedule(0.5, 0.025, 500), 2, {}};
    for (double t : {0.0, 0.4, 1.0})
        for (double v : estimate_prior_score(StateVector(3, 0.0), t, ctx, all_indices(2))) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(PriorScore, WeightsNormalized) {
    const auto preds = gaussian_ensemble(200, 20, 1.0, 3.0, 5);
    const ScoreContext ctx{preds, DiffusionSchedule(0.5, 0.025, 500), 50, {}};
    RandomStream rng(6);
    for (int q = 0; q < 50; ++q) {
        StateVector z(20);
        rng.fill_normal(z, 2.0);
        const double t = rng.uniform();
        const auto batch = sample_minibatch(200, 50, rng);
        const auto w = minibatch_weights(z, t, ctx, batch);
        double sum = 0.0;
        for (double v : w) {
            EXPECT_GE(v, 0.0);
            sum += v;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(PriorScore, FarBatchPointsUnderflowCleanly) {
    const DiffusionSchedule sched(0.5, 0.025, 500);
    const double t = 0.1;
    const double beta = std::sqrt(sched.beta_bar_sq(t));
    const double a = sched.alpha_bar(t);
    Ensemble preds(3, 100, 0.0);
    // Member 0 sits on z; the others are >= 50 beta away from it in the kernel metric.
    for (std::size_t i = 0; i < 100; ++i) {
        preds(1, i) = 6.0 * beta / a;  // distance 60 beta over 100 components
        preds(2, i) = -1e3;
    }
    const ScoreContext ctx{preds, sched, 3, {}};
    const StateVector z(100, 0.0);
    const auto w = minibatch_weights(z, t, ctx, all_indices(3));
    EXPECT_EQ(w[0], 1.0);
    EXPECT_EQ(w[1], 0.0);
    EXPECT_EQ(w[2], 0.0);
    for (double v : estimate_prior_score(z, t, ctx, all_indices(3))) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_EQ(v, 0.0);
    }
}

TEST(PriorScore, EqualsWeightedMeanForm) {
    const auto preds = gaussian_ensemble(64, 6, -0.5, 1.0, 7);
    const ScoreContext ctx{preds, DiffusionSchedule(0.4, 0.05, 500), 16, {}};
    RandomStream rng(8);
    for (int q = 0; q < 20; ++q) {
        StateVector z(6);
        rng.fill_normal(z);
        const double t = 0.05 + 0.9 * rng.uniform();
        const auto batch = sample_minibatch(64, 16, rng);
        const auto w = minibatch_weights(z, t, ctx, batch);
        StateVector xw(6, 0.0);
        for (std::size_t n = 0; n < batch.size(); ++n)
            for (std::size_t i = 0; i < 6; ++i) xw[i] += w[n] * preds(batch[n], i);
        const auto s = estimate_prior_score(z, t, ctx, batch);
        const double a = ctx.schedule.alpha_bar(t), b2 = ctx.schedule.beta_bar_sq(t);
        for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(s[i], -(z[i] - a * xw[i]) / b2, 1e-10 * (1 + std::abs(s[i])));
    }
}

TEST(PriorScore, MatchesAnalyticGaussianMarginal) {
    const double mu = 0.5, s = 0.3;
    const std::size_t d = 10, J = 10000;
    const auto preds = gaussian_ensemble(J, d, mu, s, 9);
    const ScoreContext ctx{preds, DiffusionSchedule(0.5, 0.025, 500), J, {}};
    const auto batch = all_indices(J);
    RandomStream rng(10);
    for (double t : {0.5, 0.9}) {
        const double a = ctx.schedule.alpha_bar(t);
        const double var = a * a * s * s + ctx.schedule.beta_bar_sq(t);
        for (int q = 0; q < 10; ++q) {
            StateVector z(d);
            for (auto& v : z) v = a * mu + std::sqrt(var) * rng.normal();
            StateVector exact(d);
            for (std::size_t i = 0; i < d; ++i) exact[i] = -(z[i] - a * mu) / var;
            EXPECT_LT(rel_l2(estimate_prior_score(z, t, ctx, batch), exact), 0.05);
        }
    }
}

TEST(PriorScore, ErrorShrinksWithBatchSize) {
    const double mu = 0.0, s = 1.0;
    const std::size_t d = 10, J = 10000;
    const auto preds = gaussian_ensemble(J, d, mu, s, 11);
    const ScoreContext ctx{preds, DiffusionSchedule(0.5, 0.025, 500), 1, {}};
    const double t = 0.5;
    const double a = ctx.schedule.alpha_bar(t);
    const double var = a * a * s * s + ctx.schedule.beta_bar_sq(t);
    RandomStream qrng(12);
    std::vector<StateVector> queries(100, StateVector(d));
    for (auto& z : queries)
        for (auto& v : z) v = a * mu + std::sqrt(var) * qrng.normal();

    std::vector<double> err;
    for (std::size_t N : {10u, 100u, 1000u}) {
        RandomStream rng(13);
        double total = 0.0;
        for (const auto& z : queries) {
            StateVector exact(d);
            for (std::size_t i = 0; i < d; ++i) exact[i] = -(z[i] - a * mu) / var;
            total += rel_l2(estimate_prior_score(z, t, ctx, sample_minibatch(J, N, rng)), exact);
        }
        err.push_back(total / 100.0);
    }
    EXPECT_GT(err[0], err[1]);
    EXPECT_GT(err[1], err[2]);
}

TEST(PriorScore, Errors) {
    const auto preds = gaussian_ensemble(4, 3, 0, 1, 14);
    const ScoreContext ctx{preds, DiffusionSchedule(0.5, 0.025, 500), 1, {}};
    EXPECT_THROW(estimate_prior_score(StateVector(3, 0.0), 0.5, ctx, std::vector<std::size_t>{}), InvalidConfiguration);
    EXPECT_THROW(estimate_prior_score(StateVector(3, 0.0), 1.5, ctx, std::vector<std::size_t>{0}), DomainError);
    StateVector bad{0.0, std::nan(""), 0.0};
    EXPECT_THROW(estimate_prior_score(bad, 0.5, ctx, std::vector<std::size_t>{0}), NumericalError);
    EXPECT_THROW(estimate_prior_score(bad, 0.5, ctx, std::vector<std::size_t>{0, 1}), NumericalError);
    const ScoreContext too_big{preds, DiffusionSchedule(0.5, 0.025, 500), 5, {}};
    EXPECT_THROW(too_big.validate(), InvalidConfiguration);
}

TEST(PosteriorScore, EqualsPriorAtTauOne) {
    const auto preds = gaussian_ensemble(8, 5, 0, 2, 15);
    const ScoreContext ctx{preds, DiffusionSchedule(0.5, 0.025, 500), 4, {}};
    const ObservationModel obs;
    const StateVector z{0.1, 0.2, -0.3, 1.0, 2.0}, y{1.0, -1.0, 0.5, 0.0, 0.3};
    const std::vector<std::size_t> batch{0, 3, 5, 6};
    EXPECT_EQ(posterior_score(z, 1.0, ctx, batch, y, obs), estimate_prior_score(z, 1.0, ctx, batch));
    EXPECT_EQ(damping(1.0, ctx), 0.0);
}

TEST(PosteriorScore, EqualsPriorAtConsistentObservation) {
    const auto preds = gaussian_ensemble(8, 5, 0, 2, 16);
    const ScoreContext ctx{preds, DiffusionSchedule(0.5, 0.025, 500), 4, {}};
    const ObservationModel obs;
    const StateVector z{0.1, 0.2, -0.3, 1.0, 2.0};
    const auto y = obs.apply(z);
    const std::vector<std::size_t> batch{1, 2, 4, 7};
    EXPECT_EQ(posterior_score(z, 0.0, ctx, batch, y, obs), estimate_prior_score(z, 0.0, ctx, batch));
}

TEST(PosteriorScore, ComposesPriorAndDampedLikelihood) {
    const auto preds = gaussian_ensemble(30, 7, 1, 2, 17);
    for (const auto& h : {DampingFunction::one_minus_tau(), DampingFunction::table({{0, 1}, {0.3, 0.3}, {1, 0}})}) {
        const ScoreContext ctx{preds, DiffusionSchedule(0.6, 0.05, 500), 5, h};
        const ObservationModel obs{ObservationOperator::arctan, 0.05};
        RandomStream rng(18);
        for (int q = 0; q < 10; ++q) {
            StateVector z(7), y(7);
            rng.fill_normal(z, 2.0);
            rng.fill_normal(y, 0.5);
            const double t = rng.uniform();
            const auto batch = sample_minibatch(30, 5, rng);
            const auto prior = estimate_prior_score(z, t, ctx, batch);
            const auto g = grad_log_likelihood(z, y, obs);
            const auto post = posterior_score(z, t, ctx, batch, y, obs);
            for (std::size_t i = 0; i < 7; ++i)
                EXPECT_NEAR(post[i], prior[i] + h(t) * g[i], 1e-9 * (1 + std::abs(post[i])));
        }
    }
}
