#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "observation.hpp"
#include "parallel.hpp"

namespace ensf::letkf {

/// Eigenvalues of the local (J x J) precision below this are floored.
inline constexpr double kEigenFloor = 1e-10;

struct LETKFConfig {
    /// Multiplicative covariance inflation; forecast perturbations are scaled by sqrt(inflation).
    double inflation = 1.0;
    /// Ring-distance cutoff c. Observations within ceil(c) of a state index are
    /// used; c < 1 keeps only the co-located observation.
    double localization = 4.0;
    unsigned threads = 1;

    std::size_t radius() const { return localization < 1.0 ? 0 : static_cast<std::size_t>(std::ceil(localization)); }

    std::size_t neighbor_size(std::size_t d) const { return std::min(2 * radius() + 1, d); }

    void validate() const {
        if (!(inflation >= 0.0) || !std::isfinite(inflation)) throw InvalidConfiguration("inflation must be >= 0");
        if (!(localization >= 0.0) || !std::isfinite(localization))
            throw InvalidConfiguration("localization must be >= 0");
    }
};

/// Indices within cyclic distance radius() of i, nearest-first order
/// (i, i-1, i+1, i-2, i+2, ...). Covers all of [0, d) once 2r+1 >= d.
inline std::vector<std::size_t> local_region(std::size_t i, const LETKFConfig& cfg, std::size_t d) {
    if (i >= d) throw DomainError("local_region: index out of range");
    std::vector<std::size_t> out;
    const std::size_t size = cfg.neighbor_size(d);
    out.reserve(size);
    out.push_back(i);
    for (std::size_t r = 1; out.size() < size; ++r) {
        out.push_back((i + d - r % d) % d);
        if (out.size() < size) out.push_back((i + r) % d);
    }
    return out;
}

struct Diagnostics {
    /// Local analyses in which at least one eigenvalue hit the floor.
    std::size_t regularized_solves = 0;
};

/// Local Ensemble Transform Kalman Filter analysis (symmetric square-root form).
///
/// The observation-space ensemble is g applied member-wise. Each state index
/// gets its own J x J analysis from the observations in local_region(i).
inline Ensemble letkf_analysis(const Ensemble& forecast, std::span<const double> y, const ObservationModel& obs,
                               const LETKFConfig& cfg, Diagnostics* diag = nullptr) {
    if (forecast.empty()) throw InvalidConfiguration("letkf_analysis: empty forecast ensemble");
    require_same_dim(forecast.member(0), y, "letkf_analysis");
    cfg.validate();
    obs.validate();

    const std::size_t J = forecast.size();
    const std::size_t d = forecast.dim();
    if (J < 2) return forecast;

    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    // State and observation perturbations, one row per component.
    MatrixXd Xp(d, J), Yp(d, J);
    VectorXd xbar = VectorXd::Zero(d), ybar = VectorXd::Zero(d);
    for (std::size_t j = 0; j < J; ++j)
        for (std::size_t i = 0; i < d; ++i) {
            Xp(i, j) = forecast(j, i);
            Yp(i, j) = obs.apply(forecast(j, i));
        }
    xbar = Xp.rowwise().mean();
    ybar = Yp.rowwise().mean();
    Xp.colwise() -= xbar;
    Yp.colwise() -= ybar;

    Ensemble analysis(J, d);
    if (cfg.inflation == 0.0) {
        for (std::size_t j = 0; j < J; ++j)
            for (std::size_t i = 0; i < d; ++i) analysis(j, i) = xbar(i);
        return analysis;
    }

    const double jm1 = static_cast<double>(J - 1);
    const double inv_r = 1.0 / (obs.sigma * obs.sigma);
    std::atomic<std::size_t> regularized{0};

    parallel_for(d, cfg.threads, [&](std::size_t i) {
        const auto region = local_region(i, cfg, d);
        const auto L = static_cast<Eigen::Index>(region.size());
        MatrixXd YpL(L, J);
        VectorXd innov(L);
        for (Eigen::Index l = 0; l < L; ++l) {
            const std::size_t m = region[static_cast<std::size_t>(l)];
            YpL.row(l) = Yp.row(static_cast<Eigen::Index>(m));
            innov(l) = y[m] - ybar(static_cast<Eigen::Index>(m));
        }
        const MatrixXd C = YpL.transpose() * inv_r;
        MatrixXd A = C * YpL;
        A.diagonal().array() += jm1 / cfg.inflation;

        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(A);
        VectorXd lambda = eig.eigenvalues();
        if (lambda.minCoeff() < kEigenFloor) {
            regularized.fetch_add(1, std::memory_order_relaxed);
            lambda = lambda.cwiseMax(kEigenFloor);
        }
        const MatrixXd& Q = eig.eigenvectors();
        const MatrixXd Pa = Q * lambda.cwiseInverse().asDiagonal() * Q.transpose();
        const MatrixXd W = Q * (jm1 * lambda.cwiseInverse()).cwiseSqrt().asDiagonal() * Q.transpose();
        const VectorXd wbar = Pa * (C * innov);

        const auto row = Xp.row(static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < J; ++j) {
            const double incr = row.dot(wbar + W.col(static_cast<Eigen::Index>(j)));
            analysis(j, i) = xbar(static_cast<Eigen::Index>(i)) + incr;
        }
    });

    if (diag) diag->regularized_solves += regularized.load();
    return analysis;
}

}  // namespace ensf::letkf
