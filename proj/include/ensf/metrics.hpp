#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "core.hpp"

namespace ensf::metrics {

/// Root-mean-square error over the d components.
inline double rmse(std::span<const double> estimate, std::span<const double> truth) {
    require_same_dim(estimate, truth, "rmse");
    if (truth.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double e = estimate[i] - truth[i];
        acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(truth.size()));
}

/// sqrt of the dimension-averaged unbiased (divisor J-1) ensemble variance.
inline double ensemble_spread(const Ensemble& ens) {
    if (ens.size() < 2) throw InvalidConfiguration("ensemble spread needs at least 2 members");
    const StateVector mean = ensemble_mean(ens);
    double acc = 0.0;
    for (std::size_t j = 0; j < ens.size(); ++j) {
        auto m = ens.member(j);
        for (std::size_t i = 0; i < mean.size(); ++i) {
            const double e = m[i] - mean[i];
            acc += e * e;
        }
    }
    const double var = acc / static_cast<double>(ens.size() - 1);
    return std::sqrt(var / static_cast<double>(ens.dim()));
}

/// Dimension-averaged CRPS of the ensemble's empirical CDF against the truth:
///   (1/J) sum_j |x_j - y| - (1/(2 J^2)) sum_{j,k} |x_j - x_k|
/// The pair sum is evaluated in O(J log J) per dimension on sorted values.
inline double crps(const Ensemble& ens, std::span<const double> truth) {
    if (ens.empty()) throw InvalidConfiguration("CRPS needs at least one member");
    require_same_dim(ens.member(0), truth, "crps");
    const std::size_t J = ens.size();
    const double Jd = static_cast<double>(J);
    std::vector<double> col(J);
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        double abs_err = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            col[j] = ens(j, i);
            abs_err += std::abs(col[j] - truth[i]);
        }
        std::sort(col.begin(), col.end());
        // sum_{j,k} |x_j - x_k| = 2 sum_j (2j - J + 1) x_(j) for sorted x.
        double pair = 0.0;
        for (std::size_t j = 0; j < J; ++j) pair += (2.0 * static_cast<double>(j) - Jd + 1.0) * col[j];
        pair *= 2.0;
        total += abs_err / Jd - pair / (2.0 * Jd * Jd);
    }
    return std::max(0.0, total / static_cast<double>(truth.size()));
}

}  // namespace ensf::metrics
