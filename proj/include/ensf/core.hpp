#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ensf {

/// A d-dimensional model state in dimensionless model units.
using StateVector = std::vector<double>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    /// Short machine-readable tag, used by the CLI error JSON.
    virtual const char* kind() const noexcept { return "error"; }
};

class InvalidDimension : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invalid-dimension"; }
};

class InvalidConfiguration : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invalid-configuration"; }
};

class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "domain-error"; }
};

class NumericalError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "numerical-error"; }
};

/// Raised by the backward sampler when a trajectory leaves the finite range.
class SamplerDivergence : public NumericalError {
public:
    SamplerDivergence(std::size_t pseudo_step, std::size_t member)
        : NumericalError("backward sampler diverged at pseudo-step " + std::to_string(pseudo_step) +
                         ", member " + std::to_string(member)),
          pseudo_step_(pseudo_step),
          member_(member) {}

    const char* kind() const noexcept override { return "sampler-divergence"; }
    std::size_t pseudo_step() const noexcept { return pseudo_step_; }
    std::size_t member() const noexcept { return member_; }

private:
    std::size_t pseudo_step_;
    std::size_t member_;
};

// ---------------------------------------------------------------------------
// Ensemble
// ---------------------------------------------------------------------------

/// J members of dimension d, stored member-major (each member contiguous).
class Ensemble {
public:
    Ensemble() = default;
    Ensemble(std::size_t members, std::size_t dim, double fill = 0.0)
        : members_(members), dim_(dim), data_(members * dim, fill) {}

    std::size_t size() const noexcept { return members_; }
    std::size_t dim() const noexcept { return dim_; }
    bool empty() const noexcept { return members_ == 0; }

    std::span<double> member(std::size_t j) { return {data_.data() + j * dim_, dim_}; }
    std::span<const double> member(std::size_t j) const { return {data_.data() + j * dim_, dim_}; }

    double& operator()(std::size_t j, std::size_t i) { return data_[j * dim_ + i]; }
    double operator()(std::size_t j, std::size_t i) const { return data_[j * dim_ + i]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Ensemble&, const Ensemble&) = default;

private:
    std::size_t members_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

inline StateVector ensemble_mean(const Ensemble& ens) {
    StateVector mean(ens.dim(), 0.0);
    if (ens.empty()) return mean;
    for (std::size_t j = 0; j < ens.size(); ++j) {
        auto m = ens.member(j);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += m[i];
    }
    for (double& v : mean) v /= static_cast<double>(ens.size());
    return mean;
}

inline void require_same_dim(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size())
        throw InvalidDimension(std::string(what) + ": dimension mismatch (" + std::to_string(a.size()) +
                               " vs " + std::to_string(b.size()) + ")");
}

}  // namespace ensf
