#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace ensf {

/// Number of RK4 steps used to move a random initial condition onto the attractor.
inline constexpr std::size_t kBurnInSteps = 1000;

struct Lorenz96Params {
    std::size_t dim = 100;
    double forcing = 8.0;
    double dt = 0.01;
    /// true: dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F (standard Lorenz-96).
    /// false: the same without the -x_i term.
    bool damping_term = true;
    double clip_bound = 50.0;

    void validate() const {
        if (dim < 4) throw InvalidDimension("Lorenz-96 requires dim >= 4, got " + std::to_string(dim));
        if (!(dt >= 0.0) || !std::isfinite(dt)) throw InvalidConfiguration("Lorenz-96 dt must be finite and >= 0");
        if (!(clip_bound > 0.0)) throw InvalidConfiguration("clip_bound must be > 0");
        if (!std::isfinite(forcing)) throw InvalidConfiguration("forcing must be finite");
    }
};

/// Writes dx/dt into `out`. Indices are cyclic.
inline void lorenz96_rhs(std::span<const double> x, const Lorenz96Params& p, std::span<double> out) {
    const std::size_t d = x.size();
    if (d < 4) throw InvalidDimension("Lorenz-96 requires dim >= 4, got " + std::to_string(d));
    require_same_dim(x, out, "lorenz96_rhs");
    const double damp = p.damping_term ? 1.0 : 0.0;

    // Interior indices avoid the modulo; the three wrap-around indices are done separately.
    auto at = [&](std::size_t i) {
        const std::size_t ip1 = (i + 1) % d;
        const std::size_t im1 = (i + d - 1) % d;
        const std::size_t im2 = (i + d - 2) % d;
        return (x[ip1] - x[im2]) * x[im1] - damp * x[i] + p.forcing;
    };
    out[0] = at(0);
    out[1] = at(1);
    for (std::size_t i = 2; i + 1 < d; ++i) out[i] = (x[i + 1] - x[i - 2]) * x[i - 1] - damp * x[i] + p.forcing;
    out[d - 1] = at(d - 1);
}

inline StateVector lorenz96_rhs(std::span<const double> x, const Lorenz96Params& p) {
    StateVector out(x.size());
    lorenz96_rhs(x, p, out);
    return out;
}

inline void clip_magnitude(std::span<double> x, double bound) {
    for (double& v : x) v = std::clamp(v, -bound, bound);
}

inline StateVector clip_magnitude(std::span<const double> x, double bound) {
    StateVector out(x.begin(), x.end());
    clip_magnitude(std::span<double>(out), bound);
    return out;
}

/// Scratch buffers for in-place RK4 so ensemble propagation does not allocate per step.
struct Rk4Workspace {
    std::vector<double> k1, k2, k3, k4, stage;
    void resize(std::size_t d) {
        k1.resize(d);
        k2.resize(d);
        k3.resize(d);
        k4.resize(d);
        stage.resize(d);
    }
};

/// One classical RK4 step of size dt, followed by clipping to +-clip_bound.
inline void rk4_step(std::span<double> x, const Lorenz96Params& p, Rk4Workspace& ws) {
    const std::size_t d = x.size();
    ws.resize(d);
    const double h = p.dt;

    lorenz96_rhs(x, p, ws.k1);
    for (std::size_t i = 0; i < d; ++i) ws.stage[i] = x[i] + 0.5 * h * ws.k1[i];
    lorenz96_rhs(ws.stage, p, ws.k2);
    for (std::size_t i = 0; i < d; ++i) ws.stage[i] = x[i] + 0.5 * h * ws.k2[i];
    lorenz96_rhs(ws.stage, p, ws.k3);
    for (std::size_t i = 0; i < d; ++i) ws.stage[i] = x[i] + h * ws.k3[i];
    lorenz96_rhs(ws.stage, p, ws.k4);

    bool finite = true;
    for (std::size_t i = 0; i < d; ++i) {
        x[i] += h / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
        finite = finite && std::isfinite(x[i]);
    }
    if (!finite) throw NumericalError("non-finite value in Lorenz-96 RK4 step");
    clip_magnitude(x, p.clip_bound);
}

inline StateVector rk4_step(std::span<const double> x, const Lorenz96Params& p) {
    StateVector out(x.begin(), x.end());
    Rk4Workspace ws;
    rk4_step(std::span<double>(out), p, ws);
    return out;
}

/// Advances every member `steps` RK4 steps, member-parallel.
inline void propagate(Ensemble& ens, const Lorenz96Params& p, std::size_t steps, unsigned threads = 1) {
    parallel_for(ens.size(), threads, [&](std::size_t j) {
        Rk4Workspace ws;
        for (std::size_t s = 0; s < steps; ++s) rk4_step(ens.member(j), p, ws);
    });
}

/// Draws x ~ N(0, 3^2 I) and runs the burn-in.
inline StateVector init_true_state(RandomStream& rng, const Lorenz96Params& p) {
    p.validate();
    StateVector x(p.dim);
    rng.fill_normal(x, 3.0);
    Rk4Workspace ws;
    for (std::size_t s = 0; s < kBurnInSteps; ++s) rk4_step(std::span<double>(x), p, ws);
    return x;
}

// ---------------------------------------------------------------------------
// Random shocks (imperfect-model experiment)
// ---------------------------------------------------------------------------

struct ShockEvent {
    double probability = 0.0;    ///< chance per assimilation window
    double relative_size = 0.0;  ///< perturbation is relative_size * Z_i * |x_i|
};

struct ShockModel {
    std::vector<ShockEvent> events;

    /// Three-level mixture: 2%/5%, 1%/20%, 0.5%/50%.
    static ShockModel three_level() { return {{{0.02, 0.05}, {0.01, 0.20}, {0.005, 0.50}}}; }

    void validate() const {
        for (const auto& e : events) {
            if (!(e.probability >= 0.0 && e.probability <= 1.0))
                throw InvalidConfiguration("shock probability must lie in [0, 1]");
            if (!(e.relative_size > 0.0)) throw InvalidConfiguration("shock size must be > 0");
        }
    }
};

struct ShockOutcome {
    StateVector state;
    std::vector<std::size_t> fired;  ///< indices into ShockModel::events
    bool any() const noexcept { return !fired.empty(); }
};

/// Applies each event independently. Every event consumes one uniform; a
/// fired event additionally consumes d normals. The result is clipped.
inline ShockOutcome apply_shocks(std::span<const double> x, const ShockModel& model, RandomStream& rng,
                                 double clip_bound = 50.0) {
    ShockOutcome out{StateVector(x.begin(), x.end()), {}};
    std::vector<double> base(x.begin(), x.end());
    for (std::size_t k = 0; k < model.events.size(); ++k) {
        const auto& ev = model.events[k];
        if (rng.uniform() >= ev.probability) continue;
        out.fired.push_back(k);
        for (std::size_t i = 0; i < base.size(); ++i) out.state[i] += ev.relative_size * rng.normal() * std::abs(base[i]);
    }
    if (out.any()) clip_magnitude(std::span<double>(out.state), clip_bound);
    return out;
}

}  // namespace ensf
