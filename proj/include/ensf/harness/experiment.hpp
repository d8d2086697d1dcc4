#pragma once

// Twin-experiment runner: truth generation, observation, filtering and
// per-step metrics, plus sweeps, method comparisons and timing studies.
//
// Seed tree (all via derive_seed):
//   truth            (seed, rep, truth)
//   observation noise(seed, rep, obs_noise)
//   shocks           (seed, rep, shocks)
//   initial ensemble (seed, rep, initial_ensemble)
//   filter           (seed, rep, filter, cell...)
// Everything except the filter stream is shared by all methods and sweep
// cells, so they see the same truth and observations.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "../core.hpp"
#include "../letkf.hpp"
#include "../lorenz96.hpp"
#include "../metrics.hpp"
#include "../observation.hpp"
#include "../parallel.hpp"
#include "../random.hpp"
#include "../sampler.hpp"
#include "config.hpp"

namespace ensf::harness {

inline constexpr const char* kVersion = "ensf-0.1.0";

enum class RowKind { prediction_only, assimilation };

inline const char* to_string(RowKind k) { return k == RowKind::assimilation ? "assimilation" : "prediction-only"; }

struct MetricsRecord {
    std::string method;
    std::size_t repetition = 0;
    std::size_t time_index = 0;
    RowKind kind = RowKind::prediction_only;
    double rmse = 0.0;
    double spread = 0.0;
    double crps = 0.0;
    bool shock = false;
};

struct RepetitionInfo {
    std::size_t index = 0;
    std::string truth_digest;
    std::string observation_digest;
    std::vector<std::size_t> shock_times;
    bool diverged = false;
    std::size_t diverged_at = 0;
    std::string error;
    std::size_t regularized_solves = 0;
};

struct Snapshot {
    std::size_t repetition = 0;
    std::size_t time_index = 0;
    StateVector truth;
    StateVector estimate;
};

struct RunMetadata {
    std::string method;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    double wall_seconds = 0.0;
    std::vector<RepetitionInfo> repetitions;
};

struct RunOutput {
    ExperimentConfig config;
    std::vector<MetricsRecord> rows;
    std::vector<Snapshot> snapshots;
    RunMetadata meta;
};

/// Incremental FNV-1a over the raw bytes of double sequences.
class Digest {
public:
    void update(std::span<const double> v) {
        const auto* p = reinterpret_cast<const unsigned char*>(v.data());
        for (std::size_t i = 0; i < v.size_bytes(); ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ULL;
        }
    }
    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
        return buf;
    }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t stream_seed(const ExperimentConfig& c, std::size_t rep, StreamRole role) {
    return derive_seed(c.seed, {rep, static_cast<std::uint64_t>(role)});
}

inline std::uint64_t filter_seed(const ExperimentConfig& c, std::size_t rep) {
    std::uint64_t s = stream_seed(c, rep, StreamRole::filter);
    for (std::uint64_t coord : c.cell) s = derive_seed(s, {coord});
    return s;
}

namespace detail {

struct RepetitionResult {
    std::vector<MetricsRecord> rows;
    std::vector<Snapshot> snapshots;
    RepetitionInfo info;
};

inline MetricsRecord measure(const ExperimentConfig& c, std::size_t rep, std::size_t t, RowKind kind,
                             const Ensemble& ens, std::span<const double> truth) {
    MetricsRecord r;
    r.method = c.method.label;
    r.repetition = rep;
    r.time_index = t;
    r.kind = kind;
    r.rmse = metrics::rmse(ensemble_mean(ens), truth);
    r.spread = ens.size() >= 2 ? metrics::ensemble_spread(ens) : std::numeric_limits<double>::quiet_NaN();
    r.crps = c.compute_crps ? metrics::crps(ens, truth) : std::numeric_limits<double>::quiet_NaN();
    return r;
}

inline RepetitionResult run_repetition(const ExperimentConfig& c, std::size_t rep, unsigned threads) {
    RepetitionResult out;
    out.info.index = rep;
    const std::size_t J = c.method.ensemble_size;
    const std::size_t d = c.model.dim;
    const std::size_t T = c.total_steps;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();

    RandomStream truth_rng(stream_seed(c, rep, StreamRole::truth));
    RandomStream obs_rng(stream_seed(c, rep, StreamRole::obs_noise));
    RandomStream shock_rng(stream_seed(c, rep, StreamRole::shocks));
    RandomStream init_rng(stream_seed(c, rep, StreamRole::initial_ensemble));
    RandomStream filter_rng(filter_seed(c, rep));

    StateVector truth = init_true_state(truth_rng, c.model);
    Ensemble ens(J, d);
    init_rng.fill_normal(ens.data());

    EnSFConfig ensf_cfg = c.method.ensf;
    ensf_cfg.ensemble_size = J;
    ensf_cfg.threads = threads;
    letkf::LETKFConfig letkf_cfg = c.method.letkf;
    letkf_cfg.threads = threads;
    letkf::Diagnostics diag;

    Digest truth_digest, obs_digest;
    truth_digest.update(truth);
    Rk4Workspace ws;
    bool alive = true;

    auto snapshot = [&](std::size_t t) {
        if (c.snapshot_stride == 0 || t % c.snapshot_stride != 0) return;
        out.snapshots.push_back({rep, t, truth, alive ? ensemble_mean(ens) : StateVector(d, nan)});
    };

    out.rows.reserve(T + 1);
    out.rows.push_back(measure(c, rep, 0, RowKind::prediction_only, ens, truth));
    snapshot(0);

    for (std::size_t t = 1; t <= T; ++t) {
        rk4_step(std::span<double>(truth), c.model, ws);
        const bool assimilate = t % c.steps_between == 0;
        bool shocked = false;
        StateVector y;
        if (assimilate) {
            if (c.shocks) {
                auto s = apply_shocks(truth, *c.shocks, shock_rng, c.model.clip_bound);
                if (s.any()) {
                    shocked = true;
                    truth = std::move(s.state);
                    out.info.shock_times.push_back(t);
                }
            }
            y = observe(truth, c.obs, obs_rng);
            obs_digest.update(y);
        }
        truth_digest.update(truth);

        const RowKind kind = assimilate ? RowKind::assimilation : RowKind::prediction_only;
        if (alive) {
            try {
                propagate(ens, c.model, 1, threads);
                if (assimilate) {
                    if (c.method.kind == MethodKind::ensf) {
                        add_prediction_noise(ens, ensf_cfg.prediction_noise, filter_rng);
                        ens = backward_sample(ens, y, c.obs, ensf_cfg, filter_rng);
                    } else {
                        ens = letkf::letkf_analysis(ens, y, c.obs, letkf_cfg, &diag);
                    }
                }
                if (!ens.all_finite()) throw NumericalError("non-finite analysis ensemble");
            } catch (const NumericalError& e) {
                alive = false;
                out.info.diverged = true;
                out.info.diverged_at = t;
                out.info.error = e.what();
            }
        }
        if (alive) {
            out.rows.push_back(measure(c, rep, t, kind, ens, truth));
        } else {
            out.rows.push_back({c.method.label, rep, t, kind, nan, nan, nan, false});
        }
        out.rows.back().shock = shocked;
        snapshot(t);
    }
    out.info.truth_digest = truth_digest.hex();
    out.info.observation_digest = obs_digest.hex();
    out.info.regularized_solves = diag.regularized_solves;
    return out;
}

}  // namespace detail

/// Runs all repetitions. Rows are ordered by (repetition, time_index).
/// Filter divergence ends that repetition's filter with NaN rows; the other
/// repetitions still run.
inline RunOutput run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::size_t R = cfg.repetitions;

    // Parallelize over repetitions when there are several, else within one.
    const unsigned outer = R > 1 ? cfg.threads : 1u;
    const unsigned inner = R > 1 ? 1u : cfg.threads;
    std::vector<detail::RepetitionResult> reps(R);
    parallel_for(R, outer, [&](std::size_t r) { reps[r] = detail::run_repetition(cfg, r, inner); });

    RunOutput out;
    out.config = cfg;
    out.meta.method = cfg.method.label;
    out.meta.config_digest = config_digest(cfg);
    out.meta.seed = cfg.seed;
    for (auto& r : reps) {
        out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
        out.snapshots.insert(out.snapshots.end(), r.snapshots.begin(), r.snapshots.end());
        out.meta.repetitions.push_back(std::move(r.info));
    }
    out.meta.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

/// Mean RMSE over assimilation rows (all, or the last 50 per repetition) and
/// over repetitions. NaN if any included row is NaN.
inline double aggregate_rmse(const std::vector<MetricsRecord>& rows, AggregationWindow window) {
    std::vector<std::vector<double>> per_rep;
    for (const auto& r : rows) {
        if (r.kind != RowKind::assimilation) continue;
        if (per_rep.size() <= r.repetition) per_rep.resize(r.repetition + 1);
        per_rep[r.repetition].push_back(r.rmse);
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : per_rep) {
        const std::size_t first = window == AggregationWindow::last_50 && v.size() > 50 ? v.size() - 50 : 0;
        for (std::size_t k = first; k < v.size(); ++k) {
            sum += v[k];
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

inline double aggregate_rmse(const RunOutput& run, AggregationWindow window) { return aggregate_rmse(run.rows, window); }

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepCell {
    std::size_t i1 = 0;
    std::size_t i2 = 0;
    double value1 = 0.0;
    double value2 = 0.0;
    double rmse = 0.0;
    bool divergent = false;
};

struct SweepResult {
    SweepConfig config;
    /// Row-major over (axis1, axis2).
    std::vector<SweepCell> cells;
    /// Indices into `cells` of the (up to) three lowest non-divergent aggregates.
    std::vector<std::size_t> best;
    std::string config_digest;
    double wall_seconds = 0.0;

    const SweepCell& at(std::size_t i1, std::size_t i2) const { return cells[i1 * config.axis2.values.size() + i2]; }
};

/// The exact experiment a sweep runs for cell (i1, i2).
inline ExperimentConfig cell_config(const SweepConfig& s, std::size_t i1, std::size_t i2) {
    ExperimentConfig c = s.base;
    set_parameter(c, s.axis1.name, s.axis1.values.at(i1));
    set_parameter(c, s.axis2.name, s.axis2.values.at(i2));
    c.cell = {i1, i2};
    return c;
}

/// Cells run in parallel with base.threads workers; each cell's seeds depend
/// only on its coordinates.
inline SweepResult run_sweep(const SweepConfig& s) {
    if (s.axis1.values.empty() || s.axis2.values.empty()) throw ValidationError({"sweep: grids must be non-empty"});
    const std::size_t n1 = s.axis1.values.size(), n2 = s.axis2.values.size();
    std::vector<ExperimentConfig> configs;
    std::vector<std::string> problems;
    for (std::size_t i1 = 0; i1 < n1; ++i1)
        for (std::size_t i2 = 0; i2 < n2; ++i2) {
            try {
                configs.push_back(cell_config(s, i1, i2));
                configs.back().threads = 1;
                for (auto& v : configs.back().violations())
                    problems.push_back("cell (" + std::to_string(i1) + ", " + std::to_string(i2) + "): " + v);
            } catch (const Error& e) {
                problems.push_back("cell (" + std::to_string(i1) + ", " + std::to_string(i2) + "): " + e.what());
            }
        }
    if (!problems.empty()) throw ValidationError(std::move(problems));

    const auto start = std::chrono::steady_clock::now();
    SweepResult out;
    out.config = s;
    out.config_digest = config_digest(s.base);
    out.cells.resize(n1 * n2);
    parallel_for(configs.size(), s.base.threads, [&](std::size_t k) {
        const double agg = aggregate_rmse(run_experiment(configs[k]), s.window);
        auto& cell = out.cells[k];
        cell.i1 = k / n2;
        cell.i2 = k % n2;
        cell.value1 = s.axis1.values[cell.i1];
        cell.value2 = s.axis2.values[cell.i2];
        cell.rmse = agg;
        cell.divergent = !std::isfinite(agg) || agg > s.divergence_cap;
    });

    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < out.cells.size(); ++k)
        if (!out.cells[k].divergent) order.push_back(k);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return out.cells[a].rmse < out.cells[b].rmse; });
    order.resize(std::min<std::size_t>(3, order.size()));
    out.best = std::move(order);
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

// ---------------------------------------------------------------------------
// Comparisons
// ---------------------------------------------------------------------------

/// Describes every field that differs between two configs outside the method.
inline std::vector<std::string> drift(const ExperimentConfig& a, const ExperimentConfig& b) {
    json ja = to_json(a), jb = to_json(b);
    ja.erase("method");
    jb.erase("method");
    ja["run"].erase("threads");
    jb["run"].erase("threads");
    std::vector<std::string> out;
    for (const auto& [section, value] : ja.items()) {
        if (!jb.contains(section)) {
            out.push_back(section + ": present in one entry only");
            continue;
        }
        if (value != jb[section]) out.push_back(section + ": differs between entries");
    }
    for (const auto& [section, _] : jb.items())
        if (!ja.contains(section)) out.push_back(section + ": present in one entry only");
    if (a.cell != b.cell) out.push_back("cell: differs between entries");
    return out;
}

/// Runs each config against the same truth and observations.
inline std::vector<RunOutput> run_compare(const std::vector<ExperimentConfig>& cfgs) {
    if (cfgs.empty()) throw ValidationError({"compare: no methods given"});
    std::vector<std::string> problems;
    for (std::size_t k = 1; k < cfgs.size(); ++k)
        for (auto& p : drift(cfgs[0], cfgs[k])) problems.push_back("methods[" + std::to_string(k) + "] " + p);
    if (!problems.empty()) throw ValidationError(std::move(problems));

    std::vector<RunOutput> out;
    out.reserve(cfgs.size());
    for (const auto& c : cfgs) out.push_back(run_experiment(c));
    return out;
}

// ---------------------------------------------------------------------------
// Timing
// ---------------------------------------------------------------------------

struct ScalingRow {
    std::string method;
    std::string axis;
    double value = 0.0;
    std::size_t dim = 0;
    std::size_t ensemble_size = 0;
    std::size_t batch_size = 0;
    std::size_t pseudo_steps = 0;
    std::size_t repetitions = 0;
    double mean_seconds = 0.0;
    double min_seconds = 0.0;
};

/// Wall time of one assimilation step (forecast over steps_between model
/// steps plus analysis), averaged over `repetitions` after one warm-up step.
/// Methods that lack the swept parameter are skipped.
inline std::vector<ScalingRow> run_scaling(const ScalingConfig& s) {
    if (!std::is_sorted(s.values.begin(), s.values.end())) throw ValidationError({"scaling.values: must be ascending"});
    std::vector<ScalingRow> rows;
    for (const auto& m : s.methods) {
        for (double value : s.values) {
            ExperimentConfig c = s.base;
            c.method = m;
            if (!parameter_applies(c, s.axis)) continue;
            set_parameter(c, s.axis, value);
            c.validate();

            RandomStream truth_rng(stream_seed(c, 0, StreamRole::truth));
            RandomStream obs_rng(stream_seed(c, 0, StreamRole::obs_noise));
            RandomStream init_rng(stream_seed(c, 0, StreamRole::initial_ensemble));
            StateVector truth = init_true_state(truth_rng, c.model);
            Rk4Workspace ws;
            for (std::size_t k = 0; k < c.steps_between; ++k) rk4_step(std::span<double>(truth), c.model, ws);
            const StateVector y = observe(truth, c.obs, obs_rng);
            Ensemble initial(c.method.ensemble_size, c.model.dim);
            init_rng.fill_normal(initial.data());

            EnSFConfig ensf_cfg = c.method.ensf;
            ensf_cfg.ensemble_size = c.method.ensemble_size;
            ensf_cfg.threads = c.threads;
            letkf::LETKFConfig letkf_cfg = c.method.letkf;
            letkf_cfg.threads = c.threads;

            auto one_step = [&](std::size_t r) {
                RandomStream rng(filter_seed(c, r));
                Ensemble ens = initial;
                const auto t0 = std::chrono::steady_clock::now();
                propagate(ens, c.model, c.steps_between, c.threads);
                if (c.method.kind == MethodKind::ensf) {
                    add_prediction_noise(ens, ensf_cfg.prediction_noise, rng);
                    ens = backward_sample(ens, y, c.obs, ensf_cfg, rng);
                } else {
                    ens = letkf::letkf_analysis(ens, y, c.obs, letkf_cfg);
                }
                return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            };

            one_step(s.repetitions);  // warm-up
            ScalingRow row;
            row.method = m.label;
            row.axis = s.axis;
            row.value = value;
            row.dim = c.model.dim;
            row.ensemble_size = c.method.ensemble_size;
            row.batch_size = c.method.kind == MethodKind::ensf ? c.method.ensf.batch_size : 0;
            row.pseudo_steps = c.method.kind == MethodKind::ensf ? c.method.ensf.schedule.steps() : 0;
            row.repetitions = s.repetitions;
            row.min_seconds = std::numeric_limits<double>::infinity();
            double total = 0.0;
            for (std::size_t r = 0; r < s.repetitions; ++r) {
                const double dt = one_step(r);
                total += dt;
                row.min_seconds = std::min(row.min_seconds, dt);
            }
            row.mean_seconds = total / static_cast<double>(s.repetitions);
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace ensf::harness
