#pragma once

// Serialization of run results: CSV metric series, JSON metadata and sweep
// grids, and optional SVG plots. Numbers are printed with a fixed format so
// identical runs give identical bytes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "experiment.hpp"

namespace ensf::harness {

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

/// JSON has no NaN; non-finite values become null.
inline json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline const char* kMetricsHeader = "method,repetition,time_index,kind,rmse,spread,crps,shock_flag";

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsRecord>& rows, bool header = true) {
    if (header) os << kMetricsHeader << '\n';
    for (const auto& r : rows)
        os << r.method << ',' << r.repetition << ',' << r.time_index << ',' << to_string(r.kind) << ','
           << format_number(r.rmse) << ',' << format_number(r.spread) << ',' << format_number(r.crps) << ','
           << (r.shock ? 1 : 0) << '\n';
}

inline json metrics_json(const std::vector<MetricsRecord>& rows) {
    json out = json::array();
    for (const auto& r : rows)
        out.push_back({{"method", r.method},
                       {"repetition", r.repetition},
                       {"time_index", r.time_index},
                       {"kind", to_string(r.kind)},
                       {"rmse", json_number(r.rmse)},
                       {"spread", json_number(r.spread)},
                       {"crps", json_number(r.crps)},
                       {"shock_flag", r.shock}});
    return out;
}

inline json metadata_json(const RunOutput& run) {
    json reps = json::array();
    for (const auto& r : run.meta.repetitions) {
        json j = {{"index", r.index},
                  {"truth_digest", r.truth_digest},
                  {"observation_digest", r.observation_digest},
                  {"shock_times", r.shock_times},
                  {"diverged", r.diverged}};
        if (r.diverged) {
            j["diverged_at"] = r.diverged_at;
            j["error"] = r.error;
        }
        if (run.config.method.kind == MethodKind::letkf) j["regularized_solves"] = r.regularized_solves;
        reps.push_back(std::move(j));
    }
    return {{"method", run.meta.method},
            {"version", run.meta.version},
            {"seed", run.meta.seed},
            {"config_digest", run.meta.config_digest},
            {"config", to_json(run.config)},
            {"repetitions", reps},
            {"wall_seconds", run.meta.wall_seconds}};
}

inline void write_snapshots_csv(std::ostream& os, const RunOutput& run) {
    os << "method,repetition,time_index,component,truth,estimate\n";
    for (const auto& s : run.snapshots)
        for (std::size_t i = 0; i < s.truth.size(); ++i)
            os << run.meta.method << ',' << s.repetition << ',' << s.time_index << ',' << i << ','
               << format_number(s.truth[i]) << ',' << format_number(s.estimate[i]) << '\n';
}

inline json sweep_json(const SweepResult& s) {
    const auto& c = s.config;
    json grid = json::array();
    for (std::size_t i1 = 0; i1 < c.axis1.values.size(); ++i1) {
        json row = json::array();
        for (std::size_t i2 = 0; i2 < c.axis2.values.size(); ++i2) row.push_back(json_number(s.at(i1, i2).rmse));
        grid.push_back(std::move(row));
    }
    json cells = json::array();
    for (const auto& cell : s.cells)
        cells.push_back({{c.axis1.name, cell.value1},
                         {c.axis2.name, cell.value2},
                         {"rmse", json_number(cell.rmse)},
                         {"divergent", cell.divergent}});
    json best = json::array();
    for (std::size_t k : s.best)
        best.push_back({{c.axis1.name, s.cells[k].value1},
                        {c.axis2.name, s.cells[k].value2},
                        {"rmse", json_number(s.cells[k].rmse)}});
    return {{"method", c.base.method.label},
            {"version", kVersion},
            {"seed", c.base.seed},
            {"config_digest", s.config_digest},
            {"config", to_json(c.base)},
            {"axis1", {{"name", c.axis1.name}, {"values", c.axis1.values}}},
            {"axis2", {{"name", c.axis2.name}, {"values", c.axis2.values}}},
            {"window", c.window == AggregationWindow::last_50 ? "last-50" : "all"},
            {"divergence_cap", c.divergence_cap},
            {"grid", grid},
            {"cells", cells},
            {"best", best},
            {"wall_seconds", s.wall_seconds}};
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& s) {
    os << s.config.axis1.name << ',' << s.config.axis2.name << ",rmse,divergent\n";
    for (const auto& c : s.cells)
        os << format_number(c.value1) << ',' << format_number(c.value2) << ',' << format_number(c.rmse) << ','
           << (c.divergent ? 1 : 0) << '\n';
}

inline void write_scaling_csv(std::ostream& os, const std::vector<ScalingRow>& rows) {
    os << "method,axis,value,dim,ensemble_size,batch_size,pseudo_steps,repetitions,mean_seconds,min_seconds\n";
    for (const auto& r : rows)
        os << r.method << ',' << r.axis << ',' << format_number(r.value) << ',' << r.dim << ',' << r.ensemble_size
           << ',' << r.batch_size << ',' << r.pseudo_steps << ',' << r.repetitions << ','
           << format_number(r.mean_seconds) << ',' << format_number(r.min_seconds) << '\n';
}

inline json scaling_json(const std::vector<ScalingRow>& rows) {
    json out = json::array();
    for (const auto& r : rows)
        out.push_back({{"method", r.method},
                       {"axis", r.axis},
                       {"value", r.value},
                       {"dim", r.dim},
                       {"ensemble_size", r.ensemble_size},
                       {"batch_size", r.batch_size},
                       {"pseudo_steps", r.pseudo_steps},
                       {"repetitions", r.repetitions},
                       {"mean_seconds", r.mean_seconds},
                       {"min_seconds", r.min_seconds}});
    return out;
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

/// Log-scale line plot of repetition-mean RMSE against time index, one line per method.
inline std::string rmse_svg(const std::vector<MetricsRecord>& rows) {
    std::map<std::string, std::map<std::size_t, std::pair<double, std::size_t>>> series;
    std::vector<std::string> order;
    for (const auto& r : rows) {
        if (!std::isfinite(r.rmse) || r.rmse <= 0.0) continue;
        if (!series.contains(r.method)) order.push_back(r.method);
        auto& acc = series[r.method][r.time_index];
        acc.first += r.rmse;
        acc.second += 1;
    }
    const double W = 720, H = 360, L = 60, R = 150, T = 20, B = 40;
    double tmax = 1, lo = 1e300, hi = -1e300;
    for (const auto& [_, s] : series)
        for (const auto& [t, acc] : s) {
            const double v = std::log10(acc.first / static_cast<double>(acc.second));
            tmax = std::max(tmax, static_cast<double>(t));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo)) {
        lo -= 1;
        hi += 1;
    }
    lo = std::floor(lo);
    hi = std::ceil(hi);
    auto px = [&](double t) { return L + (W - L - R) * t / tmax; };
    auto py = [&](double v) { return T + (H - T - B) * (hi - v) / (hi - lo); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (double e = lo; e <= hi; e += 1) {
        os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(e) << "\" y2=\"" << py(e)
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << py(e) + 4 << "\" text-anchor=\"end\">1e" << e << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">time index</text>\n";
    for (std::size_t k = 0; k < order.size(); ++k) {
        const char* col = colors[k % std::size(colors)];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.2\" points=\"";
        for (const auto& [t, acc] : series[order[k]])
            os << px(static_cast<double>(t)) << ',' << py(std::log10(acc.first / static_cast<double>(acc.second))) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 14 * (k + 1) << "\" fill=\"" << col << "\">" << order[k]
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

/// Heat map of a sweep grid; divergent cells are drawn grey.
inline std::string sweep_svg(const SweepResult& s) {
    const auto& c = s.config;
    const std::size_t n1 = c.axis1.values.size(), n2 = c.axis2.values.size();
    const double cell = 48, L = 90, T = 30;
    const double W = L + cell * static_cast<double>(n2) + 20, H = T + cell * static_cast<double>(n1) + 50;
    double lo = 1e300, hi = -1e300;
    for (const auto& x : s.cells)
        if (!x.divergent) {
            lo = std::min(lo, x.rmse);
            hi = std::max(hi, x.rmse);
        }
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i1 = 0; i1 < n1; ++i1) {
        os << "<text x=\"" << L - 6 << "\" y=\"" << T + cell * (static_cast<double>(i1) + 0.55)
           << "\" text-anchor=\"end\">" << format_number(c.axis1.values[i1]) << "</text>\n";
        for (std::size_t i2 = 0; i2 < n2; ++i2) {
            const auto& x = s.at(i1, i2);
            std::string fill = "#999";
            if (!x.divergent) {
                const double f = hi > lo ? (x.rmse - lo) / (hi - lo) : 0.0;
                char buf[8];
                std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(255 * f),
                              static_cast<int>(200 * (1 - f) + 40), static_cast<int>(255 * (1 - f)));
                fill = buf;
            }
            const double x0 = L + cell * static_cast<double>(i2), y0 = T + cell * static_cast<double>(i1);
            os << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << cell << "\" height=\"" << cell
               << "\" fill=\"" << fill << "\" stroke=\"white\"/>\n";
            os << "<text x=\"" << x0 + cell / 2 << "\" y=\"" << y0 + cell / 2 + 3 << "\" text-anchor=\"middle\">"
               << (x.divergent ? std::string("div") : format_number(std::round(x.rmse * 1000) / 1000)) << "</text>\n";
        }
    }
    for (std::size_t i2 = 0; i2 < n2; ++i2)
        os << "<text x=\"" << L + cell * (static_cast<double>(i2) + 0.5) << "\" y=\""
           << T + cell * static_cast<double>(n1) + 14 << "\" text-anchor=\"middle\">"
           << format_number(c.axis2.values[i2]) << "</text>\n";
    os << "<text x=\"" << L + cell * static_cast<double>(n2) / 2 << "\" y=\"" << H - 10
       << "\" text-anchor=\"middle\">" << c.axis2.name << "</text>\n";
    os << "<text x=\"10\" y=\"" << T - 10 << "\">" << c.axis1.name << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

inline std::string metrics_text(const std::vector<MetricsRecord>& rows, bool as_json) {
    if (as_json) return metrics_json(rows).dump(2) + "\n";
    std::ostringstream os;
    write_metrics_csv(os, rows);
    return os.str();
}

}  // namespace ensf::harness
