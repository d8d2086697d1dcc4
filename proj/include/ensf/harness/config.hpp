#pragma once

// Experiment configuration: schema, defaults, loading and validation.
//
// TOML is the primary format; JSON with the same structure is accepted.
// Both are normalized to a JSON tree and read by one strict reader that
// rejects unknown keys and reports every violation at once.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "../core.hpp"
#include "../letkf.hpp"
#include "../lorenz96.hpp"
#include "../observation.hpp"
#include "../sampler.hpp"

namespace ensf::harness {

using json = nlohmann::ordered_json;

/// Malformed input: the file does not parse.
class ConfigError : public Error {
public:
    ConfigError(const std::string& msg, std::size_t line = 0, std::size_t column = 0)
        : Error(line ? "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg : msg),
          line_(line),
          column_(column) {}
    const char* kind() const noexcept override { return "parse-error"; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Well-formed input that violates the schema or an invariant.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}
    const char* kind() const noexcept override { return "validation-error"; }
    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "invalid configuration:";
        for (const auto& s : v) out += "\n  - " + s;
        return out;
    }
    std::vector<std::string> violations_;
};

enum class MethodKind { ensf, letkf };

inline std::string_view to_string(MethodKind k) { return k == MethodKind::ensf ? "ensf" : "letkf"; }

struct MethodConfig {
    MethodKind kind = MethodKind::ensf;
    std::string label = "EnSF";
    std::size_t ensemble_size = 20;
    EnSFConfig ensf;
    letkf::LETKFConfig letkf;
};

struct ExperimentConfig {
    Lorenz96Params model;
    ObservationModel obs;
    std::optional<ShockModel> shocks;
    MethodConfig method;
    std::size_t total_steps = 1500;
    std::size_t steps_between = 10;
    std::size_t repetitions = 10;
    std::uint64_t seed = 0;
    std::size_t snapshot_stride = 0;
    unsigned threads = 1;
    bool compute_crps = true;
    /// Extra seed coordinates for the filter stream (sweep cell indices).
    std::vector<std::uint64_t> cell;

    std::size_t assimilation_count() const { return steps_between ? total_steps / steps_between : 0; }

    /// Every violated invariant, empty if valid.
    std::vector<std::string> violations() const;
    void validate() const {
        if (auto v = violations(); !v.empty()) throw ValidationError(std::move(v));
    }
};

enum class AggregationWindow { all_assimilation, last_50 };

struct SweepAxis {
    std::string name;
    std::vector<double> values;
};

struct SweepConfig {
    ExperimentConfig base;
    SweepAxis axis1;
    SweepAxis axis2;
    AggregationWindow window = AggregationWindow::all_assimilation;
    /// Aggregates above this (or non-finite) are reported as divergent.
    double divergence_cap = 100.0;
};

struct ScalingConfig {
    ExperimentConfig base;
    std::vector<MethodConfig> methods;
    /// One of "dim", "ensemble_size", "pseudo_steps", "batch_size".
    std::string axis = "dim";
    std::vector<double> values;
    std::size_t repetitions = 20;
    /// Desk-scale cap on the dimension axis; raise explicitly for larger runs.
    std::size_t max_dim = 100000;
};

/// Everything one configuration file can describe.
struct ConfigDocument {
    ExperimentConfig experiment;
    /// From [[methods]]; compare runs one experiment per entry.
    std::vector<MethodConfig> methods;
    std::optional<SweepConfig> sweep;
    std::optional<ScalingConfig> scaling;

    std::vector<ExperimentConfig> compare_configs() const {
        std::vector<ExperimentConfig> out;
        for (const auto& m : methods.empty() ? std::vector<MethodConfig>{experiment.method} : methods) {
            ExperimentConfig c = experiment;
            c.method = m;
            out.push_back(std::move(c));
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Parameter access by name (sweeps and scaling)
// ---------------------------------------------------------------------------

inline bool parameter_applies(const ExperimentConfig& c, std::string_view name) {
    if (name == "sigma_obs" || name == "dim" || name == "ensemble_size") return true;
    if (c.method.kind == MethodKind::ensf)
        return name == "eps_alpha" || name == "eps_beta" || name == "pseudo_steps" || name == "batch_size";
    return name == "inflation" || name == "localization";
}

inline void set_parameter(ExperimentConfig& c, std::string_view name, double value) {
    if (!parameter_applies(c, name))
        throw InvalidConfiguration("parameter '" + std::string(name) + "' does not exist on method " +
                                   std::string(to_string(c.method.kind)));
    auto& e = c.method.ensf;
    auto count = [&] {
        if (!(value >= 1.0) || value != std::floor(value))
            throw InvalidConfiguration("parameter '" + std::string(name) + "' must be a positive integer");
        return static_cast<std::size_t>(value);
    };
    if (name == "sigma_obs") c.obs.sigma = value;
    else if (name == "dim") c.model.dim = count();
    else if (name == "ensemble_size") {
        c.method.ensemble_size = count();
        e.ensemble_size = c.method.ensemble_size;
    } else if (name == "eps_alpha") e.schedule = DiffusionSchedule(value, e.schedule.eps_beta(), e.schedule.steps());
    else if (name == "eps_beta") e.schedule = DiffusionSchedule(e.schedule.eps_alpha(), value, e.schedule.steps());
    else if (name == "pseudo_steps") e.schedule = DiffusionSchedule(e.schedule.eps_alpha(), e.schedule.eps_beta(), count());
    else if (name == "batch_size") e.batch_size = count();
    else if (name == "inflation") c.method.letkf.inflation = value;
    else if (name == "localization") c.method.letkf.localization = value;
}

inline std::vector<std::string> ExperimentConfig::violations() const {
    std::vector<std::string> v;
    auto check = [&](bool ok, std::string msg) {
        if (!ok) v.push_back(std::move(msg));
    };
    check(model.dim >= 4, "model.dim: must be >= 4");
    check(model.dt >= 0.0 && std::isfinite(model.dt), "model.dt: must be finite and >= 0");
    check(model.clip_bound > 0.0, "model.clip_bound: must be > 0");
    check(std::isfinite(model.forcing), "model.forcing: must be finite");
    check(obs.sigma > 0.0 && std::isfinite(obs.sigma), "observation.sigma: must be > 0");
    if (shocks)
        for (std::size_t k = 0; k < shocks->events.size(); ++k) {
            const auto& e = shocks->events[k];
            check(e.probability >= 0.0 && e.probability <= 1.0,
                  "shocks.events[" + std::to_string(k) + "].probability: must lie in [0, 1]");
            check(e.relative_size > 0.0, "shocks.events[" + std::to_string(k) + "].size: must be > 0");
        }
    check(steps_between >= 1, "run.steps_between_assimilation: must be >= 1");
    check(steps_between == 0 || total_steps % steps_between == 0,
          "run.total_steps: must be divisible by run.steps_between_assimilation");
    check(repetitions >= 1, "run.repetitions: must be >= 1");
    check(threads >= 1, "run.threads: must be >= 1");

    const auto& m = method;
    if (m.kind == MethodKind::ensf) {
        check(m.ensemble_size >= 1, "method.ensemble_size: must be >= 1");
        check(m.ensf.batch_size >= 1 && m.ensf.batch_size <= m.ensemble_size,
              "method.batch_size: must satisfy 1 <= batch_size <= ensemble_size");
        try {
            m.ensf.schedule.validate();
        } catch (const Error& e) {
            v.push_back(std::string("method: ") + e.what());
        }
        check(m.ensf.prediction_noise >= 0.0, "method.prediction_noise: must be >= 0");
    } else {
        check(m.ensemble_size >= 2, "method.ensemble_size: LETKF needs at least 2 members");
        check(m.letkf.inflation >= 0.0 && std::isfinite(m.letkf.inflation), "method.inflation: must be >= 0");
        check(m.letkf.localization >= 0.0 && std::isfinite(m.letkf.localization),
              "method.localization: must be >= 0");
    }
    return v;
}

// ---------------------------------------------------------------------------
// Strict reader over a JSON tree
// ---------------------------------------------------------------------------

namespace detail {

/// Walks a table, records every problem, and remembers which keys were read
/// so leftovers can be reported as unknown.
class TableReader {
public:
    TableReader(const json* node, std::string path, std::vector<std::string>& errors)
        : node_(node), path_(std::move(path)), errors_(errors) {
        if (node_ && !node_->is_object()) {
            errors_.push_back(path_ + ": expected a table");
            node_ = nullptr;
        }
    }

    bool present() const { return node_ != nullptr; }
    bool has(const std::string& key) const { return node_ && node_->contains(key); }
    std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* get(const std::string& key) {
        seen_.push_back(key);
        if (!node_) return nullptr;
        auto it = node_->find(key);
        return it == node_->end() ? nullptr : &*it;
    }

    template <class T>
    void read(const std::string& key, T& out, bool required = false) {
        const json* v = get(key);
        if (!v) {
            if (required) errors_.push_back(path(key) + ": required field is missing");
            return;
        }
        convert(*v, path(key), out);
    }

    void convert(const json& v, const std::string& p, double& out) {
        if (v.is_number()) out = v.get<double>();
        else errors_.push_back(p + ": expected a number");
    }
    void convert(const json& v, const std::string& p, bool& out) {
        if (v.is_boolean()) out = v.get<bool>();
        else errors_.push_back(p + ": expected a boolean");
    }
    void convert(const json& v, const std::string& p, std::string& out) {
        if (v.is_string()) out = v.get<std::string>();
        else errors_.push_back(p + ": expected a string");
    }
    void convert(const json& v, const std::string& p, std::size_t& out) {
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) out = v.get<std::size_t>();
        else errors_.push_back(p + ": expected a non-negative integer");
    }
    void convert(const json& v, const std::string& p, unsigned& out) {
        std::size_t tmp = out;
        convert(v, p, tmp);
        out = static_cast<unsigned>(tmp);
    }
    void convert(const json& v, const std::string& p, std::uint64_t& out, int) {
        if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)) out = v.get<std::uint64_t>();
        else errors_.push_back(p + ": expected a non-negative integer");
    }
    void convert(const json& v, const std::string& p, std::vector<double>& out) {
        if (!v.is_array() || v.empty()) {
            errors_.push_back(p + ": expected a non-empty array of numbers");
            return;
        }
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number()) {
                errors_.push_back(p + ": expected a non-empty array of numbers");
                return;
            }
            out.push_back(e.get<double>());
        }
    }

    void read_seed(const std::string& key, std::uint64_t& out) {
        if (const json* v = get(key)) convert(*v, path(key), out, 0);
    }

    /// Reports keys that were never read.
    void finish() {
        if (!node_) return;
        for (const auto& [key, _] : node_->items())
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
                errors_.push_back(path(key) + ": unknown field");
    }

    std::vector<std::string>& errors() { return errors_; }

private:
    const json* node_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::vector<std::string> seen_;
};

inline MethodConfig read_method(const json* node, const std::string& path, std::vector<std::string>& errors) {
    MethodConfig m;
    TableReader r(node, path, errors);
    std::string kind = "ensf";
    r.read("kind", kind);
    if (kind == "ensf") m.kind = MethodKind::ensf;
    else if (kind == "letkf") m.kind = MethodKind::letkf;
    else errors.push_back(r.path("kind") + ": must be \"ensf\" or \"letkf\"");
    m.label = m.kind == MethodKind::ensf ? "EnSF" : "LETKF";
    r.read("label", m.label);
    r.read("ensemble_size", m.ensemble_size);
    m.ensf.ensemble_size = m.ensemble_size;

    auto reject_foreign = [&](std::initializer_list<const char*> keys) {
        for (const char* k : keys)
            if (r.has(k)) {
                r.get(k);
                errors.push_back(r.path(k) + ": not a parameter of method \"" + kind + "\"");
            }
    };

    if (m.kind == MethodKind::ensf) {
        double eps_alpha = 0.5, eps_beta = 0.025;
        std::size_t steps = 500;
        r.read("eps_alpha", eps_alpha);
        r.read("eps_beta", eps_beta);
        r.read("pseudo_steps", steps);
        r.read("batch_size", m.ensf.batch_size);
        r.read("prediction_noise", m.ensf.prediction_noise);
        std::string policy = "redraw";
        r.read("batch_policy", policy);
        if (policy == "redraw") m.ensf.batch_policy = BatchPolicy::redraw;
        else if (policy == "anchored") m.ensf.batch_policy = BatchPolicy::anchored;
        else errors.push_back(r.path("batch_policy") + ": must be \"redraw\" or \"anchored\"");

        if (const json* h = r.get("damping")) {
            if (h->is_string()) {
                if (h->get<std::string>() != "one-minus-tau")
                    errors.push_back(r.path("damping") + ": unknown damping \"" + h->get<std::string>() + "\"");
            } else if (h->is_array()) {
                std::vector<std::pair<double, double>> knots;
                bool ok = true;
                for (const auto& k : *h) {
                    if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number()) {
                        ok = false;
                        break;
                    }
                    knots.emplace_back(k[0].get<double>(), k[1].get<double>());
                }
                if (!ok) errors.push_back(r.path("damping") + ": table entries must be [tau, h] pairs");
                else {
                    try {
                        m.ensf.damping = DampingFunction::table(std::move(knots));
                    } catch (const Error& e) {
                        errors.push_back(r.path("damping") + ": " + e.what());
                    }
                }
            } else {
                errors.push_back(r.path("damping") + ": expected \"one-minus-tau\" or a [tau, h] table");
            }
        }
        try {
            m.ensf.schedule = DiffusionSchedule(eps_alpha, eps_beta, steps);
        } catch (const Error& e) {
            errors.push_back(path + ": " + e.what());
        }
        reject_foreign({"inflation", "localization"});
    } else {
        r.read("inflation", m.letkf.inflation);
        r.read("localization", m.letkf.localization);
        reject_foreign({"eps_alpha", "eps_beta", "pseudo_steps", "batch_size", "prediction_noise", "batch_policy",
                        "damping"});
    }
    r.finish();
    return m;
}

inline SweepAxis read_axis(const json* node, const std::string& path, std::vector<std::string>& errors) {
    SweepAxis a;
    TableReader r(node, path, errors);
    if (!r.present()) {
        errors.push_back(path + ": required field is missing");
        return a;
    }
    r.read("name", a.name, true);
    r.read("values", a.values, true);
    r.finish();
    return a;
}

inline ConfigDocument read_document(const json& root) {
    std::vector<std::string> errors;
    ConfigDocument doc;
    ExperimentConfig& c = doc.experiment;
    TableReader top(&root, "", errors);

    {
        const json* node = top.get("model");
        if (!node) errors.push_back("model.dim: required field is missing");
        TableReader r(node, "model", errors);
        if (r.present()) r.read("dim", c.model.dim, true);
        r.read("forcing", c.model.forcing);
        r.read("dt", c.model.dt);
        r.read("damping_term", c.model.damping_term);
        r.read("clip_bound", c.model.clip_bound);
        r.finish();
    }
    {
        TableReader r(top.get("observation"), "observation", errors);
        std::string op = "arctan";
        r.read("operator", op);
        if (op == "arctan") c.obs.op = ObservationOperator::arctan;
        else if (op == "linear") c.obs.op = ObservationOperator::linear_identity;
        else errors.push_back("observation.operator: must be \"arctan\" or \"linear\"");
        r.read("sigma", c.obs.sigma);
        r.finish();
    }
    if (const json* node = top.get("shocks")) {
        TableReader r(node, "shocks", errors);
        ShockModel sm;
        std::string preset;
        r.read("preset", preset);
        if (!preset.empty()) {
            if (preset == "three-level") sm = ShockModel::three_level();
            else errors.push_back("shocks.preset: unknown preset \"" + preset + "\"");
        }
        if (const json* ev = r.get("events")) {
            if (!ev->is_array()) errors.push_back("shocks.events: expected an array of tables");
            else
                for (std::size_t k = 0; k < ev->size(); ++k) {
                    TableReader er(&(*ev)[k], "shocks.events[" + std::to_string(k) + "]", errors);
                    ShockEvent e;
                    er.read("probability", e.probability, true);
                    er.read("size", e.relative_size, true);
                    er.finish();
                    sm.events.push_back(e);
                }
        }
        r.finish();
        c.shocks = std::move(sm);
    }
    {
        TableReader r(top.get("run"), "run", errors);
        r.read("total_steps", c.total_steps);
        r.read("steps_between_assimilation", c.steps_between);
        r.read("repetitions", c.repetitions);
        r.read_seed("seed", c.seed);
        r.read("snapshot_stride", c.snapshot_stride);
        r.read("threads", c.threads);
        r.read("crps", c.compute_crps);
        r.finish();
    }
    c.method = read_method(top.get("method"), "method", errors);
    if (const json* ms = top.get("methods")) {
        if (!ms->is_array()) errors.push_back("methods: expected an array of tables");
        else
            for (std::size_t k = 0; k < ms->size(); ++k)
                doc.methods.push_back(read_method(&(*ms)[k], "methods[" + std::to_string(k) + "]", errors));
    }
    if (const json* node = top.get("sweep")) {
        TableReader r(node, "sweep", errors);
        SweepConfig s;
        s.axis1 = read_axis(r.get("axis1"), "sweep.axis1", errors);
        s.axis2 = read_axis(r.get("axis2"), "sweep.axis2", errors);
        std::string window = "all";
        r.read("window", window);
        if (window == "all") s.window = AggregationWindow::all_assimilation;
        else if (window == "last-50") s.window = AggregationWindow::last_50;
        else errors.push_back("sweep.window: must be \"all\" or \"last-50\"");
        r.read("divergence_cap", s.divergence_cap);
        r.finish();
        doc.sweep = std::move(s);
    }
    if (const json* node = top.get("scaling")) {
        TableReader r(node, "scaling", errors);
        ScalingConfig s;
        r.read("axis", s.axis);
        r.read("values", s.values, true);
        r.read("repetitions", s.repetitions);
        r.read("max_dim", s.max_dim);
        r.finish();
        if (s.axis != "dim" && s.axis != "ensemble_size" && s.axis != "pseudo_steps" && s.axis != "batch_size")
            errors.push_back("scaling.axis: must be one of dim, ensemble_size, pseudo_steps, batch_size");
        doc.scaling = std::move(s);
    }
    top.finish();

    // Invariants are only meaningful once the structure parsed cleanly.
    if (errors.empty()) {
        for (auto& v : c.violations()) errors.push_back(std::move(v));
        for (std::size_t k = 0; k < doc.methods.size(); ++k) {
            ExperimentConfig tmp = c;
            tmp.method = doc.methods[k];
            for (auto& v : tmp.violations())
                if (v.rfind("method", 0) == 0) errors.push_back("methods[" + std::to_string(k) + "]" + v.substr(6));
        }
        if (doc.sweep) {
            for (const auto* axis : {&doc.sweep->axis1, &doc.sweep->axis2})
                if (!parameter_applies(c, axis->name))
                    errors.push_back("sweep: parameter '" + axis->name + "' does not exist on method " +
                                     std::string(to_string(c.method.kind)));
        }
        if (doc.scaling) {
            auto& s = *doc.scaling;
            if (!std::is_sorted(s.values.begin(), s.values.end()))
                errors.push_back("scaling.values: must be ascending");
            if (s.repetitions < 1) errors.push_back("scaling.repetitions: must be >= 1");
            if (s.axis == "dim" && !s.values.empty() && s.values.back() > static_cast<double>(s.max_dim))
                errors.push_back("scaling.values: dimension exceeds scaling.max_dim (" + std::to_string(s.max_dim) +
                                 "); raise max_dim to run larger");
        }
    }
    if (!errors.empty()) throw ValidationError(std::move(errors));

    if (doc.sweep) doc.sweep->base = c;
    if (doc.scaling) {
        doc.scaling->base = c;
        doc.scaling->methods = doc.methods.empty() ? std::vector<MethodConfig>{c.method} : doc.methods;
    }
    return doc;
}

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace detail

enum class ConfigFormat { toml, json };

/// Parses a document to the normalized JSON tree.
inline json parse_tree(std::string_view text, ConfigFormat format) {
    if (format == ConfigFormat::json) {
        try {
            return json::parse(text);
        } catch (const json::parse_error& e) {
            const auto [line, col] = detail::line_column(text, e.byte ? e.byte - 1 : 0);
            throw ConfigError(e.what(), line, col);
        }
    }
    try {
        toml::table table = toml::parse(text);
        std::ostringstream os;
        os << toml::json_formatter{table};
        return json::parse(os.str());
    } catch (const toml::parse_error& e) {
        throw ConfigError(std::string(e.description()), e.source().begin.line, e.source().begin.column);
    }
}

inline ConfigDocument parse_document(std::string_view text, ConfigFormat format) {
    return detail::read_document(parse_tree(text, format));
}

inline ConfigFormat detect_format(const std::filesystem::path& path) {
    return path.extension() == ".json" ? ConfigFormat::json : ConfigFormat::toml;
}

inline ConfigDocument load_document(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_document(ss.str(), detect_format(path));
}

inline ExperimentConfig load_config(const std::filesystem::path& path) { return load_document(path).experiment; }

// ---------------------------------------------------------------------------
// Normalized JSON form (metadata, digests, validate-config output)
// ---------------------------------------------------------------------------

inline json to_json(const MethodConfig& m) {
    json j;
    j["kind"] = to_string(m.kind);
    j["label"] = m.label;
    j["ensemble_size"] = m.ensemble_size;
    if (m.kind == MethodKind::ensf) {
        j["batch_size"] = m.ensf.batch_size;
        j["eps_alpha"] = m.ensf.schedule.eps_alpha();
        j["eps_beta"] = m.ensf.schedule.eps_beta();
        j["pseudo_steps"] = m.ensf.schedule.steps();
        j["batch_policy"] = m.ensf.batch_policy == BatchPolicy::redraw ? "redraw" : "anchored";
        j["prediction_noise"] = m.ensf.prediction_noise;
        if (m.ensf.damping.is_default()) {
            j["damping"] = "one-minus-tau";
        } else {
            json t = json::array();
            for (const auto& [tau, h] : m.ensf.damping.knots()) t.push_back({tau, h});
            j["damping"] = t;
        }
    } else {
        j["inflation"] = m.letkf.inflation;
        j["localization"] = m.letkf.localization;
    }
    return j;
}

inline json to_json(const ExperimentConfig& c) {
    json j;
    j["model"] = {{"dim", c.model.dim},
                  {"forcing", c.model.forcing},
                  {"dt", c.model.dt},
                  {"damping_term", c.model.damping_term},
                  {"clip_bound", c.model.clip_bound}};
    j["observation"] = {{"operator", to_string(c.obs.op)}, {"sigma", c.obs.sigma}};
    if (c.shocks) {
        json ev = json::array();
        for (const auto& e : c.shocks->events) ev.push_back({{"probability", e.probability}, {"size", e.relative_size}});
        j["shocks"] = {{"events", ev}};
    }
    j["run"] = {{"total_steps", c.total_steps},
                {"steps_between_assimilation", c.steps_between},
                {"repetitions", c.repetitions},
                {"seed", c.seed},
                {"snapshot_stride", c.snapshot_stride},
                {"threads", c.threads},
                {"crps", c.compute_crps}};
    j["method"] = to_json(c.method);
    return j;
}

/// FNV-1a 64-bit, hex encoded.
inline std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Digest of the run-relevant configuration. Thread count is excluded since it
/// does not change results.
inline std::string config_digest(const ExperimentConfig& c) {
    json j = to_json(c);
    j["run"].erase("threads");
    return fnv1a_hex(j.dump());
}

}  // namespace ensf::harness
