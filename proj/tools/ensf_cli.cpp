// Command-line front end for the twin-experiment harness.
//
//   ensf run|sweep|compare|scaling|validate-config --config FILE [options]
//
// Output goes to --out, else $ENSF_OUT_DIR, else ./ensf-out. Errors are
// printed to stderr as a JSON object and the exit code is nonzero.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <ensf/harness/config.hpp>
#include <ensf/harness/experiment.hpp>
#include <ensf/harness/output.hpp>

namespace fs = std::filesystem;
using namespace ensf::harness;

namespace {

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    std::optional<unsigned> threads;
    std::string format = "csv";
    bool plot = false;
};

fs::path output_dir(const Options& o) {
    if (!o.out.empty()) return o.out;
    if (const char* env = std::getenv("ENSF_OUT_DIR"); env && *env) return env;
    return "ensf-out";
}

void apply_overrides(ExperimentConfig& c, const Options& o) {
    if (o.seed) c.seed = *o.seed;
    if (o.reps) c.repetitions = *o.reps;
    if (o.threads) c.threads = *o.threads;
}

ConfigDocument load(const Options& o) {
    ConfigDocument doc = load_document(o.config);
    apply_overrides(doc.experiment, o);
    if (doc.sweep) apply_overrides(doc.sweep->base, o);
    if (doc.scaling) {
        apply_overrides(doc.scaling->base, o);
        if (o.reps) doc.scaling->repetitions = *o.reps;
    }
    doc.experiment.validate();
    return doc;
}

void write_run(const fs::path& dir, const std::vector<RunOutput>& runs, const Options& o) {
    std::vector<MetricsRecord> rows;
    json meta = json::array();
    for (const auto& r : runs) {
        rows.insert(rows.end(), r.rows.begin(), r.rows.end());
        meta.push_back(metadata_json(r));
    }
    const bool as_json = o.format == "json";
    write_text(dir / (as_json ? "metrics.json" : "metrics.csv"), metrics_text(rows, as_json));
    write_text(dir / "metadata.json", (runs.size() == 1 ? meta[0] : meta).dump(2) + "\n");
    for (const auto& r : runs)
        if (!r.snapshots.empty()) {
            std::ostringstream os;
            write_snapshots_csv(os, r);
            write_text(dir / ("snapshots-" + r.meta.method + ".csv"), os.str());
        }
    if (o.plot) write_text(dir / "rmse.svg", rmse_svg(rows));
}

int run_command(const std::string& cmd, const Options& o) {
    const ConfigDocument doc = load(o);
    const fs::path dir = output_dir(o);

    if (cmd == "validate-config") {
        json out = {{"valid", true}, {"config", to_json(doc.experiment)}};
        if (!doc.methods.empty()) {
            out["methods"] = json::array();
            for (const auto& m : doc.methods) out["methods"].push_back(to_json(m));
        }
        std::cout << out.dump(2) << '\n';
        return 0;
    }
    if (cmd == "run") {
        write_run(dir, {run_experiment(doc.experiment)}, o);
    } else if (cmd == "compare") {
        write_run(dir, run_compare(doc.compare_configs()), o);
    } else if (cmd == "sweep") {
        if (!doc.sweep) throw ValidationError({"sweep: section is missing"});
        const SweepResult s = run_sweep(*doc.sweep);
        write_text(dir / "sweep.json", sweep_json(s).dump(2) + "\n");
        if (o.format == "csv") {
            std::ostringstream os;
            write_sweep_csv(os, s);
            write_text(dir / "sweep.csv", os.str());
        }
        if (o.plot) write_text(dir / "sweep.svg", sweep_svg(s));
    } else if (cmd == "scaling") {
        if (!doc.scaling) throw ValidationError({"scaling: section is missing"});
        const auto rows = run_scaling(*doc.scaling);
        if (o.format == "json") {
            write_text(dir / "scaling.json", scaling_json(rows).dump(2) + "\n");
        } else {
            std::ostringstream os;
            write_scaling_csv(os, rows);
            write_text(dir / "scaling.csv", os.str());
        }
    }
    std::cout << json{{"status", "ok"}, {"command", cmd}, {"out", dir.string()}}.dump() << '\n';
    return 0;
}

int fail(const char* kind, const std::string& message, const std::vector<std::string>& violations = {}) {
    json err = {{"kind", kind}, {"message", message}};
    if (!violations.empty()) err["violations"] = violations;
    std::cerr << json{{"error", err}}.dump() << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ensemble score filter twin experiments"};
    app.require_subcommand(1);
    Options o;

    for (const char* name : {"run", "sweep", "compare", "scaling", "validate-config"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", o.config, "TOML or JSON config file")->required()->check(CLI::ExistingFile);
        if (std::string(name) == "validate-config") continue;
        sub->add_option("--out", o.out, "output directory (overrides ENSF_OUT_DIR)");
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--reps", o.reps, "repetitions")->check(CLI::PositiveNumber);
        sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--format", o.format, "metric series format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_flag("--plot", o.plot, "also write SVG plots");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        fail("usage-error", e.what());
        return 2;
    }

    try {
        return run_command(app.get_subcommands().front()->get_name(), o);
    } catch (const ValidationError& e) {
        return fail(e.kind(), e.what(), e.violations());
    } catch (const ensf::Error& e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception& e) {
        return fail("error", e.what());
    }
}
