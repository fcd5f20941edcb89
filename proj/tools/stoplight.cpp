#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stoplight/errors.hpp"
#include "stoplight/io.hpp"
#include "stoplight/scenario.hpp"

namespace sc = stoplight::scenario;
using sc::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct Options {
    std::string scenario_path;
    std::string preset;
    std::string out = "out";
    std::string axis;
    std::vector<double> values;
    std::size_t k_count = 0;
    double t_from = -1e300;
    std::string dir;
};

json load_document(const Options& o) {
    if (!o.scenario_path.empty() && !o.preset.empty())
        throw stoplight::ValidationError({"--scenario and --preset are mutually exclusive"});
    if (!o.preset.empty()) return json{{"preset", o.preset}};
    if (o.scenario_path.empty()) throw stoplight::ValidationError({"one of --scenario or --preset is required"});
    const std::string text = stoplight::io::read_file(o.scenario_path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw stoplight::ValidationError({o.scenario_path + ": not valid JSON (" + e.what() + ")"});
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_summary(const json& report) {
    const auto& f = report["fidelity"];
    std::printf("t_pass            %.6g\n", report["t_pass"].get<double>());
    std::printf("measured delay    %.6g t_pass\n", f["measured_delay_t_pass"].get<double>());
    std::printf("overlap           %.6g\n", f["overlap"].get<double>());
    std::printf("energy retained   %.6g\n", f["energy_retained"].get<double>());
    if (report["adiabaticity"].is_object())
        std::printf("adiabaticity M    %.6g\n", report["adiabaticity"]["metric"].get<double>());
    if (report["hold_motion"].contains("center_of_mass_velocity"))
        std::printf("hold velocity     %.6g\n", report["hold_motion"]["center_of_mass_velocity"].get<double>());
}

int run_simulate(const Options& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto scenario = sc::parse_scenario_json(load_document(o));
    const auto result = sc::simulate(scenario);
    sc::write_simulation(scenario, result, o.out, seconds_since(t0));
    print_summary(result.report);
    return 0;
}

int run_bands(const Options& o) {
    const auto scenario = sc::parse_scenario_json(load_document(o));
    sc::write_bands(scenario, o.out, o.k_count ? o.k_count : scenario.analysis.k_count);
    return 0;
}

int run_sweep(const Options& o, sc::SweepKind kind, const std::string& default_axis,
              const std::vector<double>& default_values) {
    const auto t0 = std::chrono::steady_clock::now();
    const json doc = load_document(o);
    const std::string axis = o.axis.empty() ? default_axis : o.axis;
    std::vector<double> values = o.values;
    if (values.empty()) values = default_values;
    const auto table = sc::run_sweep(doc, axis, values, kind);
    sc::write_sweep(table, o.out, doc, seconds_since(t0));
    std::size_t failed = 0;
    for (const auto& row : table.rows) failed += row.back().empty() ? 0 : 1;
    std::printf("%zu rows, %zu with errors\n", table.rows.size(), failed);
    return 0;
}

int run_analyze(const Options& o) {
    const std::string dir = o.dir.empty() ? o.out : o.dir;
    const auto rep = sc::analyze_directory(dir, o.t_from);
    std::printf("measured delay    %.6g\n", rep.measured_delay);
    std::printf("overlap           %.6g\n", rep.overlap);
    std::printf("energy retained   %.6g\n", rep.energy_retained);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamically tuned coupled-resonator waveguide simulator"};
    app.set_version_flag("--version", std::string(sc::kVersion));
    app.require_subcommand(1);
    Options o;

    auto add_input = [&](CLI::App* cmd) {
        cmd->add_option("--scenario", o.scenario_path, "Scenario JSON file");
        cmd->add_option("--preset", o.preset, "Built-in preset (minimal, paper_fig3, two_stage)");
        cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
    };

    auto* bands = app.add_subcommand("bands", "Band structure at the initial and hold plateaus");
    add_input(bands);
    bands->add_option("--k-count", o.k_count, "k-points on [0, pi/ell]");

    auto* vg = app.add_subcommand("vg-sweep", "Frozen-band group velocity over a parameter axis");
    add_input(vg);
    vg->add_option("--axis", o.axis, "Dotted scenario path or 'detuning' (default)");
    vg->add_option("--values", o.values, "Axis values (space or comma separated)")->delimiter(',');

    auto* sim = app.add_subcommand("simulate", "Reference transit, modulated run and analysis");
    add_input(sim);

    auto* ad = app.add_subcommand("adiabatic-sweep", "Full simulation over a parameter axis");
    add_input(ad);
    ad->add_option("--axis", o.axis, "Dotted scenario path (default protocol.stages.0.t_mod)");
    ad->add_option("--values", o.values, "Axis values (space or comma separated)")->delimiter(',');

    auto* an = app.add_subcommand("analyze", "Fidelity of an existing simulate output directory");
    an->add_option("--dir", o.dir, "Directory holding probes.csv and reference_probes.csv");
    an->add_option("--out", o.out, "Same as --dir");
    an->add_option("--from", o.t_from, "Ignore released samples before this time");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*bands) return run_bands(o);
        if (*vg) return run_sweep(o, sc::SweepKind::analytic, "detuning", {-10, -3, -1, -0.3, 0, 0.3, 1, 3, 10});
        if (*sim) return run_simulate(o);
        if (*ad) return run_sweep(o, sc::SweepKind::simulate, "protocol.stages.0.t_mod", {0.1, 0.3, 1, 3, 10});
        if (*an) return run_analyze(o);
    } catch (const stoplight::ValidationError& e) {
        for (const auto& p : e.problems()) std::fprintf(stderr, "validation error: %s\n", p.c_str());
        return kExitValidation;
    } catch (const stoplight::UnsupportedConfiguration& e) {
        std::fprintf(stderr, "unsupported: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
