#pragma once

// Scenario files, presets and the composed runs behind the command line.
//
// A scenario is a JSON object. Timeline quantities (source peak, capture
// start, stage durations, hold, end time, snapshot times, analysis windows)
// are in units of the measured transit time t_pass; t_mod, pulse duration,
// dt and the sampling interval are absolute. The schema is documented in
// docs/scenario.md.

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stoplight/cmt_dynamics.hpp"
#include "stoplight/lattice_bands.hpp"
#include "stoplight/modulation.hpp"
#include "stoplight/pulse_analysis.hpp"

namespace stoplight::scenario {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

struct UnitsSpec {
    bool physical = false;
    /// Name of the frequency unit used in CSV headers ("beta" means 1/beta time units).
    std::string rate_unit = "beta";
    double wavelength_um = 1.55;
    double pitch_um = 10.0;
    /// Size of the rate unit as a fraction of omega_A (physical mode only).
    double rate_over_omega_a = 0.0;
};

struct SourceSpec {
    std::size_t target_cell = 0;
    /// Unset: centre (k = pi/2ell) frequency of the waveguide-like band at the initial detunings.
    std::optional<double> carrier;
    double peak_time = 0.8;  // t_pass
    double duration = 5.0;
    double amplitude = 1.0;
};

struct ProtocolScenario {
    double capture_start = 1.0;  // t_pass
    double hold = 4.5;           // t_pass
    /// Stage durations in t_pass; t_mod and swing absolute.
    std::vector<schedule::StageSpec> stages;
    schedule::EdgeProfile profile = schedule::EdgeProfile::gaussian;
    std::optional<double> budget;
};

struct IntegrationSpec {
    std::optional<double> dt;
    std::optional<double> omega_ref;
    double t_end = 8.0;  // t_pass
    double sample_interval = 0.1;
    std::optional<cmt::Execution> execution;
};

struct ProbeSpec {
    std::vector<std::size_t> cells;
    std::vector<double> snapshot_times;  // t_pass
};

struct AnalysisSpec {
    std::optional<std::array<double, 2>> hold_window;  // t_pass
    std::optional<double> bandwidth_initial_time;      // t_pass
    std::optional<double> bandwidth_hold_time;         // t_pass
    /// Half-width (t_pass) of the gate around the expected release arrival.
    double release_gate = 0.5;
    std::size_t k_count = bands::kDefaultKCount;
};

struct Scenario {
    std::string name;
    /// Preset merged with the user's overrides; the hash is computed over its dump.
    json canonical;
    std::string hash;
    UnitsSpec units;
    cmt::LatticeSpec lattice;
    std::vector<SourceSpec> sources;
    std::optional<ProtocolScenario> protocol;
    IntegrationSpec integration;
    ProbeSpec probes;
    AnalysisSpec analysis;
};

std::vector<std::string> preset_names();
/// Throws ValidationError for an unknown name.
json preset(std::string_view name);

/// Resolves "preset" (if any), merges the remaining keys over it, validates
/// everything and reports every problem at once (ValidationError).
Scenario parse_scenario(std::string_view text);
Scenario parse_scenario_json(const json& document);
/// Merged document before validation (preset + overrides).
json resolve_document(const json& document);

/// Frequency at k = pi/(2 ell) of the band whose eigenvector has the largest
/// waveguide-cavity weight.
double waveguide_band_center(const UnitCellSpec& cell, const Detunings& detunings);

struct BandwidthSample {
    double t = 0.0;
    analysis::Bandwidth bandwidth;
    double group_velocity = 0.0;
};

struct SimulationResult {
    cmt::TransitResult reference;
    double t_pass_estimate = 0.0;
    std::optional<schedule::Protocol> protocol;
    std::optional<schedule::AdiabaticityReport> adiabaticity;
    cmt::Trajectory trajectory;
    std::vector<cmt::PulseSource> sources;
    analysis::ProbeSeries released;
    analysis::FidelityReport fidelity;
    double fidelity_score = 0.0;
    std::optional<analysis::CenterOfMassFit> hold_motion;
    std::optional<BandwidthSample> bandwidth_initial;
    std::optional<BandwidthSample> bandwidth_hold;
    std::optional<analysis::DelayBandwidthCheck> delay_bandwidth;
    json report;
};

/// Reference transit (twice: once to measure t_pass, once on the final
/// timeline), modulated run, analysis. No file I/O. Module errors are
/// rethrown with the stage name prefixed.
SimulationResult simulate(const Scenario& scenario);

/// Writes probes.csv, reference_probes.csv, snapshots.csv, kspectrum.csv,
/// schedule.csv (when modulated), report.json and manifest.json.
void write_simulation(const Scenario& scenario, const SimulationResult& result, const std::filesystem::path& out,
                      double wall_seconds);

/// bands.csv at the initial plateau (and bands_hold.csv at the hold plateau
/// when a protocol is present) plus manifest.json.
void write_bands(const Scenario& scenario, const std::filesystem::path& out, std::size_t k_count);

enum class SweepKind {
    /// Frozen-band quantities only (no time integration).
    analytic,
    /// Full simulate() per row.
    simulate,
};

struct SweepTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// `axis` is a dotted path into the merged scenario document (array entries
/// by index, e.g. protocol.stages.0.t_mod) that must hold a number, or the
/// virtual axis "detuning" (sets omega_B1 = omega_A - value). Rows run in
/// parallel and are emitted in input order; a failing row records its error
/// instead of aborting the sweep.
SweepTable run_sweep(const json& document, const std::string& axis, const std::vector<double>& values,
                     SweepKind kind);
void write_sweep(const SweepTable& table, const std::filesystem::path& out, const json& document,
                 double wall_seconds);

/// Fidelity of an existing output directory: last-cavity column of
/// probes.csv against reference_probes.csv, windowed to t >= t_from.
/// Writes analysis.json.
analysis::FidelityReport analyze_directory(const std::filesystem::path& dir, double t_from);

}  // namespace stoplight::scenario
