#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "stoplight/errors.hpp"
#include "stoplight/io.hpp"
#include "stoplight/kernels.hpp"
#include "stoplight/lattice_bands.hpp"
#include "stoplight/scenario.hpp"

namespace stoplight::scenario {

namespace {

constexpr double kSpeedOfLight = 299792458.0;

// Re-raises a module error with the owning stage in front, keeping its category.
template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        std::vector<std::string> problems;
        for (const auto& p : e.problems()) problems.push_back(std::string(stage) + ": " + p);
        throw ValidationError(std::move(problems));
    } catch (const UnsupportedConfiguration& e) {
        throw UnsupportedConfiguration(std::string(stage) + ": " + e.what());
    } catch (const Error& e) {
        throw RuntimeFailure(std::string(stage) + ": " + e.what());
    }
}

double transit_estimate(const cmt::LatticeSpec& lat) {
    return static_cast<double>(lat.n_cells) * lat.cell.ell / (2.0 * std::abs(lat.cell.alpha));
}

std::vector<cmt::PulseSource> make_sources(const Scenario& sc, double carrier_default, double tp) {
    std::vector<cmt::PulseSource> out;
    for (const auto& s : sc.sources)
        out.push_back({s.target_cell, s.carrier.value_or(carrier_default), s.peak_time * tp, s.duration,
                       cdouble(s.amplitude, 0.0)});
    return out;
}

schedule::Protocol make_protocol(const ProtocolScenario& p, std::size_t classes, double tp) {
    schedule::ProtocolSpec ps;
    ps.capture_start = p.capture_start * tp;
    ps.hold_duration = p.hold * tp;
    ps.profile = p.profile;
    ps.budget = p.budget;
    ps.stages = p.stages;
    for (auto& st : ps.stages) st.duration *= tp;
    return schedule::build_protocol(ps, classes);
}

cmt::IntegrationOptions options_of(const Scenario& sc) {
    cmt::IntegrationOptions opt;
    opt.dt = sc.integration.dt;
    opt.omega_ref = sc.integration.omega_ref;
    opt.execution = sc.integration.execution;
    return opt;
}

std::vector<std::size_t> probe_cells(const Scenario& sc) {
    const std::size_t n = sc.lattice.n_cells;
    std::vector<std::size_t> cells = sc.probes.cells;
    if (cells.empty()) cells = {0, n / 2, n - 1};
    if (std::find(cells.begin(), cells.end(), 0) == cells.end()) cells.insert(cells.begin(), 0);
    if (std::find(cells.begin(), cells.end(), n - 1) == cells.end()) cells.push_back(n - 1);
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    return cells;
}

std::size_t probe_index(const cmt::Trajectory& tr, std::size_t cell) {
    const auto it = std::find(tr.probe_cells.begin(), tr.probe_cells.end(), cell);
    return static_cast<std::size_t>(it - tr.probe_cells.begin());
}

bool uniform_loss(const UnitCellSpec& cell) {
    return std::all_of(cell.side_cavities.begin(), cell.side_cavities.end(),
                       [&](const SideCavity& s) { return s.gamma_b == cell.gamma_a; });
}

double link_detuning(const UnitCellSpec& cell, const Detunings& d, std::size_t link) {
    return shifted_resonance(cell, d, link - 1) - shifted_resonance(cell, d, link);
}

// 2 alpha ell prod_i (beta_i / Delta_i)^2 with the actual link detunings.
std::optional<double> chain_estimate(const UnitCellSpec& cell, const Detunings& d) {
    double v = 2.0 * cell.alpha * cell.ell;
    for (std::size_t i = 1; i <= cell.side_count(); ++i) {
        const double delta = link_detuning(cell, d, i);
        if (delta == 0.0) return std::nullopt;
        const double ratio = cell.side_cavities[i - 1].beta / delta;
        v *= ratio * ratio;
    }
    return v;
}

const cmt::StateVector* nearest_snapshot(const std::vector<cmt::StateVector>& snaps, double t) {
    const cmt::StateVector* best = nullptr;
    for (const auto& s : snaps)
        if (!best || std::abs(s.t - t) < std::abs(best->t - t)) best = &s;
    return best;
}

json bandwidth_json(const BandwidthSample& b, double tp) {
    return {{"t", b.t},
            {"t_over_t_pass", b.t / tp},
            {"spread", b.bandwidth.spread},
            {"mean", b.bandwidth.mean},
            {"ambiguous", b.bandwidth.ambiguous},
            {"group_velocity", b.group_velocity}};
}

std::string time_header(const Scenario& sc) { return "t [1/" + sc.units.rate_unit + "]"; }

std::string probes_csv(const Scenario& sc, const cmt::Trajectory& tr) {
    std::ostringstream os;
    os << time_header(sc);
    for (auto c : tr.probe_cells) os << ",|a_" << c << "|^2 [arb]";
    os << ",norm [arb]\n";
    for (std::size_t s = 0; s < tr.times.size(); ++s) {
        os << io::fmt(tr.times[s]);
        for (const auto& p : tr.probes) os << ',' << io::fmt(p[s]);
        os << ',' << io::fmt(tr.norm[s]) << '\n';
    }
    return os.str();
}

std::string snapshots_csv(const Scenario& sc, const cmt::Trajectory& tr) {
    std::ostringstream os;
    const std::size_t m = sc.lattice.classes();
    os << time_header(sc) << ",cell,|a|^2 [arb]";
    for (std::size_t c = 1; c < m; ++c) os << ",|b" << c << "|^2 [arb]";
    os << ",Re a [arb],Im a [arb]\n";
    for (const auto& s : tr.snapshots) {
        for (std::size_t n = 0; n < s.n_cells; ++n) {
            os << io::fmt(s.t) << ',' << n;
            for (std::size_t c = 0; c < m; ++c) os << ',' << io::fmt(std::norm(s.at(n, c)));
            os << ',' << io::fmt(s.at(n, 0).real()) << ',' << io::fmt(s.at(n, 0).imag()) << '\n';
        }
    }
    return os.str();
}

std::string kspectrum_csv(const Scenario& sc, const cmt::Trajectory& tr) {
    std::ostringstream os;
    os << time_header(sc) << ",k [1/ell],occupation [arb]\n";
    for (const auto& s : tr.snapshots) {
        const auto spec = analysis::k_spectrum(s, sc.lattice);
        for (std::size_t j = 0; j < spec.k.size(); ++j)
            os << io::fmt(s.t) << ',' << io::fmt(spec.k[j]) << ',' << io::fmt(spec.occupation[j]) << '\n';
    }
    return os.str();
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch == '\n' ? ' ' : ch;
    }
    return out + "\"";
}

json manifest(const std::string& command, const std::string& hash, const std::string& name, double wall_seconds,
              const std::map<std::string, std::string>& files) {
    json f = json::object();
    for (const auto& [file, sha] : files) f[file] = {{"sha256", sha}};
    return {{"tool", "stoplight"},
            {"version", kVersion},
            {"command", command},
            {"scenario_name", name},
            {"scenario_hash", hash},
            {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
            {"openmp_threads", kernels::max_threads()},
            {"wall_clock_seconds", wall_seconds},
            {"files", f}};
}

void write_manifest(const std::filesystem::path& out, const std::string& command, const std::string& hash,
                    const std::string& name, double wall_seconds, const std::map<std::string, std::string>& files) {
    io::write_file(out / "manifest.json", manifest(command, hash, name, wall_seconds, files).dump(2) + "\n");
}

// Splits one CSV line (no quoting needed for numeric files).
std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, ',')) out.push_back(cur);
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
};

Table read_csv(const std::filesystem::path& path) {
    std::istringstream is(io::read_file(path));
    Table t;
    std::string line;
    if (!std::getline(is, line)) throw ValidationError({path.string() + ": empty file"});
    t.header = split(line);
    t.columns.resize(t.header.size());
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != t.header.size())
            throw ValidationError({path.string() + ": row " + std::to_string(row) + " has " +
                                   std::to_string(cells.size()) + " fields, expected " +
                                   std::to_string(t.header.size())});
        for (std::size_t c = 0; c < cells.size(); ++c) {
            // strtod keeps subnormals that stod rejects as out of range.
            const char* begin = cells[c].c_str();
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin || *end != '\0' || !std::isfinite(v))
                throw ValidationError({path.string() + ": row " + std::to_string(row) + " column " +
                                       std::to_string(c + 1) + " is not a number"});
            t.columns[c].push_back(v);
        }
    }
    return t;
}

// Last intensity column sits just before "norm".
analysis::ProbeSeries last_cavity(const Table& t, const std::filesystem::path& path, double t_from) {
    if (t.header.size() < 3 || t.header.back().rfind("norm", 0) != 0)
        throw ValidationError({path.string() + ": expected columns t, |a_n|^2..., norm"});
    return analysis::probe_series(t.columns.front(), t.columns[t.columns.size() - 2], t_from);
}

}  // namespace

SimulationResult simulate(const Scenario& sc) {
    SimulationResult res;
    const auto& lat = sc.lattice;
    const auto& cell = lat.cell;
    const std::size_t classes = lat.classes();
    const Detunings zero = zero_detunings(cell);
    const double carrier = in_stage("source", [&] { return waveguide_band_center(cell, zero); });
    const auto opts = options_of(sc);

    cmt::ProbeConfig ref_probes;
    ref_probes.cells = probe_cells(sc);
    ref_probes.sample_interval = sc.integration.sample_interval;
    double max_peak = 0.0;
    for (const auto& s : sc.sources) max_peak = std::max(max_peak, s.peak_time);
    const double ref_span = std::min(sc.integration.t_end, max_peak + 3.0);

    // First pass measures t_pass on the estimated timeline, second pass re-runs
    // the reference on the timeline expressed in the measured t_pass.
    res.t_pass_estimate = transit_estimate(lat);
    const auto first = in_stage("reference_transit", [&] {
        auto src = make_sources(sc, carrier, res.t_pass_estimate);
        return cmt::reference_transit(lat, src, 0.0, ref_span * res.t_pass_estimate, ref_probes, opts);
    });
    const double tp = first.t_pass;
    if (!(tp > 0.0))
        throw RuntimeFailure("reference_transit: measured transit time " + io::fmt(tp) + " is not positive");
    res.sources = make_sources(sc, carrier, tp);
    res.reference = in_stage("reference_transit", [&] {
        return cmt::reference_transit(lat, res.sources, 0.0, ref_span * tp, ref_probes, opts);
    });

    schedule::ModulationSchedule sched(classes);
    if (sc.protocol) {
        res.protocol = in_stage("protocol", [&] { return make_protocol(*sc.protocol, classes, tp); });
        sched = res.protocol->schedule;
        if (res.protocol->timing.release_end > sc.integration.t_end * tp)
            throw ValidationError({"integration.t_end: ends before the release window (" +
                                   io::fmt(res.protocol->timing.release_end / tp) + " t_pass)"});
        res.adiabaticity = in_stage("adiabaticity", [&] { return schedule::adiabaticity_metric(sched, cell); });
    }

    cmt::ProbeConfig probes = ref_probes;
    for (double t : sc.probes.snapshot_times) probes.snapshot_times.push_back(t * tp);
    res.trajectory = in_stage("integrate", [&] {
        return cmt::integrate(lat, sched, res.sources, 0.0, sc.integration.t_end * tp, probes, opts);
    });
    const auto& tr = res.trajectory;
    const auto& ref = res.reference.trajectory;

    // Fidelity: last-cavity intensity inside the gate around the expected arrival.
    // A protocol that never shifts anything commands no delay.
    const bool modulated = res.protocol && sched.max_abs_shift() > 0.0;
    const double commanded = modulated ? res.protocol->timing.commanded_delay : 0.0;
    const double expected = res.reference.peak_last + commanded;
    double gate_begin = expected - sc.analysis.release_gate * tp;
    const double gate_end = expected + sc.analysis.release_gate * tp;
    if (modulated) {
        const auto& segs = res.protocol->schedule.segments();
        gate_begin = std::max(gate_begin, segs[segs.size() / 2].support_begin());
    }
    const std::size_t last = probe_index(tr, lat.n_cells - 1);
    std::vector<double> gt, gv;
    for (std::size_t s = 0; s < tr.times.size(); ++s) {
        if (tr.times[s] < gate_begin || tr.times[s] > gate_end) continue;
        gt.push_back(tr.times[s]);
        gv.push_back(tr.probes[last][s]);
    }
    if (gt.size() < 3)
        throw ValidationError({"integration.t_end: the release gate [" + io::fmt(gate_begin / tp) + ", " +
                               io::fmt(gate_end / tp) + "] t_pass is not covered by the run"});
    res.released = analysis::probe_series(gt, gv);
    const auto reference_series = analysis::probe_series(ref.times, ref.probes[probe_index(ref, lat.n_cells - 1)]);
    const double m_used = res.adiabaticity ? res.adiabaticity->metric : 0.0;
    res.fidelity = in_stage("fidelity_report", [&] {
        return analysis::fidelity_report(res.released, reference_series, m_used);
    });
    res.fidelity_score = res.fidelity.overlap * std::min(1.0, res.fidelity.energy_retained);

    // Hold motion.
    std::optional<std::array<double, 2>> window = sc.analysis.hold_window;
    if (!window && res.protocol)
        window = std::array<double, 2>{res.protocol->timing.capture_end / tp, res.protocol->timing.release_start / tp};
    std::string hold_note;
    if (window) {
        try {
            res.hold_motion = analysis::center_of_mass_velocity(tr.snapshots, (*window)[0] * tp - 1e-9,
                                                                (*window)[1] * tp + 1e-9, cell.ell);
        } catch (const DomainError& e) {
            hold_note = e.what();
        }
    }

    // Bandwidth tracking is defined for the two-band lattice.
    std::string bandwidth_note;
    if (cell.side_count() == 1 && !tr.snapshots.empty()) {
        const double t_init = sc.analysis.bandwidth_initial_time.value_or(
                                  sc.protocol ? sc.protocol->capture_start : sc.probes.snapshot_times.front()) *
                              tp;
        const double t_hold =
            sc.analysis.bandwidth_hold_time ? *sc.analysis.bandwidth_hold_time * tp
            : window                        ? 0.5 * ((*window)[0] + (*window)[1]) * tp
                                            : t_init;
        auto sample = [&](double t) {
            const auto* snap = nearest_snapshot(tr.snapshots, t);
            BandwidthSample b;
            b.t = snap->t;
            const Detunings d = sched.evaluate(snap->t);
            b.bandwidth = analysis::instantaneous_bandwidth(*snap, lat, d);
            b.group_velocity = bands::group_velocity_center(cell, waveguide_detuning(cell, d), cell.gamma_a,
                                                            cell.side_cavities[0].gamma_b);
            return b;
        };
        res.bandwidth_initial = in_stage("instantaneous_bandwidth", [&] { return sample(t_init); });
        res.bandwidth_hold = in_stage("instantaneous_bandwidth", [&] { return sample(t_hold); });
        const Detunings hold_plateau =
            res.protocol ? res.protocol->schedule.segments()[sc.protocol->stages.size() - 1].end : zero;
        const double static_width = analysis::band_full_width(cell, hold_plateau, 0, sc.analysis.k_count);
        res.delay_bandwidth =
            analysis::delay_bandwidth_check(res.fidelity, res.bandwidth_initial->bandwidth.spread, static_width, commanded);
    } else if (cell.side_count() != 1) {
        bandwidth_note = "band tracking implemented for one side cavity only";
    } else {
        bandwidth_note = "no snapshots";
    }

    // Report.
    json r;
    r["scenario_name"] = sc.name;
    r["scenario_hash"] = sc.hash;
    r["version"] = kVersion;
    r["units"] = {{"time", "1/" + sc.units.rate_unit}, {"length", "ell"}};
    r["dt"] = tr.dt;
    r["omega_ref"] = tr.omega_ref;
    r["carrier"] = res.sources.empty() ? json(nullptr) : json(res.sources.front().carrier);
    r["t_pass"] = tp;
    r["t_pass_first_estimate"] = res.t_pass_estimate;
    r["t_pass_check"] = res.reference.t_pass;
    r["t_pass_analytic"] = res.reference.t_pass_analytic;
    r["reference_reparked"] = res.reference.reparked;
    r["reference_peak_first"] = res.reference.peak_first;
    r["reference_peak_last"] = res.reference.peak_last;
    if (res.protocol) {
        const auto& tm = res.protocol->timing;
        r["timeline"] = {{"capture_start", tm.capture_start},   {"capture_end", tm.capture_end},
                         {"release_start", tm.release_start},   {"release_end", tm.release_end},
                         {"commanded_delay", tm.commanded_delay}, {"commanded_delay_t_pass", tm.commanded_delay / tp}};
        const auto& a = *res.adiabaticity;
        r["adiabaticity"] = {{"metric", a.metric},           {"max_rate", a.max_rate}, {"rate_at_max", a.rate_at_max},
                             {"gap_at_max", a.gap_at_max}, {"t_at_max", a.t_at_max}, {"flagged", a.flagged},
                             {"flag_threshold", schedule::kAdiabaticityFlagThreshold}};
        r["max_abs_shift"] = sched.max_abs_shift();
    } else {
        r["timeline"] = nullptr;
        r["adiabaticity"] = nullptr;
    }
    const auto& f = res.fidelity;
    r["fidelity"] = {{"measured_delay", f.measured_delay},
                     {"measured_delay_t_pass", f.measured_delay / tp},
                     {"overlap", f.overlap},
                     {"l2_shape_error", f.l2_shape_error},
                     {"energy_retained", f.energy_retained},
                     {"adiabaticity_metric_used", f.adiabaticity_metric_used},
                     {"gate", {gate_begin, gate_end}}};
    r["fidelity_score"] = res.fidelity_score;
    if (res.hold_motion) {
        const auto& h = *res.hold_motion;
        r["hold_motion"] = {{"center_of_mass_velocity", h.velocity},
                            {"snapshots_used", h.snapshots_used},
                            {"touches_boundary", h.touches_boundary},
                            {"window_t_pass", *window}};
    } else {
        r["hold_motion"] = {{"unavailable", hold_note.empty() ? "no hold window" : hold_note}};
    }
    if (res.bandwidth_initial) {
        const auto& bi = *res.bandwidth_initial;
        const auto& bh = *res.bandwidth_hold;
        const double ratio = bh.bandwidth.spread / bi.bandwidth.spread;
        const double v_ratio = bh.group_velocity / bi.group_velocity;
        r["bandwidth"] = {{"initial", bandwidth_json(bi, tp)},
                          {"hold", bandwidth_json(bh, tp)},
                          {"ratio", ratio},
                          {"group_velocity_ratio", v_ratio},
                          {"relative_mismatch", std::abs(ratio / v_ratio - 1.0)}};
        const auto& db = *res.delay_bandwidth;
        r["delay_bandwidth"] = {{"input_bandwidth", db.input_bandwidth},
                                {"static_hold_bandwidth", db.static_hold_bandwidth},
                                {"measured_delay", db.measured_delay},
                                {"commanded_delay", db.commanded_delay},
                                {"input_exceeds_static", db.input_exceeds_static},
                                {"delay_meets_command", db.delay_meets_command},
                                {"regime", db.regime}};
    } else {
        r["bandwidth"] = {{"unavailable", bandwidth_note}};
        r["delay_bandwidth"] = nullptr;
    }

    json vg = json::object();
    if (cell.side_count() >= 1) {
        const Detunings hold_plateau = res.protocol ? sched.segments()[sc.protocol->stages.size() - 1].end : zero;
        if (cell.side_count() == 1) {
            vg["initial_closed_form"] = bands::group_velocity_center(cell, waveguide_detuning(cell, zero), cell.gamma_a,
                                                                     cell.side_cavities[0].gamma_b);
            vg["hold_closed_form"] = bands::group_velocity_center(cell, waveguide_detuning(cell, hold_plateau),
                                                                  cell.gamma_a, cell.side_cavities[0].gamma_b);
        }
        if (auto est = chain_estimate(cell, hold_plateau)) vg["hold_chain_estimate"] = *est;
        json links = json::array();
        for (std::size_t i = 1; i <= cell.side_count(); ++i) links.push_back(link_detuning(cell, hold_plateau, i));
        vg["hold_link_detunings"] = links;
        if (sc.protocol && sc.protocol->budget) {
            // Full budget on both cavities of a link, opposite signs.
            const double delta = 2.0 * *sc.protocol->budget;
            const auto ms = bands::multistage_min_vg(cell, delta);
            vg["multistage_min_vg"] = {{"delta", delta}, {"velocity", ms.velocity}, {"asymptotic_valid", ms.asymptotic_valid}};
        }
    }
    if (res.hold_motion) vg["hold_measured"] = res.hold_motion->velocity;
    r["group_velocity"] = vg;

    if (uniform_loss(cell) && cell.gamma_a > 0.0) {
        r["loss"] = {{"uniform_gamma", cell.gamma_a},
                     {"predicted_factor_measured_delay", std::exp(-2.0 * cell.gamma_a * f.measured_delay)},
                     {"predicted_factor_commanded_delay", std::exp(-2.0 * cell.gamma_a * commanded)}};
    } else {
        r["loss"] = {{"uniform_gamma", uniform_loss(cell) ? json(0.0) : json(nullptr)}};
    }

    if (sc.units.physical) {
        const double omega_a = 2.0 * std::numbers::pi * kSpeedOfLight / (sc.units.wavelength_um * 1e-6);
        const double rate = sc.units.rate_over_omega_a * omega_a;  // rad/s per unit
        const double metres_per_ell = sc.units.pitch_um * 1e-6 / cell.ell;
        json phys = {{"omega_a_rad_per_s", omega_a},
                     {"rate_unit_rad_per_s", rate},
                     {"pitch_m", sc.units.pitch_um * 1e-6},
                     {"t_pass_s", tp / rate}};
        auto to_mps = [&](double v) { return v * rate * metres_per_ell; };
        if (vg.contains("multistage_min_vg")) phys["multistage_min_vg_m_per_s"] = to_mps(vg["multistage_min_vg"]["velocity"]);
        if (vg.contains("hold_chain_estimate")) phys["hold_chain_estimate_m_per_s"] = to_mps(vg["hold_chain_estimate"]);
        if (res.hold_motion) phys["hold_measured_m_per_s"] = to_mps(res.hold_motion->velocity);
        r["physical"] = phys;
    }
    res.report = r;
    return res;
}

void write_simulation(const Scenario& sc, const SimulationResult& res, const std::filesystem::path& out,
                      double wall_seconds) {
    std::filesystem::create_directories(out);
    std::map<std::string, std::string> files;
    files["probes.csv"] = io::write_file(out / "probes.csv", probes_csv(sc, res.trajectory));
    files["reference_probes.csv"] = io::write_file(out / "reference_probes.csv", probes_csv(sc, res.reference.trajectory));
    files["snapshots.csv"] = io::write_file(out / "snapshots.csv", snapshots_csv(sc, res.trajectory));
    files["kspectrum.csv"] = io::write_file(out / "kspectrum.csv", kspectrum_csv(sc, res.trajectory));
    if (res.protocol) {
        std::ostringstream os;
        const double t_end = res.trajectory.times.empty() ? 0.0 : res.trajectory.times.back();
        schedule::write_schedule_csv(res.protocol->schedule, 0.0, t_end, 2001, os);
        files["schedule.csv"] = io::write_file(out / "schedule.csv", os.str());
    }
    files["report.json"] = io::write_file(out / "report.json", res.report.dump(2) + "\n");
    write_manifest(out, "simulate", sc.hash, sc.name, wall_seconds, files);
}

void write_bands(const Scenario& sc, const std::filesystem::path& out, std::size_t k_count) {
    const auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(out);
    std::map<std::string, std::string> files;
    const auto& cell = sc.lattice.cell;
    auto dump = [&](const Detunings& d, const std::string& name) {
        const auto bs = bands::band_structure(cell, d, k_count);
        std::ostringstream os;
        bands::write_bands_csv(bs, os);
        files[name] = io::write_file(out / name, os.str());
    };
    dump(zero_detunings(cell), "bands.csv");
    if (sc.protocol) {
        const auto p = make_protocol(*sc.protocol, sc.lattice.classes(), transit_estimate(sc.lattice));
        dump(p.schedule.segments()[sc.protocol->stages.size() - 1].end, "bands_hold.csv");
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(out, "bands", sc.hash, sc.name, wall, files);
}

SweepTable run_sweep(const json& document, const std::string& axis, const std::vector<double>& values,
                     SweepKind kind) {
    const Scenario base = parse_scenario_json(document);
    const json& merged = base.canonical;
    const bool virtual_detuning = axis == "detuning";

    // Resolve the axis to a JSON pointer.
    json::json_pointer ptr;
    bool integer_axis = false;
    if (virtual_detuning) {
        if (base.lattice.cell.side_count() == 0)
            throw ValidationError({"axis 'detuning': needs at least one side cavity"});
    } else {
        std::string pointer;
        std::istringstream is(axis);
        std::string part;
        while (std::getline(is, part, '.')) pointer += "/" + part;
        try {
            ptr = json::json_pointer(pointer);
            const json& target = merged.at(ptr);
            if (!target.is_number()) throw ValidationError({"axis '" + axis + "': not a numeric scenario field"});
            integer_axis = target.is_number_integer();
        } catch (const json::exception&) {
            throw ValidationError({"axis '" + axis + "': not a numeric scenario field"});
        }
    }

    SweepTable table;
    if (kind == SweepKind::analytic)
        table.header = {axis, "delta", "v_g_closed_form", "v_g_numeric", "multistage_min_vg", "min_band_gap", "error"};
    else
        table.header = {axis,         "v_g_hold",    "fidelity", "overlap", "energy_retained", "adiabaticity_M",
                        "delay_t_pass", "t_pass", "error"};
    table.rows.assign(values.size(), {});

    auto row_for = [&](double value) -> std::vector<std::string> {
        std::vector<std::string> row(table.header.size());
        row[0] = io::fmt(value);
        try {
            json doc = merged;
            if (virtual_detuning) {
                const double wa = doc["lattice"]["cell"].value("omega_a", 0.0);
                doc["lattice"]["cell"]["side_cavities"][0]["omega_b"] = wa - value;
            } else if (integer_axis && value == std::floor(value)) {
                doc[ptr] = static_cast<long long>(value);
            } else {
                doc[ptr] = value;
            }
            const Scenario sc = parse_scenario_json(doc);
            const auto& cell = sc.lattice.cell;
            const Detunings zero = zero_detunings(cell);
            if (kind == SweepKind::analytic) {
                const double delta = cell.side_count() ? waveguide_detuning(cell, zero) : 0.0;
                row[1] = io::fmt(delta);
                if (cell.side_count() == 1) {
                    row[2] = io::fmt(bands::group_velocity_center(cell, delta, cell.gamma_a, cell.side_cavities[0].gamma_b));
                    row[5] = io::fmt(bands::min_band_gap(cell, delta));
                }
                const auto bs = bands::band_structure(cell, zero, sc.analysis.k_count);
                row[3] = io::fmt(bands::group_velocity_numeric(bs, 0, 0.5 * std::numbers::pi / cell.ell).value);
                if (delta != 0.0 || cell.side_count() == 0) row[4] = io::fmt(bands::multistage_min_vg(cell, delta).velocity);
            } else {
                const auto res = simulate(sc);
                if (cell.side_count() == 1) {
                    const Detunings hold =
                        res.protocol ? res.protocol->schedule.segments()[sc.protocol->stages.size() - 1].end : zero;
                    row[1] = io::fmt(bands::group_velocity_center(cell, waveguide_detuning(cell, hold), cell.gamma_a,
                                                                  cell.side_cavities[0].gamma_b));
                }
                row[2] = io::fmt(res.fidelity_score);
                row[3] = io::fmt(res.fidelity.overlap);
                row[4] = io::fmt(res.fidelity.energy_retained);
                row[5] = res.adiabaticity ? io::fmt(res.adiabaticity->metric) : "";
                row[6] = io::fmt(res.fidelity.measured_delay / res.reference.t_pass);
                row[7] = io::fmt(res.reference.t_pass);
            }
        } catch (const std::exception& e) {
            for (std::size_t c = 1; c + 1 < row.size(); ++c) row[c].clear();
            if (kind == SweepKind::simulate) row[2] = io::fmt(0.0);
            std::string msg = e.what();
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            row.back() = msg;
        }
        return row;
    };

    const auto n = static_cast<long long>(values.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < n; ++i) table.rows[static_cast<std::size_t>(i)] = row_for(values[static_cast<std::size_t>(i)]);
    return table;
}

void write_sweep(const SweepTable& table, const std::filesystem::path& out, const json& document,
                 double wall_seconds) {
    std::filesystem::create_directories(out);
    std::ostringstream os;
    for (std::size_t c = 0; c < table.header.size(); ++c) os << (c ? "," : "") << csv_cell(table.header[c]);
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_cell(row[c]);
        os << '\n';
    }
    std::map<std::string, std::string> files;
    files["sweep.csv"] = io::write_file(out / "sweep.csv", os.str());
    const json merged = resolve_document(document);
    write_manifest(out, "sweep", io::sha256_hex(merged.dump()), merged.value("name", "scenario"), wall_seconds, files);
}

analysis::FidelityReport analyze_directory(const std::filesystem::path& dir, double t_from) {
    const auto probes_path = dir / "probes.csv";
    const auto ref_path = dir / "reference_probes.csv";
    for (const auto& p : {probes_path, ref_path})
        if (!std::filesystem::exists(p)) throw ValidationError({p.string() + ": missing"});
    const auto released = last_cavity(read_csv(probes_path), probes_path, t_from);
    const auto reference = last_cavity(read_csv(ref_path), ref_path, -1e300);
    const auto rep = analysis::fidelity_report(released, reference);
    const json j = {{"t_from", t_from},
                    {"measured_delay", rep.measured_delay},
                    {"overlap", rep.overlap},
                    {"l2_shape_error", rep.l2_shape_error},
                    {"energy_retained", rep.energy_retained}};
    io::write_file(dir / "analysis.json", j.dump(2) + "\n");
    return rep;
}

}  // namespace stoplight::scenario
