#include "stoplight/cmt_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stoplight/errors.hpp"
#include "stoplight/io.hpp"

namespace stoplight::cmt {

namespace {

constexpr double kSourceCutoff = 6.1;  // exp(-6.1^2) < 1e-16

double resonance(const UnitCellSpec& cell, std::size_t cls) {
    return cls == 0 ? cell.omega_a : cell.side_cavities[cls - 1].omega_b;
}

double loss(const UnitCellSpec& cell, std::size_t cls) {
    return cls == 0 ? cell.gamma_a : cell.side_cavities[cls - 1].gamma_b;
}

std::vector<std::size_t> resolve_probe_cells(const LatticeSpec& lattice, const ProbeConfig& probes) {
    if (!probes.cells.empty()) return probes.cells;
    const std::size_t n = lattice.n_cells;
    std::vector<std::size_t> cells{0, n / 2, n - 1};
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    return cells;
}

StateVector to_lab_frame(const std::vector<cdouble>& in_frame, double t, const LatticeSpec& lattice,
                         double omega_ref) {
    StateVector s(t, lattice.n_cells, lattice.classes());
    const cdouble phase = std::polar(1.0, omega_ref * t);
    for (std::size_t i = 0; i < in_frame.size(); ++i) s.amplitudes[i] = in_frame[i] * phase;
    return s;
}

double plain_norm(const std::vector<cdouble>& x) {
    double acc = 0.0;
    for (const auto& v : x) acc += std::norm(v);
    return acc;
}

}  // namespace

void LatticeSpec::validate() const {
    std::vector<std::string> problems;
    try {
        cell.validate();
    } catch (const ValidationError& e) {
        problems = e.problems();
    }
    if (n_cells < 1) problems.push_back("lattice.n_cells: must be >= 1");
    if (boundary.kind == BoundaryKind::absorbing && !(boundary.rate > 0.0))
        problems.push_back("lattice.boundary.rate: absorbing termination needs a rate > 0");
    if (boundary.kind != BoundaryKind::absorbing && boundary.rate != 0.0)
        problems.push_back("lattice.boundary.rate: only meaningful for absorbing termination");
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

cdouble PulseSource::drive(double t, double omega_ref) const {
    const double u = (t - peak_time) / duration;
    if (std::abs(u) > kSourceCutoff) return {0.0, 0.0};
    const double env = std::exp(-u * u);
    // exp(i*carrier*(t - peak)) * exp(-i*omega_ref*t)
    const double phase = carrier * (t - peak_time) - omega_ref * t;
    return amplitude * env * cdouble(std::cos(phase), std::sin(phase));
}

bool PulseSource::active_in(double t0, double t1) const {
    const double lo = peak_time - kSourceCutoff * duration;
    const double hi = peak_time + kSourceCutoff * duration;
    return amplitude != cdouble(0.0, 0.0) && t1 >= lo && t0 <= hi;
}

double StateVector::norm() const { return plain_norm(amplitudes); }

double StateVector::cell_intensity(std::size_t cell) const {
    double acc = 0.0;
    for (std::size_t c = 0; c < classes; ++c) acc += std::norm(at(cell, c));
    return acc;
}

double stability_scale(const LatticeSpec& lattice, const schedule::ModulationSchedule& schedule,
                       std::span<const PulseSource> sources, double omega_ref) {
    const auto& cell = lattice.cell;
    double scale = std::abs(cell.alpha);
    double max_loss = cell.gamma_a;
    for (const auto& sc : cell.side_cavities) {
        scale = std::max(scale, std::abs(sc.beta));
        max_loss = std::max(max_loss, sc.gamma_b);
    }
    if (lattice.boundary.kind == BoundaryKind::absorbing) max_loss = std::max(max_loss, cell.gamma_a + lattice.boundary.rate);
    scale = std::max(scale, max_loss);

    std::vector<const Detunings*> plateaus{&schedule.initial()};
    for (const auto& seg : schedule.segments()) plateaus.push_back(&seg.end);
    for (const Detunings* d : plateaus) {
        for (std::size_t c = 0; c < cell.class_count(); ++c) {
            const double shift = c < d->size() ? (*d)[c] : 0.0;
            scale = std::max(scale, std::abs(resonance(cell, c) + shift - omega_ref));
            if (c > 0) {
                const double up = resonance(cell, c - 1) + ((c - 1) < d->size() ? (*d)[c - 1] : 0.0);
                scale = std::max(scale, std::abs(up - resonance(cell, c) - shift));
            }
        }
    }
    for (const auto& s : sources) scale = std::max(scale, std::abs(s.carrier - omega_ref));
    return scale;
}

double max_stable_dt(const LatticeSpec& lattice, const schedule::ModulationSchedule& schedule,
                     std::span<const PulseSource> sources, double omega_ref) {
    const double scale = stability_scale(lattice, schedule, sources, omega_ref);
    return scale > 0.0 ? kStabilityNumber / scale : std::numeric_limits<double>::infinity();
}

double default_dt(const LatticeSpec& lattice, const schedule::ModulationSchedule& schedule,
                  std::span<const PulseSource> sources, double omega_ref) {
    const double scale = stability_scale(lattice, schedule, sources, omega_ref);
    return scale > 0.0 ? kDefaultStepNumber / scale : 1e-2;
}

kernels::GeneratorCoefficients generator_coefficients(const LatticeSpec& lattice, const Detunings& detunings,
                                                      double omega_ref) {
    const auto& cell = lattice.cell;
    kernels::GeneratorCoefficients g;
    g.n_cells = lattice.n_cells;
    g.classes = cell.class_count();
    g.alpha = cell.alpha;
    g.freq.resize(g.classes);
    g.loss.resize(g.classes);
    for (std::size_t c = 0; c < g.classes; ++c) {
        g.freq[c] = shifted_resonance(cell, detunings, c) - omega_ref;
        g.loss[c] = loss(cell, c);
    }
    for (const auto& sc : cell.side_cavities) g.beta.push_back(sc.beta);
    g.boundary = lattice.boundary.kind;
    g.terminal_rate = lattice.boundary.kind == BoundaryKind::absorbing ? lattice.boundary.rate : 0.0;
    return g;
}

Eigen::SparseMatrix<cdouble> assemble_generator(const LatticeSpec& lattice, const Detunings& detunings,
                                                double omega_ref) {
    lattice.validate();
    const auto g = generator_coefficients(lattice, detunings, omega_ref);
    const std::size_t n = g.n_cells;
    const std::size_t m = g.classes;
    const cdouble I(0.0, 1.0);
    std::vector<Eigen::Triplet<cdouble>> entries;
    auto add = [&](std::size_t row, std::size_t col, cdouble v) {
        entries.emplace_back(static_cast<int>(row), static_cast<int>(col), v);
    };
    for (std::size_t cell = 0; cell < n; ++cell) {
        const std::size_t base = cell * m;
        for (std::size_t c = 0; c < m; ++c) add(base + c, base + c, I * g.freq[c] - g.loss[c]);
        if (g.boundary == BoundaryKind::absorbing && cell == n - 1) add(base, base, -g.terminal_rate);
        // waveguide neighbours; duplicates are summed, which covers small periodic rings
        if (g.boundary == BoundaryKind::periodic) {
            add(base, ((cell + n - 1) % n) * m, I * g.alpha);
            add(base, ((cell + 1) % n) * m, I * g.alpha);
        } else {
            if (cell > 0) add(base, (cell - 1) * m, I * g.alpha);
            if (cell + 1 < n) add(base, (cell + 1) * m, I * g.alpha);
        }
        for (std::size_t c = 1; c < m; ++c) {
            add(base + c - 1, base + c, I * g.beta[c - 1]);
            add(base + c, base + c - 1, I * g.beta[c - 1]);
        }
    }
    Eigen::SparseMatrix<cdouble> mat(static_cast<Eigen::Index>(n * m), static_cast<Eigen::Index>(n * m));
    mat.setFromTriplets(entries.begin(), entries.end());
    return mat;
}

IntegrationResult integrate_with_state(const LatticeSpec& lattice, const schedule::ModulationSchedule& schedule,
                                       std::span<const PulseSource> sources, double t_begin, double t_end,
                                       const ProbeConfig& probes, const IntegrationOptions& options) {
    lattice.validate();
    std::vector<std::string> problems;
    const std::size_t m = lattice.classes();
    if (schedule.class_count() != m) problems.push_back("schedule: class count does not match the cell");
    if (!(t_end > t_begin)) problems.push_back("integration: t_end must exceed t_begin");
    if (!(probes.sample_interval > 0.0)) problems.push_back("integration.sample_interval: must be > 0");
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const auto& s = sources[i];
        const std::string base = "sources[" + std::to_string(i) + "]";
        if (s.target_cell >= lattice.n_cells) problems.push_back(base + ".target_cell: outside the lattice");
        if (!(s.duration > 0.0)) problems.push_back(base + ".duration: must be > 0");
    }
    const auto probe_cells = resolve_probe_cells(lattice, probes);
    for (auto c : probe_cells)
        if (c >= lattice.n_cells) problems.push_back("probes: cell " + std::to_string(c) + " outside the lattice");
    if (options.initial && options.initial->amplitudes.size() != lattice.state_size())
        problems.push_back("integration.initial: state size does not match the lattice");
    if (!problems.empty()) throw ValidationError(std::move(problems));

    const double omega_ref = options.omega_ref ? *options.omega_ref : (sources.empty() ? 0.0 : sources.front().carrier);
    const double bound = max_stable_dt(lattice, schedule, sources, omega_ref);
    const double dt = options.dt ? *options.dt : default_dt(lattice, schedule, sources, omega_ref);
    if (!(dt > 0.0)) throw ValidationError({"integration.dt: must be > 0"});
    if (dt > bound * (1.0 + 1e-12))
        throw ValidationError({"integration.dt: " + io::fmt(dt) + " exceeds the stability bound " + io::fmt(bound)});

    const auto steps = static_cast<std::size_t>(std::ceil((t_end - t_begin) / dt - 1e-9));
    const std::size_t sample_every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(probes.sample_interval / dt)));
    std::vector<std::size_t> snap_steps;
    for (double ts : probes.snapshot_times) {
        const double pos = (ts - t_begin) / dt;
        if (pos < -0.5 || pos > static_cast<double>(steps) + 0.5)
            throw ValidationError({"probes.snapshot_times: " + io::fmt(ts) + " outside the integration window"});
        snap_steps.push_back(static_cast<std::size_t>(std::max(0LL, std::llround(pos))));
    }

    const Execution ex = options.execution
                             ? *options.execution
                             : (lattice.n_cells >= kParallelCellThreshold ? Execution::parallel : Execution::serial);

    const std::size_t size = lattice.state_size();
    std::vector<cdouble> x(size), k1(size), k2(size), k3(size), k4(size), tmp(size);
    if (options.initial) {
        const cdouble phase = std::polar(1.0, -omega_ref * t_begin);
        for (std::size_t i = 0; i < size; ++i) x[i] = options.initial->amplitudes[i] * phase;
    }

    auto coeffs = generator_coefficients(lattice, schedule.initial(), omega_ref);
    Detunings det(m);
    auto derivative = [&](double t, const std::vector<cdouble>& in, std::vector<cdouble>& out) {
        schedule.evaluate_into(t, det);
        for (std::size_t c = 0; c < m; ++c) coeffs.freq[c] = resonance(lattice.cell, c) + det[c] - omega_ref;
        kernels::apply_generator(ex, coeffs, in, out);
        for (const auto& s : sources) out[s.target_cell * m] += s.drive(t, omega_ref);
    };
    auto axpy = [&](const std::vector<cdouble>& a, double h, const std::vector<cdouble>& k, std::vector<cdouble>& o) {
        if (ex == Execution::parallel)
            kernels::axpy_parallel(a, h, k, o);
        else
            kernels::axpy_serial(a, h, k, o);
    };

    IntegrationResult result;
    auto& traj = result.trajectory;
    traj.probe_cells = probe_cells;
    traj.probes.resize(probe_cells.size());
    traj.dt = dt;
    traj.omega_ref = omega_ref;
    traj.sample_interval = static_cast<double>(sample_every) * dt;

    double last_norm = plain_norm(x);
    double last_record_t = t_begin;
    auto record = [&](double t) {
        const double nrm = plain_norm(x);
        if (!std::isfinite(nrm))
            throw RuntimeFailure("integration became non-finite at t = " + io::fmt(t));
        const bool driven = std::any_of(sources.begin(), sources.end(),
                                        [&](const PulseSource& s) { return s.active_in(last_record_t, t); });
        if (!driven && nrm > last_norm * (1.0 + 1e-6) + 1e-300)
            throw RuntimeFailure("norm grew from " + io::fmt(last_norm) + " to " + io::fmt(nrm) +
                                 " without an active source near t = " + io::fmt(t) + "; unstable step");
        last_norm = nrm;
        last_record_t = t;
        traj.times.push_back(t);
        for (std::size_t p = 0; p < probe_cells.size(); ++p) traj.probes[p].push_back(std::norm(x[probe_cells[p] * m]));
        traj.norm.push_back(nrm);
    };
    auto maybe_snapshot = [&](std::size_t step, double t) {
        for (std::size_t s = 0; s < snap_steps.size(); ++s)
            if (snap_steps[s] == step) traj.snapshots.push_back(to_lab_frame(x, t, lattice, omega_ref));
    };

    record(t_begin);
    maybe_snapshot(0, t_begin);
    for (std::size_t step = 1; step <= steps; ++step) {
        const double t0 = t_begin + static_cast<double>(step - 1) * dt;
        const double t1 = t_begin + static_cast<double>(step) * dt;
        const double half = t0 + 0.5 * dt;
        derivative(t0, x, k1);
        axpy(x, 0.5 * dt, k1, tmp);
        derivative(half, tmp, k2);
        axpy(x, 0.5 * dt, k2, tmp);
        derivative(half, tmp, k3);
        axpy(x, dt, k3, tmp);
        derivative(t1, tmp, k4);
        if (ex == Execution::parallel)
            kernels::rk4_combine_parallel(x, dt, k1, k2, k3, k4);
        else
            kernels::rk4_combine_serial(x, dt, k1, k2, k3, k4);
        if (step % sample_every == 0) record(t1);
        maybe_snapshot(step, t1);
    }
    std::stable_sort(traj.snapshots.begin(), traj.snapshots.end(),
                     [](const StateVector& a, const StateVector& b) { return a.t < b.t; });
    result.final_state = to_lab_frame(x, t_begin + static_cast<double>(steps) * dt, lattice, omega_ref);
    return result;
}

Trajectory integrate(const LatticeSpec& lattice, const schedule::ModulationSchedule& schedule,
                     std::span<const PulseSource> sources, double t_begin, double t_end, const ProbeConfig& probes,
                     const IntegrationOptions& options) {
    return integrate_with_state(lattice, schedule, sources, t_begin, t_end, probes, options).trajectory;
}

std::optional<double> peak_time(std::span<const double> times, std::span<const double> values) {
    if (values.size() < 2 || values.size() != times.size()) return std::nullopt;
    const auto it = std::max_element(values.begin(), values.end());
    if (*it <= 0.0) return std::nullopt;
    const auto j = static_cast<std::size_t>(it - values.begin());
    if (j + 1 == values.size()) return std::nullopt;
    if (j == 0) return times[0];
    const double ym = values[j - 1], y0 = values[j], yp = values[j + 1];
    const double denom = ym - 2.0 * y0 + yp;
    const double offset = denom != 0.0 ? 0.5 * (ym - yp) / denom : 0.0;
    const double h = times[j + 1] - times[j];
    return times[j] + offset * h;
}

TransitResult reference_transit(const LatticeSpec& lattice, std::span<const PulseSource> sources, double t_begin,
                                double t_end, const ProbeConfig& probes, const IntegrationOptions& options) {
    TransitResult out;
    LatticeSpec parked = lattice;
    if (!parked.cell.side_cavities.empty()) {
        const double beta = std::abs(parked.cell.side_cavities.front().beta);
        const double delta = parked.cell.omega_a - parked.cell.side_cavities.front().omega_b;
        if (delta > -0.5 * kParkRatio * beta) {
            const double shift = parked.cell.omega_a + kParkRatio * beta - parked.cell.side_cavities.front().omega_b;
            for (auto& sc : parked.cell.side_cavities) sc.omega_b += shift;
            out.reparked = true;
        }
    }
    ProbeConfig cfg = probes;
    if (cfg.cells.empty()) cfg.cells = resolve_probe_cells(parked, probes);
    const std::size_t last = parked.n_cells - 1;
    if (std::find(cfg.cells.begin(), cfg.cells.end(), 0) == cfg.cells.end()) cfg.cells.insert(cfg.cells.begin(), 0);
    if (std::find(cfg.cells.begin(), cfg.cells.end(), last) == cfg.cells.end()) cfg.cells.push_back(last);

    const schedule::ModulationSchedule flat(parked.classes());
    out.trajectory = integrate(parked, flat, sources, t_begin, t_end, cfg, options);
    const auto& tr = out.trajectory;
    const auto idx = [&](std::size_t cell) {
        return static_cast<std::size_t>(std::find(tr.probe_cells.begin(), tr.probe_cells.end(), cell) - tr.probe_cells.begin());
    };
    const auto first = peak_time(tr.times, tr.probes[idx(0)]);
    const auto final_peak = peak_time(tr.times, tr.probes[idx(last)]);
    if (!first || !final_peak)
        throw RuntimeFailure("reference transit: pulse peak not found at the " +
                             std::string(!first ? "first" : "last") + " cavity within the integration window");
    out.peak_first = *first;
    out.peak_last = *final_peak;
    out.t_pass = *final_peak - *first;
    out.t_pass_analytic = static_cast<double>(parked.n_cells) / (2.0 * std::abs(parked.cell.alpha));
    return out;
}

}  // namespace stoplight::cmt
