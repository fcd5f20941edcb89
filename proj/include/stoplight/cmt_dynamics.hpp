#pragma once

// Time-domain coupled-mode dynamics of an N-cell lattice under a modulation
// schedule.
//
// The state is integrated in a frame rotating at omega_ref: the stored
// amplitudes are x(t) * exp(-i*omega_ref*t). Intensities do not depend on the
// frame. Stepping is classical fixed-step RK4.

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "stoplight/cell.hpp"
#include "stoplight/kernels.hpp"
#include "stoplight/modulation.hpp"

namespace stoplight::cmt {

using kernels::BoundaryKind;
using kernels::Execution;

struct Boundary {
    BoundaryKind kind = BoundaryKind::closed;
    /// Extra decay of the last waveguide cavity (absorbing only).
    double rate = 0.0;

    static Boundary closed() { return {BoundaryKind::closed, 0.0}; }
    static Boundary periodic() { return {BoundaryKind::periodic, 0.0}; }
    static Boundary absorbing_terminal(double rate) { return {BoundaryKind::absorbing, rate}; }
};

struct LatticeSpec {
    UnitCellSpec cell;
    /// The integrator accepts N = 1 (isolated cell); scenarios require N >= 2.
    std::size_t n_cells = 2;
    Boundary boundary;

    std::size_t classes() const noexcept { return cell.class_count(); }
    std::size_t state_size() const noexcept { return n_cells * cell.class_count(); }
    void validate() const;
};

/// Gaussian drive on the waveguide cavity of `target_cell`:
///   s(t) = amplitude * exp(-(t - peak_time)^2 / duration^2) * exp(i*carrier*(t - peak_time))
/// (lab frame; the integrator multiplies by exp(-i*omega_ref*t)).
struct PulseSource {
    std::size_t target_cell = 0;
    double carrier = 0.0;
    double peak_time = 0.0;
    double duration = 1.0;
    cdouble amplitude{1.0, 0.0};

    cdouble drive(double t, double omega_ref) const;
    /// Envelope above 1e-16 of its peak somewhere in [t0, t1].
    bool active_in(double t0, double t1) const;
};

/// Cell-major amplitudes: amplitudes[n*classes + 0] is a_n, [n*classes + i] is b_{n,i}.
struct StateVector {
    double t = 0.0;
    std::size_t n_cells = 0;
    std::size_t classes = 1;
    std::vector<cdouble> amplitudes;

    StateVector() = default;
    StateVector(double time, std::size_t cells, std::size_t cls)
        : t(time), n_cells(cells), classes(cls), amplitudes(cells * cls) {}

    cdouble& at(std::size_t cell, std::size_t cls) { return amplitudes[cell * classes + cls]; }
    const cdouble& at(std::size_t cell, std::size_t cls) const { return amplitudes[cell * classes + cls]; }
    double norm() const;
    /// |a_n|^2 + sum_i |b_{n,i}|^2
    double cell_intensity(std::size_t cell) const;
};

struct ProbeConfig {
    /// Waveguide cavities recorded as |a_n|^2. Empty means first, middle, last.
    std::vector<std::size_t> cells;
    double sample_interval = 0.1;
    /// Snapshots are taken at the step nearest each requested time.
    std::vector<double> snapshot_times;
};

struct Trajectory {
    std::vector<std::size_t> probe_cells;
    std::vector<double> times;
    /// probes[p][s]: |a|^2 of probe_cells[p] at times[s].
    std::vector<std::vector<double>> probes;
    std::vector<double> norm;
    std::vector<StateVector> snapshots;
    double sample_interval = 0.0;
    double dt = 0.0;
    double omega_ref = 0.0;
};

struct IntegrationOptions {
    /// Step; unset selects default_dt().
    std::optional<double> dt;
    /// Rotating-frame reference; unset uses the first source's carrier (0 without sources).
    std::optional<double> omega_ref;
    /// Unset picks parallel for lattices of at least kParallelCellThreshold cells.
    std::optional<Execution> execution;
    /// Starting state (lab-frame amplitudes at t_begin); zero when unset.
    std::optional<StateVector> initial;
};

inline constexpr std::size_t kParallelCellThreshold = 4096;
/// Largest admissible dt is kStabilityNumber / stability_scale.
inline constexpr double kStabilityNumber = 0.1;
/// Default dt is kDefaultStepNumber / stability_scale.
inline constexpr double kDefaultStepNumber = 0.02;

/// max(|alpha|, |beta_i|, max|link detuning|, max loss incl. terminal,
///     max in-frame |omega_c + shift - omega_ref|, max |carrier - omega_ref|)
/// over the schedule's plateaus (ramps are monotone between them).
double stability_scale(const LatticeSpec& lattice, const schedule::ModulationSchedule& schedule,
                       std::span<const PulseSource> sources, double omega_ref);
double max_stable_dt(const LatticeSpec& lattice, const schedule::ModulationSchedule& schedule,
                     std::span<const PulseSource> sources, double omega_ref);
double default_dt(const LatticeSpec& lattice, const schedule::ModulationSchedule& schedule,
                  std::span<const PulseSource> sources, double omega_ref);

/// Instantaneous generator coefficients (in-frame) for the matrix-free kernels.
kernels::GeneratorCoefficients generator_coefficients(const LatticeSpec& lattice, const Detunings& detunings,
                                                      double omega_ref = 0.0);

/// Sparse matrix of the same generator: dx/dt = G x (without sources).
Eigen::SparseMatrix<cdouble> assemble_generator(const LatticeSpec& lattice, const Detunings& detunings,
                                                double omega_ref = 0.0);

/// Integrates from t_begin to t_end (the last step lands on or just past t_end).
/// Throws ValidationError for bad inputs or dt above the stability bound,
/// RuntimeFailure on non-finite amplitudes or norm growth while no source is active.
Trajectory integrate(const LatticeSpec& lattice, const schedule::ModulationSchedule& schedule,
                     std::span<const PulseSource> sources, double t_begin, double t_end,
                     const ProbeConfig& probes, const IntegrationOptions& options = {});

/// Final state is also handy for tests; this variant returns it alongside the trajectory.
struct IntegrationResult {
    Trajectory trajectory;
    StateVector final_state;
};
IntegrationResult integrate_with_state(const LatticeSpec& lattice, const schedule::ModulationSchedule& schedule,
                                       std::span<const PulseSource> sources, double t_begin, double t_end,
                                       const ProbeConfig& probes, const IntegrationOptions& options = {});

/// Side-cavity parking used by the reference run: Delta_park = -10*|beta_1|.
inline constexpr double kParkRatio = 10.0;

struct TransitResult {
    Trajectory trajectory;
    double t_pass = 0.0;
    /// N*ell / (2*alpha*ell): band-centre speed of the bare waveguide.
    double t_pass_analytic = 0.0;
    double peak_first = 0.0;
    double peak_last = 0.0;
    /// Side cavities had to be moved to reach the parking detuning.
    bool reparked = false;
};

/// Unmodulated run. If omega_A - omega_B1 > -kParkRatio/2*|beta_1| the whole
/// side chain is shifted up so that omega_A - omega_B1 = -kParkRatio*|beta_1|.
/// t_pass = (peak time of |a_last|^2) - (peak time of |a_0|^2), both refined by
/// parabolic interpolation. Throws RuntimeFailure if either peak is missing.
TransitResult reference_transit(const LatticeSpec& lattice, std::span<const PulseSource> sources,
                                double t_begin, double t_end, const ProbeConfig& probes,
                                const IntegrationOptions& options = {});

/// Parabolic-interpolated time of the global maximum of a uniformly sampled
/// series. Returns nullopt if the series is identically zero or the maximum
/// sits on the last sample (peak not reached).
std::optional<double> peak_time(std::span<const double> times, std::span<const double> values);

}  // namespace stoplight::cmt
