#pragma once

// Post-processing of trajectories: stop-release fidelity, wavevector spectra,
// instantaneous bandwidth, centre-of-mass motion and delay-bandwidth accounting.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stoplight/cell.hpp"
#include "stoplight/cmt_dynamics.hpp"
#include "stoplight/kernels.hpp"

namespace stoplight::analysis {

/// Intensity samples on a uniform grid starting at t0.
struct ProbeSeries {
    double t0 = 0.0;
    double dt = 1.0;
    std::vector<double> values;

    double t_end() const { return t0 + dt * static_cast<double>(values.empty() ? 0 : values.size() - 1); }
    /// Linear interpolation, zero outside [t0, t_end].
    double at(double t) const;
};

/// Restricts a sampled probe to times >= t_from (uniform spacing assumed).
ProbeSeries probe_series(std::span<const double> times, std::span<const double> values, double t_from = -1e300);

struct FidelityReport {
    double measured_delay = 0.0;
    double overlap = 0.0;
    double l2_shape_error = 0.0;
    double energy_retained = 0.0;
    double adiabaticity_metric_used = 0.0;
};

/// Both series are resampled onto one grid (the finer spacing, spanning the
/// union of their ranges). The delay maximises
///   C(s) = sum_t released(t) reference(t - s) / (|released| |reference|)
/// with parabolic refinement around the best integer shift; overlap is C at
/// the refined shift (clamped to 1). l2_shape_error compares the unit-norm
/// released series with the unit-norm reference shifted by the delay.
/// Throws DomainError if either series carries no energy.
FidelityReport fidelity_report(const ProbeSeries& released, const ProbeSeries& reference,
                               double adiabaticity_metric = 0.0,
                               kernels::Execution execution = kernels::Execution::serial);

struct KSpectrum {
    /// Ascending in [-pi/ell, pi/ell).
    std::vector<double> k;
    /// Sum over cavity classes of |c_k|^2 with c_k = N^{-1/2} sum_n x_n exp(-i k n ell).
    std::vector<double> occupation;

    double total() const;
};

/// Discrete transform over the cell index of every cavity class (unitary
/// normalisation, so the occupations sum to the state norm).
KSpectrum k_spectrum(const cmt::StateVector& state, const cmt::LatticeSpec& lattice);

struct Bandwidth {
    double spread = 0.0;
    double mean = 0.0;
    /// Lowest two bands closer than the identification tolerance at some occupied k.
    bool ambiguous = false;
};

inline constexpr double kBandIdentificationTolerance = 1e-9;
/// Occupations below this fraction of the peak bin are ignored.
inline constexpr double kOccupationFloor = 1e-12;

/// Occupation-weighted mean and standard deviation of Re omega_0(k), the lowest
/// band at the given detunings. The lowest band is the one continuously
/// connected to the initial waveguide band for the protocols built here
/// (the anticrossing keeps it below the others), so sorting by real part is
/// enough; a near-degeneracy at an occupied k is flagged instead.
Bandwidth instantaneous_bandwidth(const cmt::StateVector& state, const cmt::LatticeSpec& lattice,
                                  const Detunings& detunings);

/// max_k Re omega_band - min_k Re omega_band over [0, pi/ell] (band 0 by default).
double band_full_width(const UnitCellSpec& cell, const Detunings& detunings, std::size_t band = 0,
                       std::size_t k_count = 1024);

struct CenterOfMassFit {
    double velocity = 0.0;
    std::size_t snapshots_used = 0;
    /// Some snapshot had more than kBoundaryFraction of its energy in an end cell.
    bool touches_boundary = false;
    std::vector<double> times;
    std::vector<double> positions;
};

inline constexpr double kBoundaryFraction = 1e-3;

/// Least-squares slope of the intensity-weighted mean cell position (all
/// cavity classes of a cell count) over snapshots with t in [t_begin, t_end].
/// Throws DomainError for fewer than three snapshots or an empty snapshot.
CenterOfMassFit center_of_mass_velocity(std::span<const cmt::StateVector> snapshots, double t_begin,
                                        double t_end, double ell = 1.0);

struct DelayBandwidthCheck {
    double input_bandwidth = 0.0;
    double static_hold_bandwidth = 0.0;
    double measured_delay = 0.0;
    double commanded_delay = 0.0;
    /// (a) the pulse would not fit into the static slow band.
    bool input_exceeds_static = false;
    /// (b) measured_delay >= (1 - kDelayShortfall) * commanded_delay.
    bool delay_meets_command = false;
    /// "dynamic" or "static" (no modulation commanded).
    std::string regime;
};

inline constexpr double kDelayShortfall = 0.02;

DelayBandwidthCheck delay_bandwidth_check(const FidelityReport& report, double input_bandwidth,
                                          double static_hold_bandwidth, double commanded_delay);

}  // namespace stoplight::analysis
