#pragma once

// Frozen-detuning analytics of the coupled-cavity lattice.
//
// Conventions:
//   * amplitudes evolve as exp(+i*Omega*t); a cavity with resonance w and loss
//     rate g has complex frequency Omega = w + i*g,
//   * the Bloch ansatz is x_n = u * exp(i*k*n*ell), so neighbour coupling of
//     the waveguide cavities contributes 2*alpha*cos(k*ell),
//   * bands are sorted ascending by real part (ties broken by imaginary part).

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "stoplight/cell.hpp"

namespace stoplight::bands {

inline constexpr std::size_t kDefaultKCount = 1024;

/// (r+1)x(r+1) Bloch matrix H(k); eigenvalues are the complex band frequencies.
Eigen::MatrixXcd bloch_matrix(const UnitCellSpec& cell, const Detunings& detunings, double k);

struct BandStructure {
    std::vector<double> k_grid;
    /// bands[j][m]: band m at k_grid[j].
    std::vector<std::vector<cdouble>> bands;

    std::size_t band_count() const noexcept { return bands.empty() ? 0 : bands.front().size(); }
};

/// Uniform grid on [0, pi/ell], endpoints included. Dense eigen-solve at each k;
/// uses the Hermitian solver when every loss rate is zero so the bands come out
/// exactly real.
BandStructure band_structure(const UnitCellSpec& cell, const Detunings& detunings,
                             std::size_t k_count = kDefaultKCount);

/// Eigenvalues of the Bloch matrix at a single k, sorted.
std::vector<cdouble> bands_at(const UnitCellSpec& cell, const Detunings& detunings, double k);

struct BandPair {
    cdouble lower;
    cdouble upper;
    /// 2|beta| < |gamma_A - gamma_B|: the anticrossing is overdamped and the
    /// square root has a branch cut at zero detuning.
    bool overdamped = false;
};

/// Closed-form two-band dispersion for r = 1 (principal square-root branch,
/// so `lower` always has the smaller real part). Throws UnsupportedConfiguration
/// for r != 1.
BandPair dispersion_closed_form(const UnitCellSpec& cell, const Detunings& detunings, double k);

/// Band-centre (k = pi/2ell) group velocity of the lower band for r = 1.
/// `delta` is omega_A - omega_B. The square-root branch is continued through
/// the cut at delta = 0 in the overdamped case so the lower band stays the one
/// connected to delta -> -infinity.
double group_velocity_center(const UnitCellSpec& cell, double delta, double gamma_a,
                             double gamma_b);

struct NumericVelocity {
    double value = 0.0;
    double k_used = 0.0;
    /// One-sided stencil at a grid edge.
    bool degraded = false;
};

/// Finite-difference d(Re omega_m)/dk at the grid point nearest `k`.
/// Five-point centred stencil (O(h^4)) where two neighbours exist on each side,
/// three-point centred one step from an edge, three-point one-sided (flagged
/// degraded) at an edge. Requires a uniform grid.
NumericVelocity group_velocity_numeric(const BandStructure& bands, std::size_t band_index,
                                       double k);

struct MultistageEstimate {
    double velocity = 0.0;
    /// |delta| >= 10 max|beta_i|; below that the asymptotic product is unreliable.
    bool asymptotic_valid = true;
};

/// 2*alpha*ell*prod_i (beta_i/delta)^2. Throws DomainError for delta == 0.
MultistageEstimate multistage_min_vg(const UnitCellSpec& cell, double delta);

/// min over k of Re(omega_+ - omega_-) for r = 1 at total detuning `delta`
/// (omega_A - omega_B, shifts already included).
///
/// Re sqrt((x + i*dg)^2 + 4 beta^2) grows monotonically with |x|, so the
/// minimum over k sits at the x = delta + 2*alpha*cos(k*ell) closest to zero;
/// the scan over cos(k*ell) in [-1, 1] is therefore done in closed form.
double min_band_gap(const UnitCellSpec& cell, double delta);

/// General-r counterpart used by the adiabaticity diagnostic: smallest spacing
/// of adjacent sorted band real parts over a k scan of `k_count` points.
double min_adjacent_band_spacing(const UnitCellSpec& cell, const Detunings& detunings,
                                 std::size_t k_count = 257);

/// CSV: k, band0_re, band0_im, ..., bandr_re, bandr_im.
void write_bands_csv(const BandStructure& bands, std::ostream& out);

}  // namespace stoplight::bands
