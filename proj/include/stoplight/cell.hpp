#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace stoplight {

using cdouble = std::complex<double>;

/// One side cavity of the chain hanging off the waveguide cavity.
/// `beta` couples it to the previous element of the chain (A for the first one).
struct SideCavity {
    double omega_b = 0.0;
    double beta = 0.0;
    double gamma_b = 0.0;
};

/// Static parameters of one lattice cell: waveguide cavity A coupled to its
/// neighbours with `alpha`, plus a chain of r side cavities B_1..B_r.
///
/// Frequencies are angular and dimensionless in units of a user-chosen
/// reference rate. Loss rates enter the complex frequency as omega + i*gamma
/// (amplitudes evolve as exp(+i*Omega*t), so Im Omega > 0 is decay).
struct UnitCellSpec {
    double omega_a = 0.0;
    double alpha = 0.0;
    double ell = 1.0;
    double gamma_a = 0.0;
    std::vector<SideCavity> side_cavities;

    std::size_t side_count() const noexcept { return side_cavities.size(); }
    /// Number of cavity classes per cell (A plus the side cavities).
    std::size_t class_count() const noexcept { return side_cavities.size() + 1; }

    /// Throws ValidationError listing every violated invariant.
    void validate() const;
};

/// Per-class frequency shifts: index 0 is the waveguide cavity A, index i the
/// side cavity B_i.
using Detunings = std::vector<double>;

inline Detunings zero_detunings(const UnitCellSpec& cell) {
    return Detunings(cell.class_count(), 0.0);
}

/// Resonance of class `cls` including the shift.
double shifted_resonance(const UnitCellSpec& cell, const Detunings& d, std::size_t cls);

/// Δ = ω_A − ω_B1 with shifts applied. Requires r >= 1.
double waveguide_detuning(const UnitCellSpec& cell, const Detunings& d);

}  // namespace stoplight
