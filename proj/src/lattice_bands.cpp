#include "stoplight/lattice_bands.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "stoplight/errors.hpp"
#include "stoplight/io.hpp"

namespace stoplight::bands {

namespace {

bool lossless(const UnitCellSpec& cell) {
    if (cell.gamma_a != 0.0) return false;
    return std::all_of(cell.side_cavities.begin(), cell.side_cavities.end(),
                       [](const SideCavity& sc) { return sc.gamma_b == 0.0; });
}

bool band_less(const cdouble& a, const cdouble& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
}

std::vector<cdouble> solve_sorted(const Eigen::MatrixXcd& h, bool hermitian, double k) {
    const auto n = h.rows();
    std::vector<cdouble> values(static_cast<std::size_t>(n));
    if (hermitian) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            throw RuntimeFailure("Hermitian eigen-solve did not converge at k = " + io::fmt(k));
        for (Eigen::Index i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    } else {
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h, false);
        if (es.info() != Eigen::Success)
            throw RuntimeFailure("eigen-solve did not converge at k = " + io::fmt(k));
        for (Eigen::Index i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    }
    std::sort(values.begin(), values.end(), band_less);
    return values;
}

void require_single_side(const UnitCellSpec& cell, const char* what) {
    if (cell.side_count() != 1)
        throw UnsupportedConfiguration(std::string(what) + " requires exactly one side cavity, got r = " +
                                       std::to_string(cell.side_count()));
}

}  // namespace

Eigen::MatrixXcd bloch_matrix(const UnitCellSpec& cell, const Detunings& detunings, double k) {
    const auto dim = static_cast<Eigen::Index>(cell.class_count());
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    h(0, 0) = cdouble(shifted_resonance(cell, detunings, 0) + 2.0 * cell.alpha * std::cos(k * cell.ell),
                      cell.gamma_a);
    for (std::size_t i = 1; i <= cell.side_count(); ++i) {
        const auto& sc = cell.side_cavities[i - 1];
        const auto ii = static_cast<Eigen::Index>(i);
        h(ii, ii) = cdouble(shifted_resonance(cell, detunings, i), sc.gamma_b);
        h(ii - 1, ii) = sc.beta;
        h(ii, ii - 1) = sc.beta;
    }
    return h;
}

std::vector<cdouble> bands_at(const UnitCellSpec& cell, const Detunings& detunings, double k) {
    return solve_sorted(bloch_matrix(cell, detunings, k), lossless(cell), k);
}

BandStructure band_structure(const UnitCellSpec& cell, const Detunings& detunings, std::size_t k_count) {
    if (k_count < 2) throw DomainError("band_structure needs k_count >= 2");
    BandStructure out;
    out.k_grid.resize(k_count);
    out.bands.resize(k_count);
    const double k_max = std::numbers::pi / cell.ell;
    const bool hermitian = lossless(cell);
    for (std::size_t j = 0; j < k_count; ++j) {
        // j == k_count-1 lands exactly on pi/ell.
        const double k = k_max * static_cast<double>(j) / static_cast<double>(k_count - 1);
        out.k_grid[j] = k;
        out.bands[j] = solve_sorted(bloch_matrix(cell, detunings, k), hermitian, k);
    }
    return out;
}

BandPair dispersion_closed_form(const UnitCellSpec& cell, const Detunings& detunings, double k) {
    require_single_side(cell, "dispersion_closed_form");
    const auto& sc = cell.side_cavities.front();
    const double omega_ak = shifted_resonance(cell, detunings, 0) + 2.0 * cell.alpha * std::cos(k * cell.ell);
    const double omega_b = shifted_resonance(cell, detunings, 1);
    const cdouble sum(omega_ak + omega_b, cell.gamma_a + sc.gamma_b);
    const cdouble diff(omega_ak - omega_b, cell.gamma_a - sc.gamma_b);
    const cdouble root = std::sqrt(diff * diff + 4.0 * sc.beta * sc.beta);
    BandPair out;
    out.lower = 0.5 * (sum - root);
    out.upper = 0.5 * (sum + root);
    const double dg = cell.gamma_a - sc.gamma_b;
    out.overdamped = dg * dg > 4.0 * sc.beta * sc.beta;
    return out;
}

double group_velocity_center(const UnitCellSpec& cell, double delta, double gamma_a, double gamma_b) {
    require_single_side(cell, "group_velocity_center");
    const double beta = cell.side_cavities.front().beta;
    const double dg = gamma_a - gamma_b;
    const cdouble w(delta, dg);
    cdouble root = std::sqrt(w * w + 4.0 * beta * beta);
    // Overdamped: w^2 + 4 beta^2 crosses the negative real axis at delta = 0;
    // flip to the branch reached continuously from delta -> -infinity.
    if (dg * dg > 4.0 * beta * beta) {
        if (delta > 0.0) root = -root;
        // On the cut itself take the delta -> 0- limit.
        if (delta == 0.0) root = cdouble(0.0, -std::copysign(std::sqrt(dg * dg - 4.0 * beta * beta), dg));
    }
    // 1 - w/root without cancellation when w and root point the same way (root^2 - w^2 = 4 beta^2).
    const cdouble gap = (w.real() * root.real() > 0.0) ? 4.0 * beta * beta / (root + w) : root - w;
    return cell.alpha * cell.ell * (gap / root).real();
}

NumericVelocity group_velocity_numeric(const BandStructure& bands, std::size_t band_index, double k) {
    const auto& grid = bands.k_grid;
    const std::size_t n = grid.size();
    if (n < 3) throw DomainError("group_velocity_numeric needs at least 3 grid points");
    if (band_index >= bands.band_count())
        throw DomainError("band index " + std::to_string(band_index) + " out of range");
    const double h = (grid.back() - grid.front()) / static_cast<double>(n - 1);
    if (!(h > 0.0)) throw DomainError("k grid must be increasing");
    const double pos = (k - grid.front()) / h;
    if (pos < -0.5 || pos > static_cast<double>(n - 1) + 0.5)
        throw DomainError("k = " + io::fmt(k) + " lies outside the band grid");
    const auto j = static_cast<std::size_t>(std::clamp(std::llround(pos), 0LL, static_cast<long long>(n - 1)));
    auto w = [&](std::size_t i) { return bands.bands[i][band_index].real(); };

    NumericVelocity out;
    out.k_used = grid[j];
    if (j >= 2 && j + 2 < n) {
        out.value = (w(j - 2) - 8.0 * w(j - 1) + 8.0 * w(j + 1) - w(j + 2)) / (12.0 * h);
    } else if (j >= 1 && j + 1 < n) {
        out.value = (w(j + 1) - w(j - 1)) / (2.0 * h);
    } else if (j == 0) {
        out.value = (-3.0 * w(0) + 4.0 * w(1) - w(2)) / (2.0 * h);
        out.degraded = true;
    } else {
        out.value = (3.0 * w(n - 1) - 4.0 * w(n - 2) + w(n - 3)) / (2.0 * h);
        out.degraded = true;
    }
    return out;
}

MultistageEstimate multistage_min_vg(const UnitCellSpec& cell, double delta) {
    if (delta == 0.0) throw DomainError("multistage_min_vg: detuning must be nonzero");
    MultistageEstimate out;
    double product = 1.0;
    double max_beta = 0.0;
    for (const auto& sc : cell.side_cavities) {
        const double ratio = sc.beta / delta;
        product *= ratio * ratio;
        max_beta = std::max(max_beta, std::abs(sc.beta));
    }
    out.velocity = 2.0 * cell.alpha * cell.ell * product;
    out.asymptotic_valid = std::abs(delta) >= 10.0 * max_beta;
    return out;
}

double min_band_gap(const UnitCellSpec& cell, double delta) {
    require_single_side(cell, "min_band_gap");
    const auto& sc = cell.side_cavities.front();
    const double reach = 2.0 * std::abs(cell.alpha);
    const double x = std::clamp(0.0, delta - reach, delta + reach);
    const cdouble w(x, cell.gamma_a - sc.gamma_b);
    return std::sqrt(w * w + 4.0 * sc.beta * sc.beta).real();
}

double min_adjacent_band_spacing(const UnitCellSpec& cell, const Detunings& detunings, std::size_t k_count) {
    if (cell.side_count() == 0) throw UnsupportedConfiguration("band spacing needs r >= 1");
    if (cell.side_count() == 1) {
        return min_band_gap(cell, waveguide_detuning(cell, detunings));
    }
    const auto bs = band_structure(cell, detunings, std::max<std::size_t>(k_count, 2));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& at_k : bs.bands)
        for (std::size_t m = 0; m + 1 < at_k.size(); ++m)
            best = std::min(best, at_k[m + 1].real() - at_k[m].real());
    return best;
}

void write_bands_csv(const BandStructure& bands, std::ostream& out) {
    const std::size_t m_count = bands.band_count();
    out << "k";
    for (std::size_t m = 0; m < m_count; ++m) out << ",band" << m << "_re,band" << m << "_im";
    out << '\n';
    for (std::size_t j = 0; j < bands.k_grid.size(); ++j) {
        out << io::fmt(bands.k_grid[j]);
        for (const auto& w : bands.bands[j]) out << ',' << io::fmt(w.real()) << ',' << io::fmt(w.imag());
        out << '\n';
    }
}

}  // namespace stoplight::bands
