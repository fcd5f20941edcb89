#pragma once

// Data-parallel inner loops. Every kernel has a serial reference and an OpenMP
// version; both compute each output element with the same arithmetic, so the
// results are bit-identical regardless of thread count.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace stoplight::kernels {

using cdouble = std::complex<double>;

enum class Execution { serial, parallel };

enum class BoundaryKind { closed, absorbing, periodic };

/// Instantaneous coefficients of the coupled-mode generator for a lattice of
/// `n_cells` cells with `classes` cavities each, cell-major layout
/// x[n*classes + c]. All entries are real; the generator is
///   dx/dt = (i*freq_c - loss_c) x + i*alpha*(neighbours) + i*beta*(chain).
struct GeneratorCoefficients {
    std::size_t n_cells = 0;
    std::size_t classes = 1;
    double alpha = 0.0;
    /// In-frame resonance per class (omega + shift - omega_ref).
    std::vector<double> freq;
    std::vector<double> loss;
    /// beta[i-1] couples class i-1 and class i.
    std::vector<double> beta;
    BoundaryKind boundary = BoundaryKind::closed;
    /// Extra decay on the last waveguide cavity when boundary == absorbing.
    double terminal_rate = 0.0;
};

/// y = G x.
void apply_generator_serial(const GeneratorCoefficients& g, std::span<const cdouble> x, std::span<cdouble> y);
void apply_generator_parallel(const GeneratorCoefficients& g, std::span<const cdouble> x, std::span<cdouble> y);
void apply_generator(Execution ex, const GeneratorCoefficients& g, std::span<const cdouble> x,
                     std::span<cdouble> y);

/// out = x + a*k
void axpy_serial(std::span<const cdouble> x, double a, std::span<const cdouble> k, std::span<cdouble> out);
void axpy_parallel(std::span<const cdouble> x, double a, std::span<const cdouble> k, std::span<cdouble> out);

/// x += h/6 * (k1 + 2 k2 + 2 k3 + k4)
void rk4_combine_serial(std::span<cdouble> x, double h, std::span<const cdouble> k1, std::span<const cdouble> k2,
                        std::span<const cdouble> k3, std::span<const cdouble> k4);
void rk4_combine_parallel(std::span<cdouble> x, double h, std::span<const cdouble> k1,
                          std::span<const cdouble> k2, std::span<const cdouble> k3,
                          std::span<const cdouble> k4);

/// out[s + max_lag] = sum_i a[i] * b[i - s] for s in [-max_lag, max_lag];
/// indices outside b count as zero.
void cross_correlate_serial(std::span<const double> a, std::span<const double> b, std::size_t max_lag,
                            std::span<double> out);
void cross_correlate_parallel(std::span<const double> a, std::span<const double> b, std::size_t max_lag,
                              std::span<double> out);

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

}  // namespace stoplight::kernels
