#include "stoplight/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stoplight::kernels {

namespace {

inline cdouble mul_i(double c, cdouble z) { return {-c * z.imag(), c * z.real()}; }

// (i*f - loss) * z
inline cdouble onsite(double f, double loss, cdouble z) {
    return {-loss * z.real() - f * z.imag(), -loss * z.imag() + f * z.real()};
}

inline void update_cell(const GeneratorCoefficients& g, const cdouble* x, cdouble* y, std::size_t n) {
    const std::size_t m = g.classes;
    const std::size_t base = n * m;
    const std::size_t last = g.n_cells - 1;

    cdouble nb{0.0, 0.0};
    if (g.boundary == BoundaryKind::periodic) {
        const std::size_t left = n == 0 ? last : n - 1;
        const std::size_t right = n == last ? 0 : n + 1;
        nb = x[left * m] + x[right * m];
    } else {
        if (n > 0) nb += x[(n - 1) * m];
        if (n < last) nb += x[(n + 1) * m];
    }
    cdouble acc = onsite(g.freq[0], g.loss[0], x[base]) + mul_i(g.alpha, nb);
    if (m > 1) acc += mul_i(g.beta[0], x[base + 1]);
    if (g.boundary == BoundaryKind::absorbing && n == last) acc -= g.terminal_rate * x[base];
    y[base] = acc;

    for (std::size_t c = 1; c < m; ++c) {
        cdouble b = onsite(g.freq[c], g.loss[c], x[base + c]) + mul_i(g.beta[c - 1], x[base + c - 1]);
        if (c + 1 < m) b += mul_i(g.beta[c], x[base + c + 1]);
        y[base + c] = b;
    }
}

inline double correlate_at(std::span<const double> a, std::span<const double> b, long long s) {
    // sum_i a[i] b[i - s], restricted to valid b indices.
    const auto na = static_cast<long long>(a.size());
    const auto nb = static_cast<long long>(b.size());
    const long long lo = s > 0 ? s : 0;
    const long long hi = std::min(na, nb + s);
    double acc = 0.0;
    for (long long i = lo; i < hi; ++i) acc += a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i - s)];
    return acc;
}

}  // namespace

void apply_generator_serial(const GeneratorCoefficients& g, std::span<const cdouble> x, std::span<cdouble> y) {
    for (std::size_t n = 0; n < g.n_cells; ++n) update_cell(g, x.data(), y.data(), n);
}

void apply_generator_parallel(const GeneratorCoefficients& g, std::span<const cdouble> x, std::span<cdouble> y) {
    const auto cells = static_cast<long long>(g.n_cells);
    const cdouble* xp = x.data();
    cdouble* yp = y.data();
#pragma omp parallel for schedule(static)
    for (long long n = 0; n < cells; ++n) update_cell(g, xp, yp, static_cast<std::size_t>(n));
}

void apply_generator(Execution ex, const GeneratorCoefficients& g, std::span<const cdouble> x,
                     std::span<cdouble> y) {
    if (ex == Execution::parallel)
        apply_generator_parallel(g, x, y);
    else
        apply_generator_serial(g, x, y);
}

void axpy_serial(std::span<const cdouble> x, double a, std::span<const cdouble> k, std::span<cdouble> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + a * k[i];
}

void axpy_parallel(std::span<const cdouble> x, double a, std::span<const cdouble> k, std::span<cdouble> out) {
    const auto n = static_cast<long long>(x.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        const auto j = static_cast<std::size_t>(i);
        out[j] = x[j] + a * k[j];
    }
}

void rk4_combine_serial(std::span<cdouble> x, double h, std::span<const cdouble> k1, std::span<const cdouble> k2,
                        std::span<const cdouble> k3, std::span<const cdouble> k4) {
    const double w = h / 6.0;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

void rk4_combine_parallel(std::span<cdouble> x, double h, std::span<const cdouble> k1,
                          std::span<const cdouble> k2, std::span<const cdouble> k3,
                          std::span<const cdouble> k4) {
    const double w = h / 6.0;
    const auto n = static_cast<long long>(x.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        const auto j = static_cast<std::size_t>(i);
        x[j] += w * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
}

void cross_correlate_serial(std::span<const double> a, std::span<const double> b, std::size_t max_lag,
                            std::span<double> out) {
    const auto lag = static_cast<long long>(max_lag);
    for (long long s = -lag; s <= lag; ++s) out[static_cast<std::size_t>(s + lag)] = correlate_at(a, b, s);
}

void cross_correlate_parallel(std::span<const double> a, std::span<const double> b, std::size_t max_lag,
                              std::span<double> out) {
    const auto lag = static_cast<long long>(max_lag);
#pragma omp parallel for schedule(dynamic, 64)
    for (long long s = -lag; s <= lag; ++s) out[static_cast<std::size_t>(s + lag)] = correlate_at(a, b, s);
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace stoplight::kernels
