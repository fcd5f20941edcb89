#include "stoplight/pulse_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>

#include <fftw3.h>

#include "stoplight/errors.hpp"
#include "stoplight/io.hpp"
#include "stoplight/lattice_bands.hpp"

namespace stoplight::analysis {

namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftBuffer {
    explicit FftBuffer(std::size_t n) : n_(n) {
        data_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan_ = fftw_plan_dft_1d(static_cast<int>(n), data_, data_, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    ~FftBuffer() {
        {
            std::lock_guard<std::mutex> lock(planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(data_);
    }
    FftBuffer(const FftBuffer&) = delete;
    FftBuffer& operator=(const FftBuffer&) = delete;

    fftw_complex* data() { return data_; }
    void run() { fftw_execute(plan_); }

private:
    std::size_t n_;
    fftw_complex* data_ = nullptr;
    fftw_plan plan_ = nullptr;
};

bool same_grid(const ProbeSeries& a, const ProbeSeries& b) {
    return a.dt == b.dt && a.t0 == b.t0 && a.values.size() == b.values.size();
}

std::vector<double> resample(const ProbeSeries& s, double t0, double dt, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = s.at(t0 + dt * static_cast<double>(i));
    return out;
}

double l2(const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

// v at fractional index x, zero outside.
double sample(const std::vector<double>& v, double x) {
    if (x < 0.0 || x > static_cast<double>(v.size() - 1)) return 0.0;
    const auto i = static_cast<std::size_t>(std::floor(x));
    if (i + 1 >= v.size()) return v.back();
    const double f = x - static_cast<double>(i);
    return v[i] * (1.0 - f) + v[i + 1] * f;
}

}  // namespace

double ProbeSeries::at(double t) const {
    if (values.empty()) return 0.0;
    const double x = (t - t0) / dt;
    const double last = static_cast<double>(values.size() - 1);
    if (x < -1e-9 || x > last + 1e-9) return 0.0;
    return sample(values, std::clamp(x, 0.0, last));
}

ProbeSeries probe_series(std::span<const double> times, std::span<const double> values, double t_from) {
    if (times.size() != values.size()) throw DomainError("probe_series: times and values differ in length");
    ProbeSeries out;
    if (times.size() >= 2) out.dt = times[1] - times[0];
    std::size_t first = 0;
    while (first < times.size() && times[first] < t_from) ++first;
    if (first < times.size()) out.t0 = times[first];
    out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(first), values.end());
    return out;
}

FidelityReport fidelity_report(const ProbeSeries& released, const ProbeSeries& reference, double adiabaticity_metric,
                               kernels::Execution execution) {
    if (released.values.empty() || reference.values.empty())
        throw DomainError("fidelity_report: empty probe series");
    if (!(released.dt > 0.0) || !(reference.dt > 0.0)) throw DomainError("fidelity_report: sampling step must be > 0");

    std::vector<double> a, b;
    double dt = released.dt;
    if (same_grid(released, reference)) {
        a = released.values;
        b = reference.values;
    } else {
        dt = std::min(released.dt, reference.dt);
        const double t0 = std::min(released.t0, reference.t0);
        const double t1 = std::max(released.t_end(), reference.t_end());
        const auto n = static_cast<std::size_t>(std::llround((t1 - t0) / dt)) + 1;
        a = resample(released, t0, dt, n);
        b = resample(reference, t0, dt, n);
    }
    const double na = l2(a), nb = l2(b);
    if (!(na > 0.0) || !(nb > 0.0))
        throw DomainError(std::string("fidelity_report: ") + (na > 0.0 ? "reference" : "released") +
                          " series carries no energy");

    const std::size_t lag = std::max(a.size(), b.size()) - 1;
    std::vector<double> corr(2 * lag + 1);
    if (execution == kernels::Execution::parallel)
        kernels::cross_correlate_parallel(a, b, lag, corr);
    else
        kernels::cross_correlate_serial(a, b, lag, corr);
    for (auto& c : corr) c /= na * nb;

    const auto best = static_cast<std::size_t>(std::max_element(corr.begin(), corr.end()) - corr.begin());
    double shift = static_cast<double>(best) - static_cast<double>(lag);
    double peak = corr[best];
    if (best > 0 && best + 1 < corr.size()) {
        const double ym = corr[best - 1], y0 = corr[best], yp = corr[best + 1];
        const double denom = ym - 2.0 * y0 + yp;
        if (denom < 0.0) {
            const double off = 0.5 * (ym - yp) / denom;
            shift += off;
            peak = y0 - 0.25 * (ym - yp) * off;
        }
    }

    FidelityReport r;
    r.measured_delay = shift * dt;
    r.overlap = std::min(1.0, peak);
    r.energy_retained = std::accumulate(a.begin(), a.end(), 0.0) / std::accumulate(b.begin(), b.end(), 0.0);
    r.adiabaticity_metric_used = adiabaticity_metric;

    std::vector<double> shifted(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) shifted[i] = sample(b, static_cast<double>(i) - shift);
    const double ns = l2(shifted);
    double err = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] / na - (ns > 0.0 ? shifted[i] / ns : 0.0);
        err += d * d;
    }
    r.l2_shape_error = std::sqrt(err);
    return r;
}

double KSpectrum::total() const { return std::accumulate(occupation.begin(), occupation.end(), 0.0); }

KSpectrum k_spectrum(const cmt::StateVector& state, const cmt::LatticeSpec& lattice) {
    const std::size_t n = state.n_cells;
    const std::size_t m = state.classes;
    if (n != lattice.n_cells || m != lattice.classes())
        throw DomainError("k_spectrum: state does not match the lattice");
    std::vector<double> occ(n, 0.0);
    FftBuffer buf(n);
    const double scale = 1.0 / static_cast<double>(n);  // |1/sqrt(N)|^2
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            const cdouble v = state.at(i, c);
            buf.data()[i][0] = v.real();
            buf.data()[i][1] = v.imag();
        }
        buf.run();
        for (std::size_t j = 0; j < n; ++j)
            occ[j] += (buf.data()[j][0] * buf.data()[j][0] + buf.data()[j][1] * buf.data()[j][1]) * scale;
    }
    // bin j holds k = 2*pi*j/N; bins j >= ceil(N/2) wrap to negative k.
    const std::size_t half = (n + 1) / 2;
    KSpectrum out;
    out.k.reserve(n);
    out.occupation.reserve(n);
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t j = (s + half) % n;
        double k = two_pi * static_cast<double>(j) / static_cast<double>(n);
        if (j >= half) k -= two_pi;
        if (k >= std::numbers::pi) k -= two_pi;
        out.k.push_back(k / lattice.cell.ell);
        out.occupation.push_back(occ[j]);
    }
    return out;
}

Bandwidth instantaneous_bandwidth(const cmt::StateVector& state, const cmt::LatticeSpec& lattice,
                                  const Detunings& detunings) {
    const auto spec = k_spectrum(state, lattice);
    const double peak = *std::max_element(spec.occupation.begin(), spec.occupation.end());
    if (!(peak > 0.0)) throw DomainError("instantaneous_bandwidth: state is empty");
    const bool two_band = lattice.cell.side_count() == 1;
    double w_sum = 0.0, mean = 0.0, sq = 0.0;
    Bandwidth out;
    for (std::size_t j = 0; j < spec.k.size(); ++j) {
        const double w = spec.occupation[j];
        if (w < kOccupationFloor * peak) continue;
        double freq = 0.0;
        if (lattice.cell.side_count() == 0) {
            freq = bands::bands_at(lattice.cell, detunings, spec.k[j]).front().real();
        } else if (two_band) {
            const auto pair = bands::dispersion_closed_form(lattice.cell, detunings, spec.k[j]);
            freq = pair.lower.real();
            if (pair.upper.real() - pair.lower.real() <= kBandIdentificationTolerance) out.ambiguous = true;
        } else {
            const auto vals = bands::bands_at(lattice.cell, detunings, spec.k[j]);
            freq = vals[0].real();
            if (vals[1].real() - vals[0].real() <= kBandIdentificationTolerance) out.ambiguous = true;
        }
        // Welford-style accumulation keeps the spread accurate when it is tiny
        // compared with the mean.
        w_sum += w;
        const double d = freq - mean;
        mean += d * w / w_sum;
        sq += w * d * (freq - mean);
    }
    out.mean = mean;
    out.spread = w_sum > 0.0 ? std::sqrt(std::max(0.0, sq / w_sum)) : 0.0;
    return out;
}

double band_full_width(const UnitCellSpec& cell, const Detunings& detunings, std::size_t band, std::size_t k_count) {
    const auto bs = bands::band_structure(cell, detunings, k_count);
    if (band >= bs.band_count()) throw DomainError("band_full_width: band index out of range");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& at_k : bs.bands) {
        lo = std::min(lo, at_k[band].real());
        hi = std::max(hi, at_k[band].real());
    }
    return hi - lo;
}

CenterOfMassFit center_of_mass_velocity(std::span<const cmt::StateVector> snapshots, double t_begin, double t_end,
                                        double ell) {
    CenterOfMassFit fit;
    for (const auto& s : snapshots) {
        if (s.t < t_begin || s.t > t_end) continue;
        double total = 0.0, moment = 0.0;
        for (std::size_t n = 0; n < s.n_cells; ++n) {
            const double w = s.cell_intensity(n);
            total += w;
            moment += w * static_cast<double>(n);
        }
        if (!(total > 0.0)) throw DomainError("center_of_mass_velocity: empty snapshot at t = " + io::fmt(s.t));
        const double edge = std::max(s.cell_intensity(0), s.cell_intensity(s.n_cells - 1));
        if (edge > kBoundaryFraction * total) fit.touches_boundary = true;
        fit.times.push_back(s.t);
        fit.positions.push_back(moment / total * ell);
    }
    fit.snapshots_used = fit.times.size();
    if (fit.snapshots_used < 3)
        throw DomainError("center_of_mass_velocity: need at least 3 snapshots in the window, got " +
                          std::to_string(fit.snapshots_used));
    const double n = static_cast<double>(fit.snapshots_used);
    const double mt = std::accumulate(fit.times.begin(), fit.times.end(), 0.0) / n;
    const double mx = std::accumulate(fit.positions.begin(), fit.positions.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < fit.snapshots_used; ++i) {
        sxx += (fit.times[i] - mt) * (fit.times[i] - mt);
        sxy += (fit.times[i] - mt) * (fit.positions[i] - mx);
    }
    if (!(sxx > 0.0)) throw DomainError("center_of_mass_velocity: snapshots share one time");
    fit.velocity = sxy / sxx;
    return fit;
}

DelayBandwidthCheck delay_bandwidth_check(const FidelityReport& report, double input_bandwidth,
                                          double static_hold_bandwidth, double commanded_delay) {
    DelayBandwidthCheck c;
    c.input_bandwidth = input_bandwidth;
    c.static_hold_bandwidth = static_hold_bandwidth;
    c.measured_delay = report.measured_delay;
    c.commanded_delay = commanded_delay;
    c.input_exceeds_static = input_bandwidth > static_hold_bandwidth;
    if (commanded_delay > 0.0) {
        c.regime = "dynamic";
        c.delay_meets_command = report.measured_delay >= (1.0 - kDelayShortfall) * commanded_delay;
    } else {
        c.regime = "static";
        c.delay_meets_command = true;
    }
    return c;
}

}  // namespace stoplight::analysis
