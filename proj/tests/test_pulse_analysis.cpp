#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "stoplight/errors.hpp"
#include "stoplight/lattice_bands.hpp"
#include "stoplight/pulse_analysis.hpp"

using namespace stoplight;
using namespace stoplight::analysis;
using std::numbers::pi;

namespace {

ProbeSeries gaussian_series(double t0, double dt, std::size_t n, double center, double sigma, double scale = 1.0) {
    ProbeSeries s;
    s.t0 = t0;
    s.dt = dt;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = t0 + dt * static_cast<double>(i);
        s.values.push_back(scale * std::exp(-0.5 * std::pow((t - center) / sigma, 2)));
    }
    return s;
}

cmt::LatticeSpec ring(std::size_t n, std::size_t sides = 0) {
    cmt::LatticeSpec lat;
    lat.n_cells = n;
    lat.cell.alpha = 1.0;
    for (std::size_t i = 0; i < sides; ++i) lat.cell.side_cavities.push_back({10.0, 1.0, 0.0});
    return lat;
}

cmt::StateVector packet(const cmt::LatticeSpec& lat, double center, double width, double k0, double t = 0.0) {
    cmt::StateVector s(t, lat.n_cells, lat.classes());
    for (std::size_t n = 0; n < lat.n_cells; ++n) {
        const double x = static_cast<double>(n) - center;
        s.at(n, 0) = std::exp(-0.5 * x * x / (width * width)) * std::polar(1.0, k0 * static_cast<double>(n));
    }
    return s;
}

}  // namespace

TEST_CASE("fidelity of identical series") {
    const auto s = gaussian_series(0.0, 0.1, 400, 20.0, 2.0);
    const auto r = fidelity_report(s, s, 0.3);
    CHECK(r.measured_delay == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.overlap == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.l2_shape_error < 1e-12);
    CHECK(r.energy_retained == doctest::Approx(1.0));
    CHECK(r.adiabaticity_metric_used == 0.3);
}

TEST_CASE("fidelity of a shifted copy") {
    const auto ref = gaussian_series(0.0, 0.1, 1000, 20.0, 2.0);
    for (double s : {17.0, 33.3, 41.27}) {
        const auto rel = gaussian_series(0.0, 0.1, 1000, 20.0 + s, 2.0);
        const auto r = fidelity_report(rel, ref);
        CHECK(r.measured_delay == doctest::Approx(s).epsilon(1e-3));
        CHECK(r.overlap == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(r.energy_retained == doctest::Approx(1.0).epsilon(1e-9));
    }
    // Different grids: released sampled on its own window.
    const auto rel = gaussian_series(50.0, 0.05, 600, 70.0, 2.0);
    const auto r = fidelity_report(rel, ref);
    CHECK(r.measured_delay == doctest::Approx(50.0).epsilon(1e-4));
    CHECK(r.overlap == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("Gaussian width mismatch overlap") {
    const double s1 = 2.0, s2 = 2.2;
    const auto ref = gaussian_series(0.0, 0.01, 6000, 30.0, s1);
    // Equal energy: amplitude scaled by s1/s2.
    const auto rel = gaussian_series(0.0, 0.01, 6000, 30.0, s2, s1 / s2);
    const auto r = fidelity_report(rel, ref);
    const double closed = std::sqrt(2.0 * s1 * s2 / (s1 * s1 + s2 * s2));
    CHECK(r.overlap == doctest::Approx(closed).epsilon(1e-6));
    CHECK(closed == doctest::Approx(0.99774).epsilon(1e-5));
    CHECK(r.energy_retained == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.measured_delay == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("fidelity errors and serial/parallel agreement") {
    const auto ref = gaussian_series(0.0, 0.1, 300, 10.0, 2.0);
    ProbeSeries zero = ref;
    std::fill(zero.values.begin(), zero.values.end(), 0.0);
    CHECK_THROWS_AS(fidelity_report(zero, ref), DomainError);
    CHECK_THROWS_AS(fidelity_report(ref, zero), DomainError);
    CHECK_THROWS_AS(fidelity_report(ProbeSeries{}, ref), DomainError);

    const auto rel = gaussian_series(0.0, 0.1, 300, 17.3, 2.5, 0.4);
    const auto a = fidelity_report(rel, ref, 0.0, kernels::Execution::serial);
    const auto b = fidelity_report(rel, ref, 0.0, kernels::Execution::parallel);
    CHECK(a.measured_delay == b.measured_delay);
    CHECK(a.overlap == b.overlap);
    CHECK(a.l2_shape_error == b.l2_shape_error);
    CHECK(a.energy_retained == doctest::Approx(0.4 * 2.5 / 2.0).epsilon(1e-6));
}

TEST_CASE("probe series windowing") {
    const std::vector<double> t{0.0, 0.5, 1.0, 1.5, 2.0}, v{1, 2, 3, 4, 5};
    const auto s = probe_series(t, v, 0.9);
    CHECK(s.t0 == 1.0);
    CHECK(s.dt == 0.5);
    CHECK(s.values == std::vector<double>{3, 4, 5});
    CHECK(s.at(1.25) == doctest::Approx(3.5));
    CHECK(s.at(10.0) == 0.0);
    CHECK_THROWS_AS(probe_series(t, std::vector<double>{1.0}), DomainError);
}

TEST_CASE("k spectrum of plane waves") {
    const auto lat = ring(32);
    const double k0 = 2.0 * pi * 5.0 / 32.0;
    cmt::StateVector s(0.0, 32, 1);
    for (std::size_t n = 0; n < 32; ++n) s.at(n, 0) = std::polar(1.0, k0 * static_cast<double>(n));
    const auto spec = k_spectrum(s, lat);
    REQUIRE(spec.k.size() == 32);
    CHECK(spec.k.front() == doctest::Approx(-pi));
    for (std::size_t j = 1; j < spec.k.size(); ++j) CHECK(spec.k[j] > spec.k[j - 1]);
    std::size_t nonzero = 0;
    for (std::size_t j = 0; j < 32; ++j) {
        if (spec.occupation[j] > 1e-20) {
            ++nonzero;
            CHECK(spec.k[j] == doctest::Approx(k0));
            CHECK(spec.occupation[j] == doctest::Approx(32.0));
        }
    }
    CHECK(nonzero == 1);

    cmt::StateVector u(0.0, 32, 1);
    for (auto& a : u.amplitudes) a = 1.0;
    const auto su = k_spectrum(u, lat);
    for (std::size_t j = 0; j < 32; ++j) {
        if (su.k[j] == 0.0)
            CHECK(su.occupation[j] == doctest::Approx(32.0));
        else
            CHECK(su.occupation[j] < 1e-20);
    }
}

TEST_CASE("k spectrum against a brute-force transform") {
    const auto lat = ring(64, 1);
    auto s = packet(lat, 30.0, 6.0, pi / 2);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    for (std::size_t n = 0; n < 64; ++n) s.at(n, 1) = cdouble(nd(rng), nd(rng)) * 0.1;
    const auto spec = k_spectrum(s, lat);
    for (std::size_t j = 0; j < 64; ++j) {
        double occ = 0.0;
        for (std::size_t c = 0; c < 2; ++c) {
            cdouble acc = 0.0;
            for (std::size_t n = 0; n < 64; ++n)
                acc += s.at(n, c) * std::polar(1.0, -spec.k[j] * static_cast<double>(n));
            occ += std::norm(acc) / 64.0;
        }
        CHECK(spec.occupation[j] == doctest::Approx(occ).epsilon(1e-10));
    }
    CHECK(spec.total() == doctest::Approx(s.norm()).epsilon(1e-12));

    // The envelope spectrum is centred at pi/2 with width ~ 1/envelope width.
    double mean = 0.0, var = 0.0, tot = 0.0;
    const auto bare = k_spectrum(packet(ring(64), 30.0, 6.0, pi / 2), ring(64));
    for (std::size_t j = 0; j < 64; ++j) {
        mean += bare.k[j] * bare.occupation[j];
        tot += bare.occupation[j];
    }
    mean /= tot;
    for (std::size_t j = 0; j < 64; ++j) var += std::pow(bare.k[j] - mean, 2) * bare.occupation[j];
    CHECK(mean == doctest::Approx(pi / 2).epsilon(1e-6));
    // |a|^2 ~ exp(-x^2/w^2) -> occupation ~ exp(-k^2 w^2), std 1/(sqrt(2) w).
    CHECK(std::sqrt(var / tot) == doctest::Approx(1.0 / (std::sqrt(2.0) * 6.0)).epsilon(1e-3));
}

TEST_CASE("instantaneous bandwidth") {
    auto lat = ring(256, 1);
    SUBCASE("single k") {
        cmt::StateVector s(0.0, 256, 2);
        const double k0 = 2.0 * pi * 64.0 / 256.0;
        for (std::size_t n = 0; n < 256; ++n) s.at(n, 0) = std::polar(1.0, k0 * static_cast<double>(n));
        const auto b = instantaneous_bandwidth(s, lat, {0.0, 0.0});
        CHECK(b.spread < 1e-12);
        CHECK_FALSE(b.ambiguous);
    }
    SUBCASE("fast and slow bands") {
        const auto s = packet(lat, 128.0, 15.0, pi / 2);
        // omega_B = 10: Delta = -10 at zero shifts, Delta = +10 with {+10, -10}.
        const Detunings fast{0.0, 0.0}, slow{10.0, -10.0};
        const auto bf = instantaneous_bandwidth(s, lat, fast);
        const auto bs = instantaneous_bandwidth(s, lat, slow);
        const double ratio = bs.spread / bf.spread;
        const double v_ratio = bands::group_velocity_center(lat.cell, 10.0, 0.0, 0.0) /
                               bands::group_velocity_center(lat.cell, -10.0, 0.0, 0.0);
        CHECK(std::abs(ratio / v_ratio - 1.0) < 0.10);
    }
    SUBCASE("degenerate bands are flagged") {
        auto crossing = ring(64, 1);
        crossing.cell.side_cavities[0] = {0.0, 1e-12, 0.0};
        const auto b = instantaneous_bandwidth(packet(crossing, 32.0, 5.0, pi / 2), crossing, {0.0, 0.0});
        CHECK(b.ambiguous);
    }
    SUBCASE("empty state") {
        CHECK_THROWS_AS(instantaneous_bandwidth(cmt::StateVector(0.0, 256, 2), lat, {0.0, 0.0}), DomainError);
    }
}

TEST_CASE("static band width") {
    UnitCellSpec cell;
    cell.alpha = 1.0;
    cell.side_cavities = {{10.0, 1.0, 0.0}};
    const double fast = band_full_width(cell, {0.0, 0.0});
    const double slow = band_full_width(cell, {10.0, -10.0});
    CHECK(fast > 3.5);
    // Hold band narrower by roughly (beta/Delta)^2.
    CHECK(slow / fast == doctest::Approx(0.01).epsilon(0.1));
    UnitCellSpec bare;
    bare.alpha = 0.5;
    CHECK(band_full_width(bare, {0.0}) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(band_full_width(bare, {0.0}, 1), DomainError);
}

TEST_CASE("centre of mass velocity") {
    const auto lat = ring(200);
    std::vector<cmt::StateVector> snaps;
    for (int i = 0; i < 6; ++i) {
        const double t = 10.0 * i;
        snaps.push_back(packet(lat, 60.0 + 1.7 * t, 5.0, 0.0, t));
    }
    const auto fit = center_of_mass_velocity(snaps, 0.0, 50.0, 2.0);
    CHECK(fit.velocity == doctest::Approx(3.4).epsilon(1e-6));
    CHECK(fit.snapshots_used == 6);
    CHECK_FALSE(fit.touches_boundary);

    std::vector<cmt::StateVector> still(4, packet(lat, 100.0, 5.0, 0.0));
    for (int i = 0; i < 4; ++i) still[i].t = i;
    CHECK(std::abs(center_of_mass_velocity(still, 0.0, 3.0).velocity) < 1e-12);

    std::vector<cmt::StateVector> edge;
    for (int i = 0; i < 3; ++i) edge.push_back(packet(lat, 195.0, 5.0, 0.0, i));
    CHECK(center_of_mass_velocity(edge, 0.0, 3.0).touches_boundary);

    CHECK_THROWS_AS(center_of_mass_velocity(snaps, 0.0, 15.0), DomainError);
    std::vector<cmt::StateVector> empty(3, cmt::StateVector(0.0, 200, 1));
    for (int i = 0; i < 3; ++i) empty[i].t = i;
    CHECK_THROWS_AS(center_of_mass_velocity(empty, 0.0, 3.0), DomainError);
}

TEST_CASE("delay-bandwidth check") {
    FidelityReport r;
    r.measured_delay = 4.95;
    auto c = delay_bandwidth_check(r, 0.2, 0.04, 5.0);
    CHECK(c.regime == "dynamic");
    CHECK(c.input_exceeds_static);
    CHECK(c.delay_meets_command);
    r.measured_delay = 4.8;
    CHECK_FALSE(delay_bandwidth_check(r, 0.2, 0.04, 5.0).delay_meets_command);
    r.measured_delay = 0.01;
    c = delay_bandwidth_check(r, 0.01, 0.04, 0.0);
    CHECK(c.regime == "static");
    CHECK_FALSE(c.input_exceeds_static);
}
