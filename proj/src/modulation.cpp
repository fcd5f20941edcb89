#include "stoplight/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "stoplight/errors.hpp"
#include "stoplight/io.hpp"
#include "stoplight/lattice_bands.hpp"

namespace stoplight::schedule {

namespace {

// Weight of the far plateau seen from the nearer one; symmetric in x, 1/2 at x = 0.
double edge_weight(EdgeProfile profile, double x) {
    switch (profile) {
        case EdgeProfile::gaussian:
            return 0.5 * std::exp(-x * x);
        case EdgeProfile::linear:
            return std::max(0.0, 0.5 * (1.0 - std::abs(x)));
    }
    return 0.0;
}

std::string seg_path(std::size_t i) { return "schedule.segments[" + std::to_string(i) + "]"; }

}  // namespace

double support_half_width(EdgeProfile profile) {
    return profile == EdgeProfile::gaussian ? 5.0 : 1.0;
}

double ramp_fraction(EdgeProfile profile, double x) {
    const double w = edge_weight(profile, x);
    return x < 0.0 ? w : 1.0 - w;
}

double RampSegment::value(std::size_t cls, double t) const {
    const double x = (t - t_center) / t_mod;
    const double w = edge_weight(profile, x);
    if (x < 0.0) return start[cls] + (end[cls] - start[cls]) * w;
    return end[cls] + (start[cls] - end[cls]) * w;
}

ModulationSchedule::ModulationSchedule(std::size_t class_count) : initial_(class_count, 0.0) {}

ModulationSchedule::ModulationSchedule(Detunings initial, std::vector<RampSegment> segments,
                                       std::optional<double> budget)
    : initial_(std::move(initial)), segments_(std::move(segments)), budget_(budget) {
    std::vector<std::string> problems;
    const std::size_t n = initial_.size();
    if (n == 0) problems.push_back("schedule: at least one cavity class required");
    const Detunings* plateau = &initial_;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const auto& s = segments_[i];
        if (!(s.t_mod > 0.0) || !std::isfinite(s.t_mod)) problems.push_back(seg_path(i) + ".t_mod: must be > 0");
        if (!std::isfinite(s.t_center)) problems.push_back(seg_path(i) + ".t_center: must be finite");
        if (s.start.size() != n || s.end.size() != n) {
            problems.push_back(seg_path(i) + ": class count mismatch");
            continue;
        }
        if (s.start != *plateau) problems.push_back(seg_path(i) + ".start: must equal the preceding plateau");
        if (i > 0 && s.support_begin() < segments_[i - 1].support_end())
            problems.push_back(seg_path(i) + ": ramp overlaps the previous ramp (supports are t_center +/- " +
                               io::fmt(support_half_width(s.profile)) + "*t_mod)");
        plateau = &s.end;
    }
    if (budget_) {
        if (!(*budget_ >= 0.0)) {
            problems.push_back("schedule.budget: must be >= 0");
        } else if (problems.empty()) {
            const double peak = max_abs_shift();
            if (peak > *budget_ * (1.0 + 1e-12))
                problems.push_back("schedule: peak shift " + io::fmt(peak) + " exceeds modulator budget " +
                                   io::fmt(*budget_));
        }
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

const Detunings& ModulationSchedule::final_plateau() const noexcept {
    return segments_.empty() ? initial_ : segments_.back().end;
}

void ModulationSchedule::evaluate_into(double t, std::span<double> out) const {
    const Detunings* plateau = &initial_;
    for (const auto& s : segments_) {
        if (t < s.support_begin()) break;
        if (t <= s.support_end()) {
            for (std::size_t c = 0; c < out.size(); ++c) out[c] = s.value(c, t);
            return;
        }
        plateau = &s.end;
    }
    std::copy(plateau->begin(), plateau->end(), out.begin());
}

Detunings ModulationSchedule::evaluate(double t) const {
    Detunings out(class_count());
    evaluate_into(t, out);
    return out;
}

double ModulationSchedule::max_abs_shift() const {
    double peak = 0.0;
    for (double v : initial_) peak = std::max(peak, std::abs(v));
    for (const auto& s : segments_)
        for (double v : s.end) peak = std::max(peak, std::abs(v));
    return peak;
}

double detuning_from_index_shift(double omega, double dn_over_n) {
    if (!(std::abs(dn_over_n) < 0.2))
        throw DomainError("detuning_from_index_shift: |dn/n| must be < 0.2 for first-order validity");
    return -omega * dn_over_n;
}

Protocol build_protocol(const ProtocolSpec& spec, std::size_t class_count) {
    std::vector<std::string> problems;
    if (spec.stages.empty()) problems.push_back("protocol.stages: at least one stage required");
    if (!(spec.hold_duration > 0.0)) problems.push_back("protocol.hold_duration: must be > 0");
    for (std::size_t i = 0; i < spec.stages.size(); ++i) {
        const auto& st = spec.stages[i];
        const std::string base = "protocol.stages[" + std::to_string(i) + "]";
        if (st.link < 1 || st.link >= class_count)
            problems.push_back(base + ".link: must be in [1, " + std::to_string(class_count - 1) + "]");
        if (!(st.duration > 0.0)) problems.push_back(base + ".duration: must be > 0");
        if (!(st.t_mod > 0.0)) problems.push_back(base + ".t_mod: must be > 0");
        if (!std::isfinite(st.swing)) problems.push_back(base + ".swing: must be finite");
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));

    Protocol out;
    auto& timing = out.timing;
    timing.capture_start = spec.capture_start;

    std::vector<Detunings> changes;
    for (const auto& st : spec.stages) {
        Detunings change(class_count, 0.0);
        const std::size_t upper = st.link - 1;  // nearer the waveguide
        const std::size_t lower = st.link;
        switch (st.mode) {
            case ModulationMode::symmetric:
                change[upper] = 0.5 * st.swing;
                change[lower] = -0.5 * st.swing;
                break;
            case ModulationMode::side_only:
                change[lower] = -st.swing;
                break;
            case ModulationMode::waveguide_only:
                change[upper] = st.swing;
                break;
        }
        changes.push_back(std::move(change));
    }

    double window_start = spec.capture_start;
    for (const auto& st : spec.stages) {
        timing.capture_centers.push_back(window_start + 0.5 * st.duration);
        window_start += st.duration;
    }
    timing.capture_end = window_start;
    timing.release_start = timing.capture_end + spec.hold_duration;
    timing.release_end = timing.release_start + (timing.capture_end - timing.capture_start);
    const double mirror = timing.capture_start + timing.release_end;

    std::vector<RampSegment> segments;
    Detunings plateau(class_count, 0.0);
    for (std::size_t i = 0; i < spec.stages.size(); ++i) {
        RampSegment seg;
        seg.t_center = timing.capture_centers[i];
        seg.t_mod = spec.stages[i].t_mod;
        seg.profile = spec.stages[i].profile.value_or(spec.profile);
        seg.start = plateau;
        for (std::size_t c = 0; c < class_count; ++c) plateau[c] += changes[i][c];
        seg.end = plateau;
        segments.push_back(std::move(seg));
    }
    for (std::size_t r = spec.stages.size(); r-- > 0;) {
        const RampSegment cap = segments[r];
        RampSegment seg;
        seg.t_center = mirror - cap.t_center;
        seg.t_mod = cap.t_mod;
        seg.profile = cap.profile;
        seg.start = cap.end;
        seg.end = cap.start;
        timing.release_centers.push_back(seg.t_center);
        segments.push_back(std::move(seg));
    }
    // release_centers in stage order
    std::reverse(timing.release_centers.begin(), timing.release_centers.end());
    timing.commanded_delay = timing.release_centers.front() - timing.capture_centers.front();

    out.schedule = ModulationSchedule(Detunings(class_count, 0.0), std::move(segments), spec.budget);
    return out;
}

ModulationSchedule build_protocol_schedule(double capture_start, double capture_duration, double hold_duration,
                                           double release_duration, double t_mod, double swing, bool symmetric,
                                           std::size_t class_count) {
    if (!(release_duration > 0.0)) throw ValidationError({"protocol.release_duration: must be > 0"});
    ProtocolSpec spec;
    spec.capture_start = capture_start;
    spec.hold_duration = hold_duration;
    spec.stages.push_back({1, capture_duration, t_mod, swing,
                           symmetric ? ModulationMode::symmetric : ModulationMode::side_only});
    auto protocol = build_protocol(spec, class_count);
    if (release_duration == capture_duration) return std::move(protocol.schedule);

    // Same ramp shape, centred in the requested release window.
    auto segments = protocol.schedule.segments();
    segments.back().t_center = protocol.timing.release_start + 0.5 * release_duration;
    return ModulationSchedule(protocol.schedule.initial(), std::move(segments));
}

AdiabaticityReport adiabaticity_metric(const ModulationSchedule& schedule, const UnitCellSpec& cell) {
    if (cell.side_count() == 0) throw UnsupportedConfiguration("adiabaticity_metric requires r >= 1");
    if (schedule.class_count() != cell.class_count())
        throw ValidationError({"schedule: class count does not match the cell"});
    AdiabaticityReport report;
    const bool single = cell.side_count() == 1;
    const std::size_t samples = single ? 2001 : 401;
    const std::size_t links = cell.side_count();

    auto link_detuning = [&](const Detunings& d, std::size_t link) {
        return shifted_resonance(cell, d, link - 1) - shifted_resonance(cell, d, link);
    };

    Detunings lo(cell.class_count()), hi(cell.class_count()), mid(cell.class_count());
    for (const auto& seg : schedule.segments()) {
        const double half = support_half_width(seg.profile);
        const double h = 1e-5 * seg.t_mod;
        for (std::size_t s = 0; s < samples; ++s) {
            const double x = -half + 2.0 * half * static_cast<double>(s) / static_cast<double>(samples - 1);
            const double t = seg.t_center + x * seg.t_mod;
            schedule.evaluate_into(t - h, lo);
            schedule.evaluate_into(t + h, hi);
            double rate = 0.0;
            for (std::size_t link = 1; link <= links; ++link)
                rate = std::max(rate, std::abs(link_detuning(hi, link) - link_detuning(lo, link)) / (2.0 * h));
            if (rate == 0.0) continue;
            schedule.evaluate_into(t, mid);
            const double gap = single ? bands::min_band_gap(cell, waveguide_detuning(cell, mid))
                                      : bands::min_adjacent_band_spacing(cell, mid, 65);
            const double m = rate / (gap * gap);
            if (m > report.metric) {
                report.metric = m;
                report.rate_at_max = rate;
                report.gap_at_max = gap;
                report.t_at_max = t;
            }
            report.max_rate = std::max(report.max_rate, rate);
        }
    }
    report.flagged = report.metric > kAdiabaticityFlagThreshold;
    return report;
}

void write_schedule_csv(const ModulationSchedule& schedule, double t_begin, double t_end, std::size_t samples,
                        std::ostream& out) {
    out << "t,dw_A";
    for (std::size_t c = 1; c < schedule.class_count(); ++c) out << ",dw_B" << c;
    out << '\n';
    Detunings d(schedule.class_count());
    const std::size_t n = std::max<std::size_t>(samples, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = t_begin + (t_end - t_begin) * static_cast<double>(i) / static_cast<double>(n - 1);
        schedule.evaluate_into(t, d);
        out << io::fmt(t);
        for (double v : d) out << ',' << io::fmt(v);
        out << '\n';
    }
}

}  // namespace stoplight::schedule
