#pragma once

// Time-dependent, translation-invariant detuning schedules.
//
// A schedule is an initial plateau followed by ordered ramp segments. Each
// segment moves every cavity class from `start` to `end` with an edge profile
// g(x), x = (t - t_center)/t_mod. Supports of consecutive segments may not
// overlap, so at any t at most one segment is active and everything else sits
// on a plateau. The schedule carries no cell index: every cell sees the same
// shifts.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "stoplight/cell.hpp"

namespace stoplight::schedule {

enum class EdgeProfile {
    /// Two half-Gaussian edges exp(-x^2) stitched at x = 0: g(0) = 1/2, C^1, monotone.
    gaussian,
    /// Straight line over x in [-1, 1].
    linear,
};

/// Half-width of a segment's support in units of t_mod. Outside it the
/// Gaussian edge is below exp(-25)/2.
double support_half_width(EdgeProfile profile);

/// Transition fraction g(x) in [0, 1].
double ramp_fraction(EdgeProfile profile, double x);

struct RampSegment {
    double t_center = 0.0;
    double t_mod = 1.0;
    Detunings start;
    Detunings end;
    EdgeProfile profile = EdgeProfile::gaussian;

    double support_begin() const { return t_center - support_half_width(profile) * t_mod; }
    double support_end() const { return t_center + support_half_width(profile) * t_mod; }
    /// Per-class value at t, evaluated from whichever plateau is nearer so that
    /// a time-reversed copy reproduces it bit for bit.
    double value(std::size_t cls, double t) const;
};

class ModulationSchedule {
public:
    /// Static all-zero schedule.
    explicit ModulationSchedule(std::size_t class_count = 1);

    /// Validating constructor: segments sorted and non-overlapping, class counts
    /// consistent, plateaus continuous (segment i+1 starts where i ended), and
    /// every plateau within `budget` when one is given. Throws ValidationError.
    ModulationSchedule(Detunings initial, std::vector<RampSegment> segments,
                       std::optional<double> budget = std::nullopt);

    std::size_t class_count() const noexcept { return initial_.size(); }
    const Detunings& initial() const noexcept { return initial_; }
    const Detunings& final_plateau() const noexcept;
    const std::vector<RampSegment>& segments() const noexcept { return segments_; }
    std::optional<double> budget() const noexcept { return budget_; }
    bool is_static() const noexcept { return segments_.empty(); }

    Detunings evaluate(double t) const;
    /// Allocation-free variant for the integrator; `out.size()` must equal class_count().
    void evaluate_into(double t, std::span<double> out) const;

    /// Largest |shift| reached by any class (ramps are monotone, so plateaus bound it).
    double max_abs_shift() const;

private:
    Detunings initial_;
    std::vector<RampSegment> segments_;
    std::optional<double> budget_;
};

/// First-order index-to-frequency map: raising the index lowers the resonance,
/// delta_omega = -omega * dn/n. Requires |dn/n| < 0.2.
double detuning_from_index_shift(double omega, double dn_over_n);

enum class ModulationMode {
    /// Both cavities of the link move by swing/2 in opposite directions.
    symmetric,
    /// Only the cavity farther from the waveguide moves (by -swing).
    side_only,
    /// Only the cavity nearer the waveguide moves (by +swing).
    waveguide_only,
};

/// One compression stage: sweeps the link detuning omega_{link-1} - omega_{link}
/// by `swing` (upward when positive; class 0 is A, class i is B_i).
struct StageSpec {
    std::size_t link = 1;
    double duration = 1.0;
    double t_mod = 1.0;
    double swing = 20.0;
    ModulationMode mode = ModulationMode::symmetric;
    /// Falls back to ProtocolSpec::profile when unset.
    std::optional<EdgeProfile> profile;
};

/// Capture stages run back to back from `capture_start`; after `hold_duration`
/// the release runs the stages in reverse order, each the time mirror of its
/// capture counterpart about (capture_start + release_end)/2.
struct ProtocolSpec {
    double capture_start = 0.0;
    double hold_duration = 0.0;
    std::vector<StageSpec> stages;
    EdgeProfile profile = EdgeProfile::gaussian;
    std::optional<double> budget;
};

struct ProtocolTiming {
    double capture_start = 0.0;
    double capture_end = 0.0;
    double release_start = 0.0;
    double release_end = 0.0;
    std::vector<double> capture_centers;
    std::vector<double> release_centers;
    /// Release centre minus capture centre of the first stage: the delay an
    /// ideal instantaneous stop would produce.
    double commanded_delay = 0.0;
};

struct Protocol {
    ModulationSchedule schedule;
    ProtocolTiming timing;
};

Protocol build_protocol(const ProtocolSpec& spec, std::size_t class_count);

/// Single-stage convenience form. `symmetric` false moves only the side cavity.
ModulationSchedule build_protocol_schedule(double capture_start, double capture_duration,
                                           double hold_duration, double release_duration,
                                           double t_mod, double swing, bool symmetric,
                                           std::size_t class_count = 2);

inline constexpr double kAdiabaticityFlagThreshold = 0.25;

struct AdiabaticityReport {
    /// max over t of |d(Delta)/dt| / gap(t)^2.
    double metric = 0.0;
    /// Largest |d(Delta)/dt| anywhere on the schedule.
    double max_rate = 0.0;
    double rate_at_max = 0.0;
    double gap_at_max = 0.0;
    double t_at_max = 0.0;
    bool flagged = false;
};

/// Samples each ramp on 2001 points uniformly spaced in x (401 for r >= 2)
/// and differentiates the link detunings with a centred step of 1e-5*t_mod.
/// For r = 1 the gap is min_band_gap; for r >= 2 it is the smallest adjacent
/// band spacing from a 65-point k scan, and the rate is the largest over links.
AdiabaticityReport adiabaticity_metric(const ModulationSchedule& schedule, const UnitCellSpec& cell);

/// CSV of sampled shifts: t, dw_A, dw_B1, ...
void write_schedule_csv(const ModulationSchedule& schedule, double t_begin, double t_end,
                        std::size_t samples, std::ostream& out);

}  // namespace stoplight::schedule
