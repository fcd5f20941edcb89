#include "stoplight/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "stoplight/errors.hpp"
#include "stoplight/io.hpp"

namespace stoplight::scenario {

namespace {

std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

class Checker {
public:
    std::vector<std::string> problems;

    void fail(const std::string& path, const std::string& what) { problems.push_back(path + ": " + what); }

    // nullptr when absent or null; reports a type error otherwise.
    const json* object(const json& parent, std::string_view key, const std::string& path) {
        const json* v = find(parent, key);
        if (!v) return nullptr;
        if (!v->is_object()) {
            fail(join(path, key), "expected an object");
            return nullptr;
        }
        return v;
    }

    const json* array(const json& parent, std::string_view key, const std::string& path) {
        const json* v = find(parent, key);
        if (!v) return nullptr;
        if (!v->is_array()) {
            fail(join(path, key), "expected an array");
            return nullptr;
        }
        return v;
    }

    void allow_only(const json& obj, const std::string& path, std::initializer_list<std::string_view> keys) {
        for (const auto& item : obj.items()) {
            if (std::find(keys.begin(), keys.end(), item.key()) == keys.end())
                fail(join(path, item.key()), "unknown key");
        }
    }

    std::optional<double> number(const json& obj, std::string_view key, const std::string& path) {
        const json* v = find(obj, key);
        if (!v) return std::nullopt;
        if (!v->is_number()) {
            fail(join(path, key), "expected a number");
            return std::nullopt;
        }
        const double d = v->get<double>();
        if (!std::isfinite(d)) {
            fail(join(path, key), "must be finite");
            return std::nullopt;
        }
        return d;
    }

    double number_or(const json& obj, std::string_view key, const std::string& path, double fallback) {
        return number(obj, key, path).value_or(fallback);
    }

    std::optional<std::size_t> count(const json& obj, std::string_view key, const std::string& path) {
        const json* v = find(obj, key);
        if (!v) return std::nullopt;
        return count_value(*v, join(path, key));
    }

    std::optional<std::size_t> count_value(const json& v, const std::string& path) {
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            fail(path, "expected a non-negative integer");
            return std::nullopt;
        }
        return static_cast<std::size_t>(v.get<long long>());
    }

    std::optional<double> number_value(const json& v, const std::string& path) {
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
            fail(path, "expected a finite number");
            return std::nullopt;
        }
        return v.get<double>();
    }

    std::optional<std::string> string(const json& obj, std::string_view key, const std::string& path) {
        const json* v = find(obj, key);
        if (!v) return std::nullopt;
        if (!v->is_string()) {
            fail(join(path, key), "expected a string");
            return std::nullopt;
        }
        return v->get<std::string>();
    }

    template <typename Enum>
    std::optional<Enum> choice(const json& obj, std::string_view key, const std::string& path,
                               std::initializer_list<std::pair<std::string_view, Enum>> options) {
        const auto s = string(obj, key, path);
        if (!s) return std::nullopt;
        for (const auto& [name, value] : options)
            if (name == *s) return value;
        std::string allowed;
        for (const auto& [name, value] : options) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
        fail(join(path, key), "'" + *s + "' is not one of {" + allowed + "}");
        return std::nullopt;
    }

private:
    static const json* find(const json& obj, std::string_view key) {
        const auto it = obj.find(std::string(key));
        if (it == obj.end() || it->is_null()) return nullptr;
        return &*it;
    }
};

json paper_fig3() {
    json snapshots = json::array({0.8, 1.0, 1.25});
    for (int i = 0; i <= 12; ++i) snapshots.push_back(2.0 + 0.25 * i);
    snapshots.push_back(6.5);
    return {
        {"name", "paper_fig3"},
        {"units", {{"mode", "dimensionless"}, {"rate_unit", "beta"}}},
        {"lattice",
         {{"n_cells", 100},
          {"boundary", {{"kind", "absorbing"}, {"rate", 1.0}}},
          {"cell",
           {{"omega_a", 0.0},
            {"alpha", 1.0},
            {"ell", 1.0},
            {"gamma_a", 0.0},
            {"side_cavities", json::array({{{"omega_b", 10.0}, {"beta", 1.0}, {"gamma_b", 0.0}}})}}}}},
        {"sources", json::array({{{"target_cell", 0}, {"peak_time", 0.8}, {"duration", 5.0}, {"amplitude", 1.0}}})},
        {"protocol",
         {{"capture_start", 1.0},
          {"hold", 4.5},
          {"profile", "gaussian"},
          {"budget", 10.0},
          {"stages", json::array({{{"link", 1},
                                   {"duration", 0.5},
                                   {"t_mod", 10.0},
                                   {"swing", 20.0},
                                   {"mode", "symmetric"}}})}}},
        {"integration", {{"t_end", 8.0}, {"sample_interval", 0.1}, {"execution", "auto"}}},
        {"probes", {{"cells", json::array()}, {"snapshot_times", snapshots}}},
        {"analysis",
         {{"hold_window", json::array({2.0, 5.0})},
          {"bandwidth_initial_time", 1.0},
          {"bandwidth_hold_time", 3.5},
          {"release_gate", 0.5},
          {"k_count", 1024}}},
    };
}

json two_stage() {
    json snapshots = json::array({0.8, 1.0});
    for (int i = 0; i <= 4; ++i) snapshots.push_back(16.1 + 0.25 * i);
    return {
        {"name", "two_stage"},
        {"units",
         {{"mode", "physical"},
          {"rate_unit", "beta1"},
          {"reference_wavelength_um", 1.55},
          {"pitch_um", 10.0},
          {"rate_over_omega_a", 1e-5}}},
        {"lattice",
         {{"n_cells", 80},
          {"boundary", {{"kind", "absorbing"}, {"rate", 1.0}}},
          {"cell",
           {{"omega_a", 0.0},
            {"alpha", 1.0},
            {"ell", 1.0},
            {"gamma_a", 0.04},
            {"side_cavities", json::array({{{"omega_b", 10.0}, {"beta", 1.0}, {"gamma_b", 0.04}},
                                           {{"omega_b", -5.0}, {"beta", 0.1}, {"gamma_b", 0.04}}})}}}}},
        {"sources", json::array({{{"target_cell", 0}, {"peak_time", 0.8}, {"duration", 5.0}, {"amplitude", 1.0}}})},
        {"protocol",
         {{"capture_start", 1.0},
          {"hold", 1.25},
          {"profile", "gaussian"},
          {"budget", 10.0},
          {"stages", json::array({{{"link", 1},
                                   {"duration", 0.5},
                                   {"t_mod", 10.0},
                                   {"swing", 20.0},
                                   {"mode", "symmetric"}},
                                  {{"link", 2},
                                   {"duration", 14.5},
                                   {"t_mod", 240.0},
                                   {"swing", -10.0},
                                   {"mode", "side_only"},
                                   {"profile", "linear"}}})}}},
        {"integration", {{"t_end", 34.0}, {"sample_interval", 0.1}, {"execution", "auto"}}},
        {"probes", {{"cells", json::array()}, {"snapshot_times", snapshots}}},
        {"analysis",
         {{"hold_window", json::array({16.1, 17.1})},
          {"bandwidth_initial_time", 1.0},
          {"bandwidth_hold_time", 16.6},
          {"release_gate", 0.5},
          {"k_count", 1024}}},
    };
}

json minimal() {
    return {
        {"name", "minimal"},
        {"lattice", {{"n_cells", 2}, {"cell", {{"omega_a", 0.0}, {"alpha", 1.0}}}}},
    };
}

void parse_units(Checker& c, const json& doc, UnitsSpec& u) {
    const std::string path = "units";
    const json* obj = c.object(doc, "units", "");
    u.rate_unit = "alpha";
    if (!obj) return;
    c.allow_only(*obj, path, {"mode", "rate_unit", "reference_wavelength_um", "pitch_um", "rate_over_omega_a"});
    if (auto m = c.choice<bool>(*obj, "mode", path, {{"dimensionless", false}, {"physical", true}})) u.physical = *m;
    if (auto s = c.string(*obj, "rate_unit", path)) {
        if (s->empty() || s->find_first_of(",\n\"[]") != std::string::npos)
            c.fail(join(path, "rate_unit"), "must be a plain non-empty name");
        else
            u.rate_unit = *s;
    }
    u.wavelength_um = c.number_or(*obj, "reference_wavelength_um", path, u.wavelength_um);
    u.pitch_um = c.number_or(*obj, "pitch_um", path, u.pitch_um);
    u.rate_over_omega_a = c.number_or(*obj, "rate_over_omega_a", path, u.rate_over_omega_a);
    if (!(u.wavelength_um > 0.0)) c.fail(join(path, "reference_wavelength_um"), "must be > 0");
    if (!(u.pitch_um > 0.0)) c.fail(join(path, "pitch_um"), "must be > 0");
    if (u.physical && !(u.rate_over_omega_a > 0.0))
        c.fail(join(path, "rate_over_omega_a"), "physical mode needs the rate unit as a positive fraction of omega_A");
}

void parse_lattice(Checker& c, const json& doc, cmt::LatticeSpec& lat) {
    const std::string path = "lattice";
    const json* obj = c.object(doc, "lattice", "");
    if (!obj) {
        c.fail(path, "required");
        return;
    }
    c.allow_only(*obj, path, {"n_cells", "boundary", "cell"});
    if (auto n = c.count(*obj, "n_cells", path)) {
        if (*n < 2) c.fail(join(path, "n_cells"), "must be >= 2");
        lat.n_cells = *n;
    } else if (!obj->contains("n_cells")) {
        c.fail(join(path, "n_cells"), "required");
    }

    if (const json* b = c.object(*obj, "boundary", path)) {
        const std::string bp = join(path, "boundary");
        c.allow_only(*b, bp, {"kind", "rate"});
        if (auto k = c.choice<cmt::BoundaryKind>(*b, "kind", bp,
                                                 {{"closed", cmt::BoundaryKind::closed},
                                                  {"absorbing", cmt::BoundaryKind::absorbing},
                                                  {"periodic", cmt::BoundaryKind::periodic}}))
            lat.boundary.kind = *k;
        const auto rate = c.number(*b, "rate", bp);
        if (lat.boundary.kind == cmt::BoundaryKind::absorbing) {
            if (!rate || !(*rate > 0.0))
                c.fail(join(bp, "rate"), "absorbing termination needs a rate > 0");
            else
                lat.boundary.rate = *rate;
        } else if (rate && *rate != 0.0) {
            c.fail(join(bp, "rate"), "only meaningful for absorbing termination");
        }
    }

    const json* cell = c.object(*obj, "cell", path);
    const std::string cp = join(path, "cell");
    if (!cell) {
        c.fail(cp, "required");
        return;
    }
    c.allow_only(*cell, cp, {"omega_a", "alpha", "ell", "gamma_a", "side_cavities"});
    auto& spec = lat.cell;
    spec.omega_a = c.number_or(*cell, "omega_a", cp, 0.0);
    spec.alpha = c.number_or(*cell, "alpha", cp, 1.0);
    spec.ell = c.number_or(*cell, "ell", cp, 1.0);
    spec.gamma_a = c.number_or(*cell, "gamma_a", cp, 0.0);
    if (spec.alpha == 0.0) c.fail(join(cp, "alpha"), "must be nonzero (the pulse has to propagate)");
    if (!(spec.ell > 0.0)) c.fail(join(cp, "ell"), "must be > 0");
    if (spec.gamma_a < 0.0) c.fail(join(cp, "gamma_a"), "loss rate must be >= 0");
    if (const json* sides = c.array(*cell, "side_cavities", cp)) {
        for (std::size_t i = 0; i < sides->size(); ++i) {
            const std::string sp = index(join(cp, "side_cavities"), i);
            const json& s = (*sides)[i];
            if (!s.is_object()) {
                c.fail(sp, "expected an object");
                continue;
            }
            c.allow_only(s, sp, {"omega_b", "beta", "gamma_b"});
            SideCavity sc;
            sc.omega_b = c.number_or(s, "omega_b", sp, 0.0);
            const auto beta = c.number(s, "beta", sp);
            if (!beta)
                c.fail(join(sp, "beta"), "required");
            else if (*beta == 0.0)
                c.fail(join(sp, "beta"), "must be nonzero");
            sc.beta = beta.value_or(1.0);
            sc.gamma_b = c.number_or(s, "gamma_b", sp, 0.0);
            if (sc.gamma_b < 0.0) c.fail(join(sp, "gamma_b"), "loss rate must be >= 0");
            spec.side_cavities.push_back(sc);
        }
    }
}

void parse_sources(Checker& c, const json& doc, const cmt::LatticeSpec& lat, std::vector<SourceSpec>& out) {
    const json* arr = c.array(doc, "sources", "");
    if (!arr) {
        if (!doc.contains("sources")) out.push_back(SourceSpec{});
        return;
    }
    for (std::size_t i = 0; i < arr->size(); ++i) {
        const std::string sp = index("sources", i);
        const json& s = (*arr)[i];
        if (!s.is_object()) {
            c.fail(sp, "expected an object");
            continue;
        }
        c.allow_only(s, sp, {"target_cell", "carrier", "peak_time", "duration", "amplitude"});
        SourceSpec src;
        if (auto t = c.count(s, "target_cell", sp)) {
            src.target_cell = *t;
            if (*t >= lat.n_cells)
                c.fail(join(sp, "target_cell"), "cell " + std::to_string(*t) + " outside the lattice (N = " +
                                                    std::to_string(lat.n_cells) + ")");
        }
        src.carrier = c.number(s, "carrier", sp);
        src.peak_time = c.number_or(s, "peak_time", sp, src.peak_time);
        src.duration = c.number_or(s, "duration", sp, src.duration);
        src.amplitude = c.number_or(s, "amplitude", sp, src.amplitude);
        if (!(src.duration > 0.0)) c.fail(join(sp, "duration"), "must be > 0");
        if (src.peak_time < 0.0) c.fail(join(sp, "peak_time"), "must be >= 0");
        out.push_back(src);
    }
}

void parse_protocol(Checker& c, const json& doc, const cmt::LatticeSpec& lat, std::optional<ProtocolScenario>& out) {
    const std::string path = "protocol";
    const json* obj = c.object(doc, "protocol", "");
    if (!obj) return;
    c.allow_only(*obj, path, {"capture_start", "hold", "profile", "budget", "stages"});
    ProtocolScenario p;
    const auto profile_of = [&](const json& o, const std::string& op) {
        return c.choice<schedule::EdgeProfile>(
            o, "profile", op, {{"gaussian", schedule::EdgeProfile::gaussian}, {"linear", schedule::EdgeProfile::linear}});
    };
    p.capture_start = c.number_or(*obj, "capture_start", path, p.capture_start);
    p.hold = c.number_or(*obj, "hold", path, p.hold);
    if (auto pr = profile_of(*obj, path)) p.profile = *pr;
    p.budget = c.number(*obj, "budget", path);
    if (p.capture_start < 0.0) c.fail(join(path, "capture_start"), "must be >= 0");
    if (!(p.hold > 0.0)) c.fail(join(path, "hold"), "must be > 0");
    if (p.budget && !(*p.budget > 0.0)) c.fail(join(path, "budget"), "must be > 0");
    const std::size_t r = lat.cell.side_count();
    if (r == 0) c.fail(path, "a modulation protocol needs at least one side cavity");

    const json* stages = c.array(*obj, "stages", path);
    if (!stages || stages->empty()) c.fail(join(path, "stages"), "at least one stage required");
    if (stages) {
        for (std::size_t i = 0; i < stages->size(); ++i) {
            const std::string sp = index(join(path, "stages"), i);
            const json& s = (*stages)[i];
            if (!s.is_object()) {
                c.fail(sp, "expected an object");
                continue;
            }
            c.allow_only(s, sp, {"link", "duration", "t_mod", "swing", "mode", "profile"});
            schedule::StageSpec st;
            if (auto l = c.count(s, "link", sp)) st.link = *l;
            if (r > 0 && (st.link < 1 || st.link > r))
                c.fail(join(sp, "link"), "must be in [1, " + std::to_string(r) + "]");
            st.duration = c.number_or(s, "duration", sp, 0.5);
            st.t_mod = c.number_or(s, "t_mod", sp, 10.0);
            st.swing = c.number_or(s, "swing", sp, 20.0);
            if (auto m = c.choice<schedule::ModulationMode>(s, "mode", sp,
                                                            {{"symmetric", schedule::ModulationMode::symmetric},
                                                             {"side_only", schedule::ModulationMode::side_only},
                                                             {"waveguide_only",
                                                              schedule::ModulationMode::waveguide_only}}))
                st.mode = *m;
            st.profile = profile_of(s, sp);
            if (!(st.duration > 0.0)) c.fail(join(sp, "duration"), "must be > 0");
            if (!(st.t_mod > 0.0)) c.fail(join(sp, "t_mod"), "must be > 0");
            p.stages.push_back(st);
        }
    }
    out = p;
}

void parse_integration(Checker& c, const json& doc, IntegrationSpec& in) {
    const std::string path = "integration";
    const json* obj = c.object(doc, "integration", "");
    if (!obj) return;
    c.allow_only(*obj, path, {"dt", "omega_ref", "t_end", "sample_interval", "execution"});
    in.dt = c.number(*obj, "dt", path);
    in.omega_ref = c.number(*obj, "omega_ref", path);
    in.t_end = c.number_or(*obj, "t_end", path, in.t_end);
    in.sample_interval = c.number_or(*obj, "sample_interval", path, in.sample_interval);
    if (in.dt && !(*in.dt > 0.0)) c.fail(join(path, "dt"), "must be > 0");
    if (!(in.t_end > 0.0)) c.fail(join(path, "t_end"), "must be > 0");
    if (!(in.sample_interval > 0.0)) c.fail(join(path, "sample_interval"), "must be > 0");
    enum class Exec { automatic, serial, parallel };
    if (auto e = c.choice<Exec>(*obj, "execution", path,
                                {{"auto", Exec::automatic}, {"serial", Exec::serial}, {"parallel", Exec::parallel}})) {
        if (*e == Exec::serial) in.execution = cmt::Execution::serial;
        if (*e == Exec::parallel) in.execution = cmt::Execution::parallel;
    }
}

void parse_probes(Checker& c, const json& doc, const cmt::LatticeSpec& lat, double t_end, ProbeSpec& pr) {
    const std::string path = "probes";
    const json* obj = c.object(doc, "probes", "");
    if (!obj) return;
    c.allow_only(*obj, path, {"cells", "snapshot_times"});
    if (const json* cells = c.array(*obj, "cells", path)) {
        for (std::size_t i = 0; i < cells->size(); ++i) {
            const std::string ip = index(join(path, "cells"), i);
            if (auto v = c.count_value((*cells)[i], ip)) {
                if (*v >= lat.n_cells)
                    c.fail(ip, "cell " + std::to_string(*v) + " outside the lattice (N = " +
                                   std::to_string(lat.n_cells) + ")");
                pr.cells.push_back(*v);
            }
        }
    }
    if (const json* times = c.array(*obj, "snapshot_times", path)) {
        for (std::size_t i = 0; i < times->size(); ++i) {
            const std::string ip = index(join(path, "snapshot_times"), i);
            if (auto v = c.number_value((*times)[i], ip)) {
                if (*v < 0.0 || *v > t_end) c.fail(ip, "must lie in [0, integration.t_end]");
                pr.snapshot_times.push_back(*v);
            }
        }
    }
}

void parse_analysis(Checker& c, const json& doc, AnalysisSpec& an) {
    const std::string path = "analysis";
    const json* obj = c.object(doc, "analysis", "");
    if (!obj) return;
    c.allow_only(*obj, path,
                 {"hold_window", "bandwidth_initial_time", "bandwidth_hold_time", "release_gate", "k_count"});
    if (const json* w = c.array(*obj, "hold_window", path)) {
        const std::string wp = join(path, "hold_window");
        if (w->size() != 2) {
            c.fail(wp, "expected [start, end]");
        } else {
            const auto a = c.number_value((*w)[0], index(wp, 0));
            const auto b = c.number_value((*w)[1], index(wp, 1));
            if (a && b) {
                if (!(*b > *a)) c.fail(wp, "end must exceed start");
                an.hold_window = std::array<double, 2>{*a, *b};
            }
        }
    }
    an.bandwidth_initial_time = c.number(*obj, "bandwidth_initial_time", path);
    an.bandwidth_hold_time = c.number(*obj, "bandwidth_hold_time", path);
    an.release_gate = c.number_or(*obj, "release_gate", path, an.release_gate);
    if (!(an.release_gate > 0.0)) c.fail(join(path, "release_gate"), "must be > 0");
    if (auto k = c.count(*obj, "k_count", path)) {
        if (*k < 5) c.fail(join(path, "k_count"), "must be >= 5");
        an.k_count = *k;
    }
}

}  // namespace

std::vector<std::string> preset_names() { return {"minimal", "paper_fig3", "two_stage"}; }

json preset(std::string_view name) {
    if (name == "paper_fig3") return paper_fig3();
    if (name == "two_stage") return two_stage();
    if (name == "minimal") return minimal();
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ValidationError({"preset: unknown preset '" + std::string(name) + "' (known: " + known + ")"});
}

json resolve_document(const json& document) {
    if (!document.is_object()) throw ValidationError({"<root>: scenario must be a JSON object"});
    const auto it = document.find("preset");
    if (it == document.end()) return document;
    if (!it->is_string()) throw ValidationError({"preset: expected a string"});
    json merged = preset(it->get<std::string>());
    json overrides = document;
    overrides.erase("preset");
    merged.merge_patch(overrides);
    return merged;
}

Scenario parse_scenario(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ValidationError({std::string("<root>: not valid JSON (") + e.what() + ")"});
    }
    return parse_scenario_json(doc);
}

Scenario parse_scenario_json(const json& document) {
    Scenario sc;
    sc.canonical = resolve_document(document);
    const json& doc = sc.canonical;
    Checker c;
    c.allow_only(doc, "",
                 {"name", "units", "lattice", "sources", "protocol", "integration", "probes", "analysis"});
    sc.name = c.string(doc, "name", "").value_or("scenario");
    parse_units(c, doc, sc.units);
    parse_lattice(c, doc, sc.lattice);
    parse_sources(c, doc, sc.lattice, sc.sources);
    parse_protocol(c, doc, sc.lattice, sc.protocol);
    parse_integration(c, doc, sc.integration);
    parse_probes(c, doc, sc.lattice, sc.integration.t_end, sc.probes);
    parse_analysis(c, doc, sc.analysis);

    // Timeline consistency, checked against the analytic transit estimate;
    // the run re-checks with the measured t_pass.
    if (c.problems.empty() && sc.protocol) {
        const double tp = static_cast<double>(sc.lattice.n_cells) * sc.lattice.cell.ell /
                          (2.0 * std::abs(sc.lattice.cell.alpha));
        schedule::ProtocolSpec ps;
        ps.capture_start = sc.protocol->capture_start * tp;
        ps.hold_duration = sc.protocol->hold * tp;
        ps.profile = sc.protocol->profile;
        ps.budget = sc.protocol->budget;
        ps.stages = sc.protocol->stages;
        for (auto& st : ps.stages) st.duration *= tp;
        try {
            const auto p = schedule::build_protocol(ps, sc.lattice.classes());
            if (p.timing.release_end > sc.integration.t_end * tp)
                c.fail("integration.t_end", "ends before the release window (" +
                                                io::fmt(p.timing.release_end / tp) + " t_pass)");
        } catch (const ValidationError& e) {
            for (const auto& p : e.problems()) c.fail("protocol", p);
        }
    }
    if (!c.problems.empty()) throw ValidationError(std::move(c.problems));
    sc.hash = io::sha256_hex(sc.canonical.dump());
    return sc;
}

double waveguide_band_center(const UnitCellSpec& cell, const Detunings& detunings) {
    const auto h = bands::bloch_matrix(cell, detunings, 0.5 * std::numbers::pi / cell.ell);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h, true);
    if (es.info() != Eigen::Success) throw RuntimeFailure("eigen-solve failed at the band centre");
    Eigen::Index best = 0;
    double weight = -1.0;
    for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) {
        const double w = std::norm(es.eigenvectors()(0, j)) / es.eigenvectors().col(j).squaredNorm();
        if (w > weight) {
            weight = w;
            best = j;
        }
    }
    return es.eigenvalues()(best).real();
}

}  // namespace stoplight::scenario
