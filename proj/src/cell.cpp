#include "stoplight/cell.hpp"

#include <cmath>
#include <string>

#include "stoplight/errors.hpp"

namespace stoplight {

void UnitCellSpec::validate() const {
    std::vector<std::string> problems;
    auto finite = [&](double v, const std::string& path) {
        if (!std::isfinite(v)) problems.push_back(path + ": must be finite");
    };
    finite(omega_a, "cell.omega_a");
    finite(alpha, "cell.alpha");
    finite(ell, "cell.ell");
    finite(gamma_a, "cell.gamma_a");
    if (!(ell > 0.0)) problems.push_back("cell.ell: must be > 0");
    if (gamma_a < 0.0) problems.push_back("cell.gamma_a: loss rate must be >= 0");
    for (std::size_t i = 0; i < side_cavities.size(); ++i) {
        const auto& sc = side_cavities[i];
        const std::string base = "cell.side_cavities[" + std::to_string(i) + "]";
        finite(sc.omega_b, base + ".omega_b");
        finite(sc.beta, base + ".beta");
        finite(sc.gamma_b, base + ".gamma_b");
        if (sc.beta == 0.0) problems.push_back(base + ".beta: must be nonzero");
        if (sc.gamma_b < 0.0) problems.push_back(base + ".gamma_b: loss rate must be >= 0");
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

double shifted_resonance(const UnitCellSpec& cell, const Detunings& d, std::size_t cls) {
    const double shift = cls < d.size() ? d[cls] : 0.0;
    if (cls == 0) return cell.omega_a + shift;
    return cell.side_cavities.at(cls - 1).omega_b + shift;
}

double waveguide_detuning(const UnitCellSpec& cell, const Detunings& d) {
    if (cell.side_cavities.empty())
        throw UnsupportedConfiguration("detuning requires at least one side cavity");
    return shifted_resonance(cell, d, 0) - shifted_resonance(cell, d, 1);
}

}  // namespace stoplight
