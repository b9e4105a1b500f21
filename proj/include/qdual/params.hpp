#pragma once

#include <cmath>
#include <string>

#include "qdual/errors.hpp"

namespace qdual {

/// Which diffusion-coefficient convention a run lives in. The quantum sector
/// ties D to hbar/2m; the Smoluchowski sector ties it to kT/(m*gamma).
enum class DConvention { quantum, smoluchowski };

inline const char* to_string(DConvention c) {
    return c == DConvention::quantum ? "quantum" : "smoluchowski";
}

/// Physical constants of a run. Defaults are hbar = m = 1 (so D = 0.5 in the
/// quantum convention) and dl = 1 for the entropy length unit.
struct PhysicalParams {
    double hbar = 1.0;
    double m = 1.0;
    double kappa = 0.0;   // modular coupling, >= 0
    double gamma = 1.0;   // friction rate (Smoluchowski sector)
    double kT = 1.0;      // thermal energy (Smoluchowski sector)
    double dl = 1.0;      // entropy length unit
    DConvention d_convention = DConvention::quantum;

    /// Relative density floor used wherever a field divides by rho.
    double density_floor = 1e-10;

    double D() const {
        return d_convention == DConvention::quantum ? hbar / (2.0 * m) : kT / (m * gamma);
    }

    /// Effective action unit: hbar in the quantum convention, 2mD otherwise.
    /// Keeps u = D grad(rho)/rho and Q = -(hbar_eff^2/2m) lap(sqrt rho)/sqrt rho
    /// mutually consistent in both sectors.
    double hbar_eff() const {
        return d_convention == DConvention::quantum ? hbar : 2.0 * m * D();
    }

    void validate() const {
        if (!(hbar > 0.0)) throw Error("PhysicalParams: hbar must be > 0");
        if (!(m > 0.0)) throw Error("PhysicalParams: m must be > 0");
        if (!(kappa >= 0.0)) throw Error("PhysicalParams: kappa must be >= 0");
        if (!(dl > 0.0)) throw Error("PhysicalParams: dl must be > 0");
        if (d_convention == DConvention::smoluchowski) {
            if (!(gamma > 0.0)) throw Error("PhysicalParams: gamma must be > 0");
            if (!(kT > 0.0)) throw Error("PhysicalParams: kT must be > 0");
        }
        if (!(density_floor > 0.0 && density_floor <= 1e-6))
            throw Error("PhysicalParams: density_floor must be in (0, 1e-6]");
    }
};

}  // namespace qdual
