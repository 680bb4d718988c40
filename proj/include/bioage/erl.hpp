#pragma once

#include <vector>

#include "pde_engine.hpp"

namespace bioage {

// 1 + e_t + mu e_a + (sigma^2/2) e_aa - lambda e = 0, e(T) = 1/lambdaT.
struct ErlEquation {
    static constexpr bool linear_source = true;

    BridgeCoefficients co;
    double x_lo, x_hi;

    double diffusion() const { return co.diffusion(); }
    double drift(double t, double x) const { return co.drift(t, x); }
    double kill(double t, double x) const { return co.hazard(t, x); }
    SourceTerm source(double, double, double) const { return {1.0, 0.0}; }
    double lower(double t) const { return co.dyn.horizon - t + 1.0 / co.model.lambdaT(); }
    double upper(double t) const { return 1.0 / co.hazard(t, x_hi); }
};

struct ErlSurface {
    Surface surface;
    HazardModel model;
    BridgeDynamics dyn;

    ErlEquation equation() const
    {
        const Axis& ax = surface.grid().axis();
        return {{dyn, model, surface.grid().frame()}, ax.x0, ax.back()};
    }
};

inline ErlSurface solve_erl(const HazardModel& model, const BridgeDynamics& dyn, const GridSpec& spec = {})
{
    check_consistent(model, dyn);
    const Grid2D grid = make_grid(dyn, spec);
    const Axis& ax = grid.axis();
    const ErlEquation eq{{dyn, model, grid.frame()}, ax.x0, ax.back()};
    const std::vector<double> terminal(ax.n, 1.0 / model.lambdaT());
    return {solve_backward(grid, FieldKind::erl, eq, terminal), model, dyn};
}

inline double erl_at(const ErlSurface& s, double c_age, double b_age)
{
    const double t = c_age - s.dyn.kappa0;
    require(t >= -1e-12 && t <= s.dyn.horizon + 1e-12, "chronological age outside [kappa0, kappaT]");
    return s.surface.at_age(t, b_age);
}

} // namespace bioage
