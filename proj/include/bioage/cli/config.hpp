#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "../bridge.hpp"
#include "../grid.hpp"
#include "../hazard.hpp"
#include "../mc_oracle.hpp"
#include "../policy.hpp"

namespace bioage::cli {

inline constexpr const char* config_env = "BIOAGE_CONFIG";

// Flat run configuration; defaults are the canonical calibration (0.005@60, 1.0@110, xi=1, sigma=0.3,
// rho=r=0.025). Keys in a config file use the same names as the flags.
struct RunConfig {
    double lambda0 = 0.005;
    double lambdaT = 1.0;
    double kappa0 = 60.0;
    double kappaT = 110.0;
    double xi = 1.0;
    double sigma = 0.3;
    std::optional<double> a0;
    double gamma = 8.0;
    double rho = 0.025;
    double r = 0.025;
    double da = 0.1;
    double dt = 0.05;
    std::optional<double> a_min;
    std::optional<double> a_max;
    std::string frame = "comoving";
    std::size_t n_paths = 100000;
    double mc_dt = 1.0 / 48.0;
    std::uint64_t seed = 20240601;
    unsigned threads = default_workers();
    std::string out_dir = ".";

    void bind(CLI::App& app)
    {
        app.add_option("--lambda0", lambda0, "hazard at kappa0 (per year)")->capture_default_str();
        app.add_option("--lambdaT", lambdaT, "hazard at kappaT (per year)")->capture_default_str();
        app.add_option("--kappa0", kappa0, "initial chronological age")->capture_default_str();
        app.add_option("--kappaT", kappaT, "terminal age kappa0 + T")->capture_default_str();
        app.add_option("--xi", xi, "bridge mean-reversion speed")->capture_default_str();
        app.add_option("--sigma", sigma, "bridge volatility")->capture_default_str();
        app.add_option("--a0", a0, "initial biological age (default kappa0)");
        app.add_option("--gamma", gamma, "longevity risk aversion")->capture_default_str();
        app.add_option("--rho", rho, "subjective discount rate")->capture_default_str();
        app.add_option("--r", r, "risk-free rate")->capture_default_str();
        app.add_option("--da", da, "age step of the PDE grid")->capture_default_str();
        app.add_option("--dt", dt, "base time step of the PDE grid")->capture_default_str();
        app.add_option("--a_min", a_min, "lowest biological age covered (default kappa0 - 40)");
        app.add_option("--a_max", a_max, "highest biological age covered (default kappaT + 30)");
        app.add_option("--frame", frame, "PDE coordinate: comoving or fixed")
            ->check(CLI::IsMember({"comoving", "fixed"}))
            ->capture_default_str();
        app.add_option("--n_paths", n_paths, "Monte Carlo paths")->capture_default_str();
        app.add_option("--mc_dt", mc_dt, "Monte Carlo time step")->capture_default_str();
        app.add_option("--seed", seed, "Monte Carlo seed")->capture_default_str();
        app.add_option("--threads", threads, "worker threads for Monte Carlo and sweeps")->capture_default_str();
        app.add_option("--out_dir", out_dir, "directory for output files")->capture_default_str();
    }

    HazardModel model() const { return HazardModel::from_pinned(lambda0, lambdaT, kappa0, kappaT); }

    BridgeDynamics dynamics() const
    {
        BridgeDynamics d{xi, sigma, kappa0, kappaT - kappa0, a0.value_or(kappa0)};
        d.validate();
        return d;
    }

    Preferences prefs() const
    {
        Preferences p{gamma, rho, r};
        p.validate();
        return p;
    }

    GridSpec grid() const
    {
        GridSpec g;
        g.da = da;
        g.dt = dt;
        g.a_min = a_min;
        g.a_max = a_max;
        g.frame = frame == "fixed" ? Frame::fixed : Frame::comoving;
        return g;
    }

    McOptions mc() const
    {
        require(n_paths > 0 && mc_dt > 0.0, "Monte Carlo settings must be positive");
        return {n_paths, mc_dt, seed, threads};
    }

    // Every module-level precondition, checked before any solve.
    void validate() const
    {
        const HazardModel m = model();
        const BridgeDynamics d = dynamics();
        prefs();
        make_grid(d, grid());
        mc();
        check_consistent(m, d);
    }
};

} // namespace bioage::cli
