#pragma once

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "../calibration.hpp"
#include "../density.hpp"
#include "../deterministic.hpp"
#include "../erl.hpp"
#include "../mc_oracle.hpp"
#include "../policy.hpp"
#include "config.hpp"
#include "csv.hpp"

namespace bioage::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_solver = 1,
    exit_invalid = 2,
    exit_stability = 3,
    exit_bracket = 4,
};

inline std::string output_path(const RunConfig& cfg, const std::string& flag, const std::string& fallback)
{
    if (!flag.empty())
        return flag;
    return (std::filesystem::path(cfg.out_dir) / fallback).string();
}

inline std::vector<double> table_b_ages() { return {45, 50, 55, 60, 65, 70, 75, 80, 85, 90, 95}; }
inline std::vector<double> table_c_ages() { return {60, 65, 70, 75, 80, 85, 90, 95}; }

inline std::vector<std::string> table_header()
{
    std::vector<std::string> h{"b_age"};
    for (double c : table_c_ages())
        h.push_back("c" + label(c));
    return h;
}

// ERL in years (2 decimals) or spending in percent (3 decimals), B-age rows by C-age columns.
inline std::string cmd_table(const RunConfig& cfg, const std::string& which)
{
    cfg.validate();
    const HazardModel model = cfg.model();
    const BridgeDynamics dyn = cfg.dynamics();
    CsvWriter csv(table_header());
    if (which == "erl") {
        const ErlSurface s = solve_erl(model, dyn, cfg.grid());
        for (double b : table_b_ages()) {
            std::vector<std::string> row{label(b)};
            for (double c : table_c_ages())
                row.push_back(fixed(erl_at(s, c, b), 2));
            csv.row(row);
        }
    } else {
        const Preferences prefs = cfg.prefs();
        if (!prefs.is_log())
            terminal_f(prefs, model.lambdaT());
        const PolicySurface ps = solve_spending_policy(prefs, model, dyn, cfg.grid());
        for (double b : table_b_ages()) {
            std::vector<std::string> row{label(b)};
            for (double c : table_c_ages())
                row.push_back(fixed(100.0 * spending_rate(ps, c, b), 3));
            csv.row(row);
        }
    }
    return csv.str();
}

inline std::string quantile_tag(double q)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "q%02d", static_cast<int>(std::lround(100.0 * q)));
    return buf;
}

// Survivor B-age quantiles along C-age and the spending rates they imply.
inline std::string cmd_band(const RunConfig& cfg, double t_step, double t_max, const std::vector<double>& qs)
{
    cfg.validate();
    require(t_step > 0.0, "t_step must be positive");
    require(!qs.empty(), "quantile list is empty");
    const HazardModel model = cfg.model();
    const BridgeDynamics dyn = cfg.dynamics();
    const Preferences prefs = cfg.prefs();
    if (!prefs.is_log())
        terminal_f(prefs, model.lambdaT());
    if (t_max < 0.0)
        t_max = dyn.horizon;
    require(t_max <= dyn.horizon, "t_max beyond T");
    const PolicySurface ps = solve_spending_policy(prefs, model, dyn, cfg.grid());
    const SubDensitySurface dens = solve_density(model, dyn, cfg.grid(), DeltaStart{0.0, dyn.a0});
    std::vector<std::string> header{"t", "c_age"};
    for (double q : qs)
        header.push_back("b_" + quantile_tag(q));
    for (double q : qs)
        header.push_back("spend_" + quantile_tag(q));
    CsvWriter csv(header);
    const auto steps = static_cast<long>(std::floor(t_max / t_step + 1e-9));
    for (long k = 0; k <= steps; ++k) {
        const double t = std::min(static_cast<double>(k) * t_step, dyn.horizon);
        const QuantileCurve qc = dens.quantiles(t, qs);
        std::vector<std::string> row{fixed(t, 4), fixed(dyn.kappa(t), 4)};
        for (double a : qc.alphas)
            row.push_back(fixed(a, 4));
        for (double a : qc.alphas)
            row.push_back(fixed(100.0 * spending_rate(ps, dyn.kappa(t), a), 4));
        csv.row(row);
    }
    return csv.str();
}

// Sub-density and survivor-conditional density over B-age at the requested C-ages.
inline std::string cmd_density(const RunConfig& cfg, const std::vector<double>& c_ages)
{
    cfg.validate();
    require(!c_ages.empty(), "no C-ages requested");
    const HazardModel model = cfg.model();
    const BridgeDynamics dyn = cfg.dynamics();
    const SubDensitySurface dens = solve_density(model, dyn, cfg.grid(), DeltaStart{0.0, dyn.a0});
    CsvWriter csv({"c_age", "b_age", "g", "g_conditional"});
    for (double c : c_ages) {
        const double t = c - dyn.kappa0;
        require(t >= dens.t_first() && t <= dens.t_end(), "C-age " + label(c) + " outside the solved range");
        const auto lv = dens.level_at(t);
        const double S = dens.survival(t);
        const Grid2D& grid = dens.g().grid();
        double peak = 0.0;
        for (double v : lv)
            peak = std::max(peak, v);
        for (std::size_t i = 0; i < lv.size(); ++i) {
            if (lv[i] < 1e-10 * peak)
                continue;
            csv.row({label(c), fixed(grid.b_age(t, grid.axis().x(i)), 4), fixed(lv[i], 10), fixed(lv[i] / S, 10)});
        }
    }
    return csv.str();
}

struct SimulateOutput {
    std::string summary;
    std::string paths;
};

inline SimulateOutput cmd_simulate(const RunConfig& cfg, double t_query, std::size_t paths_count)
{
    cfg.validate();
    const HazardModel model = cfg.model();
    const BridgeDynamics dyn = cfg.dynamics();
    const McOptions opt = cfg.mc();
    if (t_query < 0.0)
        t_query = 0.5 * dyn.horizon;
    require(t_query > 0.0 && t_query < dyn.horizon, "t_query must lie in (0, T)");
    CsvWriter csv({"estimand", "value", "std_error", "n_paths", "seed"});
    auto emit = [&](const std::string& name, double v, double se) {
        csv.row({name, fixed(v, 6), fixed(se, 6), std::to_string(opt.n_paths), std::to_string(opt.seed)});
    };
    const McEstimate e = mc_erl(model, dyn, 0.0, dyn.a0, opt);
    emit("erl_" + label(dyn.kappa0) + "_" + label(dyn.a0), e.value, e.std_error);
    for (double frac : {0.2, 0.5, 0.8}) {
        const double t = frac * dyn.horizon;
        const McEstimate s = mc_survival(model, dyn, t, opt);
        emit("survival_" + label(t), s.value, s.std_error);
    }
    const McQuantiles q = mc_survivor_quantiles(model, dyn, t_query, {0.05, 0.5, 0.95}, opt);
    const std::string at = "_t" + label(t_query);
    for (std::size_t i = 0; i < q.qs.size(); ++i)
        emit("b_" + quantile_tag(q.qs[i]) + at, q.values[i], q.std_errors[i]);
    emit("b_spread" + at, q.values[2] - q.values[0], std::hypot(q.std_errors[0], q.std_errors[2]));

    SimulateOutput out{csv.str(), {}};
    if (paths_count > 0) {
        CsvWriter pc({"path", "t", "b_age", "death_time"});
        for (std::size_t i = 0; i < std::min(paths_count, opt.n_paths); ++i) {
            auto rng = path_stream(opt.seed, i);
            const SimulatedPath p = simulate_path(dyn, model, opt.dt, dyn.horizon, rng);
            const std::string death = p.death_time ? fixed(*p.death_time, 6) : "";
            for (std::size_t k = 0; k < p.times.size(); ++k)
                pc.row({std::to_string(i), fixed(p.times[k], 6), fixed(p.b_ages[k], 6), death});
        }
        out.paths = pc.str();
    }
    return out;
}

inline std::pair<ConsumptionCI, ConsumptionCI> read_ci_file(const std::string& path)
{
    std::vector<ConsumptionCI> cis;
    for (const auto& row : read_csv(path)) {
        if (!row.empty() && row[0] == "c_age")
            continue;
        if (row.size() != 3)
            throw InvalidInput("CI rows must read c_age,rate_lo,rate_hi");
        try {
            cis.push_back({std::stod(row[0]), std::stod(row[1]), std::stod(row[2])});
        } catch (const std::logic_error&) {
            throw InvalidInput("non-numeric CI row in " + path);
        }
    }
    if (cis.size() != 2)
        throw InvalidInput("calibration needs consumption CIs at exactly two C-ages, found " + std::to_string(cis.size()));
    return {cis[0], cis[1]};
}

inline std::string cmd_calibrate(const RunConfig& cfg, const std::string& ci_file, double sigma_lo, double sigma_hi,
                                 double tol)
{
    cfg.validate();
    const auto [first, second] = read_ci_file(ci_file);
    CalibrationSetup s;
    s.model = cfg.model();
    s.dyn = cfg.dynamics();
    s.prefs = cfg.prefs();
    s.grid = cfg.grid();
    if (!s.prefs.is_log())
        terminal_f(s.prefs, s.model.lambdaT());
    const CalibrationResult res = calibrate_sigma(s, first, second, sigma_lo, sigma_hi, tol, cfg.threads);
    const CalibrationFit& b = res.best;
    CsvWriter csv({"quantity", "value"});
    csv.row({"sigma_hat", fixed(b.sigma, 6)});
    csv.row({"objective", fixed(b.objective, 14)});
    csv.row({"evaluations", std::to_string(res.evaluations.size())});
    csv.row({"b_lo_at_c" + label(first.c_age), fixed(b.b_lo, 4)});
    csv.row({"b_hi_at_c" + label(first.c_age), fixed(b.b_hi, 4)});
    csv.row({"rate_lo_fit_at_c" + label(second.c_age), fixed(b.rate_lo, 6)});
    csv.row({"rate_hi_fit_at_c" + label(second.c_age), fixed(b.rate_hi, 6)});
    csv.row({"rate_lo_obs_at_c" + label(second.c_age), fixed(second.rate_lo, 6)});
    csv.row({"rate_hi_obs_at_c" + label(second.c_age), fixed(second.rate_hi, 6)});
    return csv.str();
}

// Characteristics approximation along a(t), next to the PDE rate at the same point.
inline std::string cmd_approx(const RunConfig& cfg, double t_step)
{
    cfg.validate();
    require(t_step > 0.0, "t_step must be positive");
    const HazardModel model = cfg.model();
    const BridgeDynamics dyn = cfg.dynamics();
    const Preferences prefs = cfg.prefs();
    if (!prefs.is_log())
        terminal_f(prefs, model.lambdaT());
    std::vector<double> ts;
    for (long k = 0; static_cast<double>(k) * t_step <= dyn.horizon + 1e-9; ++k)
        ts.push_back(std::min(static_cast<double>(k) * t_step, dyn.horizon));
    const CharacteristicCurve cc = characteristics_approx(prefs, model, dyn, dyn.a0, ts);
    const PolicySurface ps = solve_spending_policy(prefs, model, dyn, cfg.grid());
    CsvWriter csv({"t", "c_age", "b_age", "spend_approx", "spend_pde"});
    for (std::size_t i = 0; i < ts.size(); ++i)
        csv.row({fixed(ts[i], 4), fixed(dyn.kappa(ts[i]), 4), fixed(cc.b_ages[i], 4),
                 fixed(100.0 * cc.spending[i], 6), fixed(100.0 * spending_rate(ps, dyn.kappa(ts[i]), cc.b_ages[i]), 6)});
    return csv.str();
}

template <class Fn>
int guarded(Fn&& fn)
{
    try {
        fn();
        return exit_ok;
    } catch (const StabilityViolation& e) {
        std::cerr << "stability violation: " << e.what() << '\n';
        return exit_stability;
    } catch (const BracketFailure& e) {
        std::cerr << "calibration bracket failure: " << e.what() << '\n';
        return exit_bracket;
    } catch (const InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return exit_invalid;
    } catch (const SolverFailure& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return exit_solver;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return exit_invalid;
    }
}

inline int run(int argc, const char* const* argv)
{
    CLI::App app{"Lifecycle spending under stochastic biological age"};
    app.fallthrough();
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key = value file; flags win")->envname(config_env);
    app.allow_config_extras(CLI::config_extras_mode::error);
    RunConfig cfg;
    cfg.bind(app);
    std::string output;
    app.add_option("-o,--output", output, "output file ('-' for stdout)");

    auto* table = app.add_subcommand("table", "reproduce the ERL or spending table");
    std::string which = "spending";
    table->add_option("which", which, "erl or spending")->check(CLI::IsMember({"erl", "spending"}))->capture_default_str();

    auto* band = app.add_subcommand("band", "survivor B-age quantiles and spending band over time");
    double t_step = 1.0, t_max = -1.0;
    std::vector<double> qs{0.05, 0.5, 0.95};
    band->add_option("--t_step", t_step, "time spacing of rows")->capture_default_str();
    band->add_option("--t_max", t_max, "last time row (default T)");
    band->add_option("--quantiles", qs, "quantile levels")->delimiter(',')->capture_default_str();

    auto* density = app.add_subcommand("density", "survivor B-age density at given C-ages");
    std::vector<double> c_ages{70, 85, 100};
    density->add_option("--c_ages", c_ages, "chronological ages")->delimiter(',')->capture_default_str();

    double q_c = 60, q_b = 60;
    auto* erlq = app.add_subcommand("erl-query", "expected remaining lifetime at one point");
    erlq->add_option("--c_age", q_c, "chronological age")->required();
    erlq->add_option("--b_age", q_b, "biological age")->required();
    auto* spendq = app.add_subcommand("spend-query", "optimal spending rate at one point");
    spendq->add_option("--c_age", q_c, "chronological age")->required();
    spendq->add_option("--b_age", q_b, "biological age")->required();

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates with standard errors");
    double t_query = -1.0;
    std::size_t paths_count = 0;
    std::string paths_file;
    simulate->add_option("--t_query", t_query, "time of the survivor quantiles (default T/2)");
    simulate->add_option("--paths", paths_count, "number of paths to write out")->capture_default_str();
    simulate->add_option("--paths_file", paths_file, "file for the per-path records");

    auto* calibrate = app.add_subcommand("calibrate", "estimate sigma from two consumption CIs");
    std::string ci_file;
    double sigma_lo = 0.0, sigma_hi = 1.0, tol = 1e-3;
    calibrate->add_option("--ci_file", ci_file, "CSV rows c_age,rate_lo,rate_hi")->required();
    calibrate->add_option("--sigma_lo", sigma_lo, "lower end of the sigma bracket")->capture_default_str();
    calibrate->add_option("--sigma_hi", sigma_hi, "upper end of the sigma bracket")->capture_default_str();
    calibrate->add_option("--tol", tol, "golden-section tolerance")->capture_default_str();

    auto* approx = app.add_subcommand("approx", "characteristics approximation of the spending path");
    double approx_step = 1.0;
    approx->add_option("--t_step", approx_step, "time spacing of rows")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_invalid;
    }

    return guarded([&] {
        if (*table) {
            write_atomic(output_path(cfg, output, "table_" + which + ".csv"), cmd_table(cfg, which));
        } else if (*band) {
            write_atomic(output_path(cfg, output, "band.csv"), cmd_band(cfg, t_step, t_max, qs));
        } else if (*density) {
            write_atomic(output_path(cfg, output, "density.csv"), cmd_density(cfg, c_ages));
        } else if (*erlq) {
            cfg.validate();
            const ErlSurface s = solve_erl(cfg.model(), cfg.dynamics(), cfg.grid());
            CsvWriter csv({"c_age", "b_age", "erl"});
            csv.row({label(q_c), label(q_b), fixed(erl_at(s, q_c, q_b), 6)});
            write_atomic(output.empty() ? "-" : output, csv.str());
        } else if (*spendq) {
            cfg.validate();
            const Preferences prefs = cfg.prefs();
            if (!prefs.is_log())
                terminal_f(prefs, cfg.lambdaT);
            const PolicySurface ps = solve_spending_policy(prefs, cfg.model(), cfg.dynamics(), cfg.grid());
            CsvWriter csv({"c_age", "b_age", "gamma", "spending_pct"});
            csv.row({label(q_c), label(q_b), label(prefs.gamma), fixed(100.0 * spending_rate(ps, q_c, q_b), 6)});
            write_atomic(output.empty() ? "-" : output, csv.str());
        } else if (*simulate) {
            const SimulateOutput out = cmd_simulate(cfg, t_query, paths_count);
            write_atomic(output_path(cfg, output, "simulate.csv"), out.summary);
            if (paths_count > 0)
                write_atomic(paths_file.empty() ? output_path(cfg, "", "paths.csv") : paths_file, out.paths);
        } else if (*calibrate) {
            write_atomic(output_path(cfg, output, "calibrate.csv"), cmd_calibrate(cfg, ci_file, sigma_lo, sigma_hi, tol));
        } else if (*approx) {
            write_atomic(output_path(cfg, output, "approx.csv"), cmd_approx(cfg, approx_step));
        }
    });
}

} // namespace bioage::cli
