// Command-line entry point. Every solver and experiment is exposed as a
// subcommand reading one JSON config (all keys optional, overridable with
// dotted --set paths) and writing deterministic file artifacts plus a run
// manifest. Exit codes: 0 success, 2 config error, 3 solver failure,
// 4 I/O error; failures print a one-line JSON error record to stderr.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfgpow/config.hpp"
#include "mfgpow/io.hpp"
#include "mfgpow/version.hpp"

namespace {

using nlohmann::json;
using namespace mfgpow;

struct RunContext {
    std::string dir;
    json residuals = json::object();
    std::vector<std::string> outputs;

    // Registers the artifact and returns its full path.
    std::string path(const std::string& name) {
        outputs.push_back(name);
        return dir + "/" + name;
    }
};

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open for writing: " + path);
    }
    out << j.dump(2) << '\n';
    out.flush();
    if (!out) {
        throw IoError("write failed: " + path);
    }
}

void cmd_solve1d(const RunConfig& cfg, RunContext& ctx) {
    SolveStats st;
    const ValueFunction1D u =
        solve_master_1d(cfg.model, grid_k_of(cfg), cfg.solver, &st);
    write_value_csv(ctx.path("value.csv"), u);
    ctx.residuals["master_1d"] = st.residual;
    ctx.residuals["iterations"] = st.iterations;
}

void cmd_stationary(const RunConfig& cfg, RunContext& ctx) {
    const EquilibriumReport rep = stationary_report(cfg.model);
    write_json_file(ctx.path("stationary.json"),
                    json{{"k_star", rep.k_star},
                         {"u_star", rep.u_star},
                         {"pi_star", rep.pi_star},
                         {"residual_norm", rep.residual_norm},
                         {"iterations", rep.iterations}});
    ctx.residuals["stationary_identity"] = rep.residual_norm;
}

void cmd_trajectory(const RunConfig& cfg, RunContext& ctx) {
    SolveStats st;
    const Grid1D g = grid_k_of(cfg);
    const ValueFunction1D u = solve_master_1d(cfg.model, g, cfg.solver, &st);
    write_value_csv(ctx.path("value.csv"), u);
    const Trajectory tr =
        simulate_trajectory(cfg.model, u, cfg.k0, cfg.horizon, cfg.dt);
    write_trajectory_csv(ctx.path("trajectory.csv"), tr.times, tr.values);
    ctx.residuals["master_1d"] = st.residual;
}

void cmd_noise(const RunConfig& cfg, RunContext& ctx) {
    SolveStats st;
    const Grid1D gk = grid_k_of(cfg);
    const std::size_t np = cfg.np > 0 ? cfg.np : 41;
    const ValueFunction2D u =
        solve_master_2d(cfg.model, cfg.price, gk, np, cfg.solver, &st);
    write_value2d_csv(ctx.path("value2d.csv"), u);
    write_target_curve_csv(ctx.path("target_curve.csv"),
                           target_curve(u, cfg.model));
    const double dt = cfg.dt > 0.0 ? cfg.dt : 0.01 / cfg.model.delta;
    const SdePath sp = simulate_sde(cfg.model, cfg.price, u, cfg.k0, cfg.p0,
                                    cfg.horizon, dt, cfg.seed);
    write_sde_path_csv(ctx.path("sde_path.csv"), sp);
    ctx.residuals["master_2d"] = st.residual;
}

void cmd_twopop(const RunConfig& cfg, RunContext& ctx) {
    SolveStats st;
    const auto [gk, gl] = pair_grids_of(cfg, 601);
    const ValueFunctionPair uv =
        solve_system(cfg.two_pop, gk, gl, cfg.solver, &st);
    write_pair_csv(ctx.path("pair.csv"), uv);
    const StationaryPair sp = stationary_state_2pop(cfg.two_pop, uv);
    write_json_file(ctx.path("stationary_pair.json"),
                    json{{"x0", sp.x0},
                         {"y0", sp.y0},
                         {"residual", sp.residual},
                         {"iterations", sp.iterations}});
    const PairPath path =
        simulate_2pop(cfg.two_pop, uv, cfg.k0, cfg.l0, cfg.horizon, cfg.dt);
    write_pair_path_csv(ctx.path("pair_path.csv"), path);
    ctx.residuals["system"] = system_residual(cfg.two_pop, uv);
}

void cmd_twopop_noise(const RunConfig& cfg, RunContext& ctx) {
    SolveStats st;
    const auto [gk, gl] = pair_grids_of(cfg, 121);
    const std::size_t np = cfg.np > 0 ? cfg.np : 5;
    const NoisePairSolution sol = solve_2pop_noise(
        cfg.two_pop, cfg.price, cfg.lam2_adjust, gk, gl, np, cfg.solver, &st);
    write_pair_csv(ctx.path("pair_slice.csv"), sol.slice_pair(np / 2));
    const TargetSurface ts =
        target_surface(cfg.two_pop, cfg.price, cfg.lam2_adjust, sol);
    write_json_file(ctx.path("target_surface.json"),
                    json{{"p_nodes", ts.p_nodes},
                         {"k_star", ts.k_star},
                         {"l_star", ts.l_star}});
    ctx.residuals["system_noise"] =
        system_residual_noise(cfg.two_pop, cfg.price, cfg.lam2_adjust, sol);
}

void cmd_obstacle(const RunConfig& cfg, RunContext& ctx) {
    SolveStats st;
    const Grid1D g = grid_k_of(cfg);
    const ObstacleSolution sol = solve_obstacle(cfg.model, g, cfg.solver, &st);
    write_value_csv(ctx.path("value.csv"), sol.u);
    write_json_file(ctx.path("obstacle.json"), json{{"k_star", sol.k_star}});
    const Trajectory tr =
        simulate_obstacle_trajectory(cfg.model, sol, cfg.k0, cfg.horizon, cfg.dt);
    write_trajectory_csv(ctx.path("trajectory.csv"), tr.times, tr.values);
    ctx.residuals["obstacle"] = st.residual;
    ctx.residuals["k_star"] = sol.k_star;
}

void cmd_penalized(const RunConfig& cfg, RunContext& ctx) {
    const Grid1D g = grid_k_of(cfg);
    const std::vector<PenalizedRow> rows =
        convergence_study(cfg.model, cfg.etas, g, cfg.solver);
    write_convergence_csv(ctx.path("convergence.csv"), rows);
    SolveStats st;
    const PenalizedSolution ps =
        solve_penalized(cfg.model, cfg.etas.back(), g, cfg.solver, &st);
    write_value_csv(ctx.path("value.csv"), ps.u);
    ctx.residuals["penalized"] = st.residual;
    ctx.residuals["sup_gap_last"] = rows.back().sup_gap;
}

void cmd_hjb_check(const RunConfig& cfg, RunContext& ctx) {
    ModelParams p = cfg.model;
    if (p.eps == 0.0) {
        p = default_potential_params(p);  // the log payoff needs eps > 0
    }
    SolveStats st;
    const Grid1D g = grid_k_of(cfg);
    const PotentialSolution phi = solve_hjb(p, g, cfg.solver, &st);
    const ValueFunction1D u = solve_master_1d(p, g, cfg.solver);
    write_potential_csv(ctx.path("potential.csv"), phi, u);
    const double gap = potential_check(phi, u);
    write_json_file(
        ctx.path("hjb.json"),
        json{{"sup_gap", gap},
             {"stationary_from_gradient", planner_stationary(p, phi)},
             {"stationary_closed_form", stationary_state_closed_form(p)}});
    ctx.residuals["hjb"] = st.residual;
    ctx.residuals["sup_gap"] = gap;
}

void cmd_sweep(const RunConfig& cfg, RunContext& ctx, std::size_t jobs) {
    if (cfg.sweep_param != "lambda" && cfg.sweep_param != "delta") {
        throw ConfigError(
            "config: sweep.param must be \"lambda\" or \"delta\"");
    }
    const bool is_lambda = cfg.sweep_param == "lambda";
    const std::vector<double> vals =
        !cfg.sweep_values.empty()
            ? cfg.sweep_values
            : (is_lambda ? default_lambda_values() : default_delta_values());
    SweepOptions so;
    so.pde_check = cfg.sweep_pde_check;
    so.grid_n = cfg.n;
    so.solver = cfg.solver;

    SweepResult res;
    if (jobs > 1 && vals.size() > 1 && !so.pde_check) {
        // Points are independent; strided workers fill preassigned slots, so
        // the output is byte-identical to the serial run.
        detail::require_sweep_values(vals);
        res.parameter = cfg.sweep_param;
        res.values = vals;
        res.reports.resize(vals.size());
        const std::size_t nthreads = std::min(jobs, vals.size());
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> errors(nthreads);
        for (std::size_t t = 0; t < nthreads; ++t) {
            workers.emplace_back([&, t] {
                try {
                    for (std::size_t i = t; i < vals.size(); i += nthreads) {
                        ModelParams q = cfg.model;
                        (is_lambda ? q.lambda : q.delta) = vals[i];
                        res.reports[i] = stationary_report(q);
                    }
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (std::thread& w : workers) w.join();
        for (const std::exception_ptr& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    } else {
        res = is_lambda ? sweep_lambda(cfg.model, vals, so)
                        : sweep_delta(cfg.model, vals, so);
    }
    write_sweep_csv(ctx.path("sweep.csv"), res);
    ctx.residuals["pde_gap"] = res.pde_gap;
    ctx.residuals["pde_points"] = res.pde_points;
}

void cmd_ingest(const RunConfig& cfg, RunContext& ctx) {
    if (cfg.input_path.empty()) {
        throw ConfigError("config: ingest.path is required");
    }
    const HashrateSeries nominal = load_hashrate_csv(cfg.input_path);
    const double delta =
        cfg.ingest_delta < 0.0 ? cfg.model.delta : cfg.ingest_delta;
    const HashrateSeries real = to_real_series(nominal, delta);
    write_hashrate_csv(ctx.path("hashrate_nominal.csv"), nominal);
    write_hashrate_csv(ctx.path("hashrate_real.csv"), real);
    ctx.residuals["samples"] = nominal.hashrate.size();
    ctx.residuals["delta"] = delta;
}

int run(const std::string& sub, const std::string& config_path,
        const std::vector<std::string>& sets, const std::string& out_flag,
        bool seed_given, std::uint64_t seed_flag, std::size_t jobs,
        const std::string& sweep_param_flag) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = load_run_config(config_path, sets);
    if (seed_given) {
        cfg.seed = seed_flag;
    }
    if (!sweep_param_flag.empty()) {
        cfg.sweep_param = sweep_param_flag;
    }
    std::string dir = out_flag;
    if (dir.empty()) dir = cfg.output_dir;
    if (dir.empty()) {
        const char* env = std::getenv("MFG_POW_OUT");
        dir = (env && *env) ? env : "./out";
    }
    cfg.output_dir = dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory: " + dir);
    }

    RunContext ctx;
    ctx.dir = dir;
    if (sub == "solve1d") cmd_solve1d(cfg, ctx);
    else if (sub == "stationary") cmd_stationary(cfg, ctx);
    else if (sub == "trajectory") cmd_trajectory(cfg, ctx);
    else if (sub == "noise") cmd_noise(cfg, ctx);
    else if (sub == "twopop") cmd_twopop(cfg, ctx);
    else if (sub == "twopop-noise") cmd_twopop_noise(cfg, ctx);
    else if (sub == "obstacle") cmd_obstacle(cfg, ctx);
    else if (sub == "penalized") cmd_penalized(cfg, ctx);
    else if (sub == "hjb-check") cmd_hjb_check(cfg, ctx);
    else if (sub == "sweep") cmd_sweep(cfg, ctx, jobs);
    else if (sub == "ingest") cmd_ingest(cfg, ctx);
    else throw ConfigError("unknown subcommand: " + sub);

    json manifest;
    manifest["subcommand"] = sub;
    manifest["config"] = config_to_json(cfg);
    manifest["versions"] = {{"mfgpow", version_string}, {"config_schema", 1}};
    manifest["residuals"] = ctx.residuals;
    manifest["outputs"] = ctx.outputs;
    manifest["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    write_json_file(dir + "/manifest.json", manifest);

    for (const std::string& name : ctx.outputs) {
        std::cout << dir << "/" << name << "\n";
    }
    std::cout << dir << "/manifest.json\n";
    return 0;
}

void error_record(const char* type, const std::string& message) {
    std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump()
              << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-field solvers for Proof-of-Work mining economics"};
    app.set_version_flag("--version", version_string);

    std::string config_path;
    std::string out_flag;
    std::vector<std::string> sets;
    std::uint64_t seed_flag = 0;
    std::size_t jobs = 1;

    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--set", sets,
                   "config override as key.path=value (repeatable)");
    app.add_option("--out", out_flag,
                   "output directory (beats config and MFG_POW_OUT)");
    app.add_option("--jobs", jobs, "worker-thread cap for sweeps")
        ->check(CLI::PositiveNumber);
    CLI::Option* seed_opt =
        app.add_option("--seed", seed_flag, "RNG seed for simulated paths");

    const std::pair<const char*, const char*> subs[] = {
        {"solve1d", "solve the unit-value equation on a 1D capacity grid"},
        {"stationary", "closed-form stationary equilibrium report"},
        {"trajectory", "equilibrium capacity path from a starting point"},
        {"noise", "unit value and target curve under a stochastic price"},
        {"twopop", "two-population system, stationary pair and a path"},
        {"twopop-noise", "two populations under a stochastic exchange rate"},
        {"obstacle", "free-entry obstacle problem and jump trajectory"},
        {"penalized", "penalized approximations and their convergence table"},
        {"hjb-check", "planner HJB solve and gradient comparison"},
        {"sweep", "comparative statics over lambda or delta"},
        {"ingest", "load a hashrate CSV and derive the real series"},
    };
    for (const auto& [name, desc] : subs) {
        app.add_subcommand(name, desc)->fallthrough();
    }
    app.require_subcommand(1);

    std::string sweep_param_flag;
    app.get_subcommand("sweep")->add_option(
        "--param", sweep_param_flag, "swept parameter: lambda or delta");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        error_record("config", e.what());
        return 2;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        return run(sub, config_path, sets, out_flag, seed_opt->count() > 0,
                   seed_flag, jobs, sweep_param_flag);
    } catch (const ConfigError& e) {
        error_record("config", e.what());
        return 2;
    } catch (const IoError& e) {
        error_record("io", e.what());
        return 4;
    } catch (const SolverError& e) {
        error_record("solver", e.what());
        return 3;
    } catch (const std::exception& e) {
        error_record("internal", e.what());
        return 3;
    }
}
