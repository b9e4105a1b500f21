// qdual: configuration-driven runner for the modular Schroedinger family and
// its dual dynamics. Subcommands: run, sweep, converge, classical-demo.
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qdual/classical.hpp"
#include "qdual/runner.hpp"

namespace {

// Exit codes: 0 pass, 2 invariant failure, 3 config error, 4 numerical abort.
constexpr int kExitPass = 0;
constexpr int kExitInvariant = 2;
constexpr int kExitConfig = 3;
constexpr int kExitNumerical = 4;

std::string default_out_root() {
    if (const char* env = std::getenv("QDUAL_OUT")) return env;
    return ".";
}

qdual::RunConfig load_config(const std::string& path, const std::string& out_override) {
    qdual::RunConfig cfg = qdual::parse_config_file(path);
    if (!out_override.empty()) {
        cfg.run.output_dir = out_override;
    } else {
        const std::filesystem::path dir(cfg.run.output_dir);
        if (dir.is_relative()) cfg.run.output_dir = (default_out_root() / dir).string();
    }
    return cfg;
}

std::vector<std::string> split_csv(const std::string& raw) {
    std::vector<std::string> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

int cmd_run(const std::string& config_path, const std::string& out, bool quiet,
            bool check_only) {
    qdual::RunConfig cfg = load_config(config_path, out);
    cfg.run.quiet = cfg.run.quiet || quiet;
    if (check_only) {
        std::cout << "config ok\n";
        return kExitPass;
    }
    const qdual::RunReport rep = qdual::run(cfg);
    if (!rep.error.empty() && !cfg.run.quiet) std::cerr << "error: " << rep.error << "\n";
    return rep.exit_code;
}

int cmd_sweep(const std::string& config_path, const std::string& out, const std::string& axis,
              const std::string& values) {
    qdual::RunConfig cfg = load_config(config_path, out);
    const auto vals = split_csv(values);
    if (vals.empty()) throw qdual::ConfigInvalid({"--values: no values given"});
    const auto result = qdual::sweep(cfg, axis, vals, cfg.run.output_dir);
    int exit = kExitPass;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const auto& rep = result.reports[i];
        std::cout << axis << " = " << vals[i] << ": " << rep.status << "\n";
        exit = std::max(exit, rep.exit_code);
    }
    std::cout << "summary: " << result.summary_csv.string() << "\n";
    return exit;
}

int cmd_converge(const std::string& config_path, const std::string& out,
                 const std::string& levels_path) {
    qdual::RunConfig cfg = load_config(config_path, out);
    const qdual::Table t = qdual::read_table_csv(levels_path);  // columns: n, dt
    std::vector<std::pair<std::size_t, double>> levels;
    for (std::size_t i = 0; i < t.x.size(); ++i)
        levels.emplace_back(static_cast<std::size_t>(std::llround(t.x[i])), t.value[i]);
    const auto rows = qdual::convergence_study(cfg, levels, cfg.run.output_dir);
    std::cout << "n,dt,error,observed_order\n";
    for (const auto& r : rows)
        std::cout << r.n << ',' << r.dt << ',' << r.error << ',' << r.order << '\n';
    return kExitPass;
}

int cmd_classical_demo(double omega, double q0, double p0, double mass, double t_max,
                       double dt) {
    using namespace qdual::classical;
    std::cout << "t,q,p,q_bar,p_bar,H,H_bar\n";
    for (double t = 0.0; t <= t_max + 1e-12; t += dt) {
        const auto h = harmonic_trajectory(q0, p0, omega, mass, t);
        const auto b = inverted_trajectory(q0, p0, omega, mass, t);
        std::cout << qdual::fmt17(t) << ',' << qdual::fmt17(h.q) << ',' << qdual::fmt17(h.p)
                  << ',' << qdual::fmt17(b.q) << ',' << qdual::fmt17(b.p) << ','
                  << qdual::fmt17(h.energy_harmonic()) << ','
                  << qdual::fmt17(inverted_energy_factored(q0, p0, omega, mass, t)) << '\n';
    }
    return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for the modular Schroedinger family and its duals"};
    app.require_subcommand(1);

    std::string config_path, out_dir, axis, values, levels_path;
    bool quiet = false, check_only = false;

    auto* run_cmd = app.add_subcommand("run", "execute one configured trajectory");
    run_cmd->add_option("--config", config_path, "config file (key = value sections)")
        ->required();
    run_cmd->add_option("--out", out_dir, "output directory (default from config/QDUAL_OUT)");
    run_cmd->add_flag("--quiet", quiet, "suppress the check summary");
    run_cmd->add_flag("--check-only", check_only, "validate the config and exit");

    auto* sweep_cmd = app.add_subcommand("sweep", "independent runs over one parameter axis");
    sweep_cmd->add_option("--config", config_path, "base config file")->required();
    sweep_cmd->add_option("--axis", axis, "parameter path, e.g. physics.kappa")->required();
    sweep_cmd->add_option("--values", values, "comma-separated axis values")->required();
    sweep_cmd->add_option("--out", out_dir, "output root");

    auto* conv_cmd = app.add_subcommand("converge", "refinement study over (n, dt) levels");
    conv_cmd->add_option("--config", config_path, "base config file")->required();
    conv_cmd->add_option("--levels", levels_path, "CSV with n,dt rows (>= 3)")->required();
    conv_cmd->add_option("--out", out_dir, "output root");

    double omega = 1.0, q0 = 1.0, p0 = 0.0, mass = 1.0, t_max = 10.0, demo_dt = 0.01;
    auto* demo_cmd = app.add_subcommand("classical-demo",
                                        "print harmonic/inverted trajectory tables as CSV");
    demo_cmd->add_option("--omega", omega, "angular frequency");
    demo_cmd->add_option("--q0", q0, "initial position");
    demo_cmd->add_option("--p0", p0, "initial momentum");
    demo_cmd->add_option("--mass", mass, "mass");
    demo_cmd->add_option("--t-max", t_max, "end time");
    demo_cmd->add_option("--dt", demo_dt, "output spacing");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(config_path, out_dir, quiet, check_only);
        if (sweep_cmd->parsed()) return cmd_sweep(config_path, out_dir, axis, values);
        if (conv_cmd->parsed()) return cmd_converge(config_path, out_dir, levels_path);
        if (demo_cmd->parsed())
            return cmd_classical_demo(omega, q0, p0, mass, t_max, demo_dt);
    } catch (const qdual::ConfigInvalid& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const qdual::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitPass;
}
