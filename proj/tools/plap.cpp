#include <iostream>
#include <string>
#include <utility>

#include <CLI11.hpp>

#include "plap/experiment.hpp"
#include "plap/validation.hpp"

namespace {

enum ExitCode { ok = 0, other = 1, config = 2, solver = 3, probe = 4, io = 5 };

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"p-Laplacian regularity laboratory"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    const std::pair<const char*, const char*> subcommands[] = {
        {"exponent", "compatibility report and exponents for one parameter set"},
        {"region", "admissible (q, r) map as CSV"},
        {"solve", "run the solver and write the solution"},
        {"probe", "solve, then measure oscillation decay at the configured centres"},
        {"validate", "run the built-in oracle suite"},
    };
    for (const auto& [name, help] : subcommands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string subcommand = app.get_subcommands().front()->get_name();

    try {
        const auto cfg = plap::load_config(config_path);
        const std::string dir = out_dir.empty() ? cfg.output : out_dir;
        if (subcommand == "validate") {
            const auto results = plap::validation_suite();
            bool all = true;
            for (const auto& r : results) {
                std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
                all = all && r.pass;
            }
            plap::RunResult res;
            res.summary = {{"scenario", cfg.scenario},
                           {"subcommand", "validate"},
                           {"config_hash", plap::config_hash(cfg)},
                           {"oracles", plap::to_json(results)},
                           {"pass", all}};
            plap::emit_report(res, dir);
            return all ? ok : other;
        }
        const auto res = plap::run_experiment(cfg, subcommand);
        for (const auto& path : plap::emit_report(res, dir)) std::cout << path << "\n";
        return ok;
    } catch (const plap::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config;
    } catch (const plap::SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return solver;
    } catch (const plap::ProbeError& e) {
        std::cerr << "probe error: " << e.what() << "\n";
        return probe;
    } catch (const plap::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return io;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return other;
    }
}
