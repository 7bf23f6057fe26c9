// Command-line front end: run, sweep, stability, schedule.

#include "wncs/errors.hpp"
#include "wncs/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

enum Exit : int { kOk = 0, kValidation = 1, kDivergence = 2, kInfeasible = 3 };

wncs::ScenarioConfig load(const std::string& path, const std::optional<std::uint64_t>& seed) {
    wncs::ScenarioConfig cfg = wncs::load_config(path);
    if (seed) cfg.seed = *seed;
    return cfg;
}

void write_file(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / name, std::ios::binary) << text << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Co-simulation of wireless networked control systems"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "Run a scenario and write trace.csv, rounds.csv, summary.json");
    auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep over values and seeds");
    auto* stability = app.add_subcommand("stability", "Mean-square stability report of a scenario");
    auto* schedule = app.add_subcommand("schedule", "Print the static schedule of a scenario");

    for (auto* sub : {run, sweep, stability, schedule}) {
        sub->add_option("config", config_path, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Override the config seed");
        sub->add_option("--out", out_dir, "Output directory");
    }

    std::string param;
    std::vector<double> values;
    std::vector<std::uint64_t> seeds;
    unsigned threads = 1;
    sweep->add_option("--param", param, "delta, loss_prob or artificial_drop")->required();
    sweep->add_option("--values", values, "Parameter values")->required();
    sweep->add_option("--seeds", seeds, "Seeds")->required();
    sweep->add_option("--threads", threads, "Concurrent runs")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        const wncs::ScenarioConfig cfg = load(config_path, seed);
        if (run->parsed()) {
            const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path("out") : std::filesystem::path(out_dir);
            const wncs::SummaryMetrics m = wncs::run_to_directory(cfg, dir);
            std::cout << wncs::metrics_to_json(m, cfg) << '\n';
            if (!m.stable) {
                std::cerr << "divergence: " << m.divergence << '\n';
                return kDivergence;
            }
            return kOk;
        }
        if (sweep->parsed()) {
            const wncs::SweepResult r = wncs::sweep(cfg, wncs::parse_sweep_param(param), values, seeds, threads);
            const std::string text = wncs::sweep_to_json(r);
            std::cout << text << '\n';
            if (!out_dir.empty()) write_file(out_dir, "sweep.json", text);
            for (const auto& row : r.rows)
                if (!row.metrics.stable) return kDivergence;
            return kOk;
        }
        if (stability->parsed()) {
            const wncs::StabilityCheck c = wncs::check_stability(cfg);
            const std::string text = wncs::stability_to_json(c);
            std::cout << text << '\n';
            if (!out_dir.empty()) write_file(out_dir, "stability.json", text);
            return kOk;
        }
        if (schedule->parsed()) {
            const auto s = wncs::scenario_schedule(cfg);
            if (!s) {
                std::cout << "{\"feasible\": false}\n";
                return kInfeasible;
            }
            const std::string text = wncs::schedule_to_json(*s);
            std::cout << text << '\n';
            if (!out_dir.empty()) write_file(out_dir, "schedule.json", text);
            return kOk;
        }
    } catch (const wncs::ValidationError& e) {
        for (const auto& v : e.violations()) std::cerr << "invalid: " << v << '\n';
        return kValidation;
    } catch (const wncs::InfeasibleScheduleError& e) {
        std::cerr << "infeasible schedule: " << e.what() << '\n';
        return kInfeasible;
    } catch (const wncs::ConfigError& e) {
        std::cerr << "invalid: " << e.what() << '\n';
        return kValidation;
    } catch (const wncs::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kDivergence;
    }
    return kOk;
}
