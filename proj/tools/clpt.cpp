// clpt <preset> --config <path> [--out <dir>] [--workers k] [--seed-base n]

#include "clpt/config.hpp"
#include "clpt/csv.hpp"
#include "clpt/experiments.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
    using namespace clpt;
    CLI::App app{"Control landscape experiments. Presets: phase-diagram-sd, stability-trace, hessian-spectrum, "
                 "lmc-qsl, lmc-distances, critical-scaling, relaxation-stages, deformation-scan"};
    std::string preset, config_path, out_dir;
    int workers = -1;
    std::uint64_t seed_base = 0;
    app.add_option("preset", preset, "Experiment preset")->required();
    app.add_option("--config", config_path, "Config file (key = value under [section] headers)")->required();
    app.add_option("--out", out_dir, "Output directory, overrides run.output");
    auto* workers_opt = app.add_option("--workers", workers, "Worker threads, overrides run.workers and CLPT_WORKERS")
                            ->check(CLI::NonNegativeNumber);
    auto* seed_opt = app.add_option("--seed-base", seed_base, "Base seed, overrides run.seed_base");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    std::string text;
    try {
        text = read_text(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config;
    }
    auto res = validate_config(text, preset);
    std::cerr << format_diagnostics(res.warnings, "warning");
    if (!res.ok()) {
        std::cerr << format_diagnostics(res.errors, "error");
        return exit_config;
    }
    ExperimentConfig cfg = res.config;
    if (!out_dir.empty()) cfg.output = out_dir;
    if (*seed_opt) cfg.seed_base = seed_base;
    if (const char* env = std::getenv("CLPT_WORKERS")) {
        char* end = nullptr;
        const long w = std::strtol(env, &end, 10);
        if (*env == '\0' || *end != '\0' || w < 0) {
            std::cerr << "error: CLPT_WORKERS must be a non-negative integer (got '" << env << "')\n";
            return exit_config;
        }
        cfg.workers = static_cast<int>(w);
    }
    if (*workers_opt) cfg.workers = workers;
    if (cfg.workers > 0) omp_set_num_threads(cfg.workers);

    try {
        const auto out = run_experiment(cfg);
        for (const auto& [name, content] : out.files()) std::cout << cfg.output << "/" << name << "\n";
        std::cout << cfg.output << "/manifest.json\n";
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const OutputError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return exit_io;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return exit_runtime;
    }
    return exit_ok;
}
