#pragma once

#include "clpt/config.hpp"
#include "clpt/control.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace clpt {

/// Exit codes of the command-line runner.
enum ExitCode { exit_ok = 0, exit_config = 2, exit_runtime = 3, exit_io = 4 };

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};
class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Files produced by a preset, keyed by path relative to the output directory.
class OutputSet {
public:
    void add(const std::string& name, std::string content);
    const std::map<std::string, std::string>& files() const { return files_; }

    /// manifest.json: config echo, problem, and the SHA-256 of every file.
    std::string manifest(const ExperimentConfig& cfg) const;
    /// Writes everything under `dir`. Existing files must match byte for
    /// byte; any mismatch throws OutputError before anything is written.
    void commit(const std::filesystem::path& dir, const ExperimentConfig& cfg) const;

private:
    std::map<std::string, std::string> files_;
};

ControlProblem problem_for(const ExperimentConfig& cfg);

/// Runs `cfg.preset` and returns its outputs without touching the disk.
OutputSet run_preset(const ExperimentConfig& cfg);
/// run_preset followed by commit to cfg.output.
OutputSet run_experiment(const ExperimentConfig& cfg);

/// sigma and stride actually used at `beta` under the config's scaling rules.
double lmc_sigma_for(const ExperimentConfig& cfg, double beta);
long lmc_stride_for(const ExperimentConfig& cfg, double beta);

/// "2.6" style tag used in file names.
std::string number_tag(double v);

}  // namespace clpt
