#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace clpt {

/// Fully resolved experiment settings. Text form is line-oriented
/// `key = value` under `[section]` headers; `#` starts a comment.
struct ExperimentConfig {
    // [run]
    std::string preset;
    std::string problem = "1q";
    std::uint64_t seed_base = 1;
    std::string output = "out";
    int workers = 0;   ///< 0: OpenMP default

    // [problem]
    double h_z = -1.0;
    double h_x = -2.23606797749978969641;
    double J = -2.0;   ///< two-qubit coupling

    // [grid]
    double T_min = 0.5;
    double T_max = 3.0;
    int T_points = 26;
    std::vector<double> T_list;   ///< overrides the range when non-empty

    // [protocol]
    int L = 64;
    int N = 200;

    // [expansion]
    std::string kind = "exact";   ///< exact, dyson, taylor, magnus, cumulant
    int order = 2;
    int cumulant_order = 2;

    // [sd]
    int sd_runs = 250;

    // [lmc]
    std::vector<double> betas{1e5};
    double sigma = 0.031622776601683794;
    std::string sigma_scaling = "acceptance";   ///< fixed | acceptance
    std::string stride_scaling = "diffusion";   ///< fixed | diffusion
    double beta_ref = 1e5;                      ///< where sigma and stride apply unscaled
    int lmc_runs = 10;
    int samples = 100;
    long stride = 4096;
    long max_relax_iterations = 1L << 21;
    long anneal_iterations = 0;
    double trap_threshold = 1e-6;
    long trace_stride = 1;
    std::vector<int> sample_counts{1, 2, 4, 8, 16, 32, 64, 100};

    // [field]
    double kappa = 3.0;
    double alpha = 1.0;
    std::string convention = "scaled";   ///< scaled | raw

    // [deformation]
    int mode = 3;
    double x_min = -1.0;
    double x_max = 1.0;
    int points = 401;

    std::vector<double> durations() const;
    /// Canonical text form; parsing it back gives an equal config.
    std::string to_text() const;
};

struct ConfigDiagnostic {
    int line = 0;   ///< 0 when not tied to a line
    std::string message;
};

struct ConfigResult {
    ExperimentConfig config;
    std::vector<ConfigDiagnostic> errors;
    std::vector<ConfigDiagnostic> warnings;
    bool ok() const { return errors.empty(); }
};

/// Parses and range-checks. `preset_override`, when non-empty, replaces
/// run.preset before validation.
ConfigResult validate_config(const std::string& text, const std::string& preset_override = "");

const std::vector<std::string>& preset_names();
const std::vector<std::string>& config_keys();   ///< section.key
std::string nearest_key(const std::string& key);
std::string format_diagnostics(const std::vector<ConfigDiagnostic>& d, const std::string& kind);

}  // namespace clpt
