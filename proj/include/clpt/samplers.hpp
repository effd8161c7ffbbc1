#pragma once

#include "clpt/control.hpp"
#include "clpt/expansions.hpp"
#include "clpt/rng.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace clpt {

/// Landscape queried one site at a time. `propose` returns the value with
/// s_i replaced; `accept` commits that replacement.
class SiteLandscape {
public:
    virtual ~SiteLandscape() = default;
    virtual void reset(const Vec& s) = 0;
    virtual double value() const = 0;
    virtual double propose(int i, double s_new) = 0;
    virtual void accept(int i, double s_new) = 0;
    virtual const Vec& protocol() const = 0;
    virtual int L() const = 0;
};

/// Exact infidelity with cached forward states and backward costates, so a
/// single-site proposal costs one step unitary and an O(d) overlap.
std::unique_ptr<SiteLandscape> make_exact_site_landscape(const ControlProblem& p, double T, int L);
/// Full re-evaluation on every proposal.
std::unique_ptr<SiteLandscape> make_function_site_landscape(std::function<double(const Vec&)> f, int L);

struct SdResult {
    Vec s;
    double infidelity = 0.0;
    long evaluations = 0;
    int sweeps = 0;
    std::vector<double> trace;   ///< infidelity after each accepted flip
};

/// Single-flip descent over bang-bang protocols from a random start. A random
/// site is flipped and the flip kept if the infidelity drops; stops once every
/// site has been tried without improvement.
SdResult stochastic_descent(SiteLandscape& land, std::uint64_t seed, int max_sweeps = 100000);
SdResult stochastic_descent(const ControlProblem& p, double T, int N, std::uint64_t seed);
SdResult stochastic_descent(const Landscape& land, std::uint64_t seed);

struct SampleEnsemble {
    std::string problem;
    double T = 0.0;
    int L = 0;
    double beta = 0.0;
    double sigma = 0.0;
    std::string landscape = "exact";
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<Vec>> runs;   ///< runs[r][k] = k-th protocol of run r
    std::vector<bool> trapped;

    int total() const;
};

/// q_BB = 1 - (1/N) sum <s_i>^2 over all protocols of all runs.
double q_bb(const SampleEnsemble& e);
struct QStat {
    double mean = 0.0;
    double stderr_ = 0.0;
    int runs = 0;
};
/// Per-run (1/L) sum (<s_i^2> - <s_i>^2), averaged over non-trapped runs.
QStat q_continuous(const SampleEnsemble& e);

struct LmcConfig {
    double beta = 1e5;
    double sigma = 0.031622776601683794;   ///< 10^{-3/2}
    int L = 64;
    double T = 2.6;
    long max_relax_iterations = 1L << 21;
    long stride = 4096;                    ///< iterations between stored samples
    int samples = 100;
    double metropolis_L = 0.0;             ///< multiplier of beta in the exponent; 0 means L
    double trap_threshold = 1e-6;
    long therm_window = 2048;
    double therm_rate = 1e-10;             ///< mean |dI| per iteration
    long trace_stride = 1;
    long anneal_iterations = 0;            ///< geometric ramp of beta before relaxation
    double anneal_beta_start = 1e2;
    long window_stride = 0;                ///< >0: also keep every window_stride-th protocol during sampling

    void validate() const;
    double exponent_scale() const { return beta * (metropolis_L > 0.0 ? metropolis_L : L); }
};

struct LmcTrajectory {
    std::vector<double> infidelity;   ///< one entry per trace_stride iterations
    long thermalized_at = -1;
    bool trapped = false;
    long iterations = 0;
    long accepted = 0;
    long attempted = 0;
    std::vector<Vec> samples;
    std::vector<long> sample_iteration;
    std::vector<double> sample_infidelity;
    std::vector<Vec> window;          ///< denser record, see window_stride
    Vec final_protocol;
};

/// One iteration = L sequential single-site attempts. Out-of-range
/// proposals are rejected.
void lmc_sweep(SiteLandscape& land, double beta_scale, double sigma, CounterRng& rng, long& accepted);
LmcTrajectory lmc_run(SiteLandscape& land, const LmcConfig& cfg, std::uint64_t seed);
LmcTrajectory lmc_run(const ControlProblem& p, const LmcConfig& cfg, std::uint64_t seed);

/// Independent runs with seeds run_seed(seed_base, r), distributed over OpenMP
/// threads. Runs that did not thermalize, or whose thermalized infidelity
/// exceeds the ensemble minimum by more than trap_threshold, are flagged trapped.
SampleEnsemble lmc_ensemble(const ControlProblem& p, const LmcConfig& cfg, int runs, std::uint64_t seed_base,
                            std::vector<LmcTrajectory>* trajectories = nullptr);
SampleEnsemble sd_ensemble(const ControlProblem& p, double T, int N, int runs, std::uint64_t seed_base);

/// Single-thread reference for the two ensemble drivers.
SampleEnsemble lmc_ensemble_serial(const ControlProblem& p, const LmcConfig& cfg, int runs, std::uint64_t seed_base);
SampleEnsemble sd_ensemble_serial(const ControlProblem& p, double T, int N, int runs, std::uint64_t seed_base);

/// dl/dn = -sqrt(sigma^2 / 2 pi) (1 - exp(-2 l^2 / sigma^2)), sampled at n = 0..steps.
std::vector<double> relaxation_toy_model(double sigma, double l0, int steps);
/// Least-squares slope of log I against log n over trace entries [n_lo, n_hi],
/// on log-spaced points.
double decay_slope(const std::vector<double>& trace, long n_lo, long n_hi);

/// Empirical covariance <s_i s_j> - <s_i><s_j>, eigenvalues descending.
Vec covariance_spectrum(const std::vector<Vec>& window);

double protocol_distance(const Vec& a, const Vec& b);
/// Minimum distance between any protocol of A and any of B.
double run_distance(const std::vector<Vec>& A, const std::vector<Vec>& B);

struct DeformationScan {
    std::vector<double> x;
    std::vector<double> infidelity;
    std::vector<bool> out_of_bounds;
    std::vector<double> minima_x;
    std::vector<double> minima_infidelity;
};

/// Exact infidelity along center + x f over x_range; local minima refined by Brent.
DeformationScan deformation_scan(const ControlProblem& p, const Protocol& center, const Vec& f, double x_lo,
                                 double x_hi, int points);

std::string lmc_run_csv(const std::string& problem, const LmcConfig& cfg, std::uint64_t seed, const LmcTrajectory& tr);
/// Rows of (T, beta, q, q_BB, stderr, n_runs).
std::string aggregate_csv(const std::vector<std::vector<double>>& rows);

}  // namespace clpt
