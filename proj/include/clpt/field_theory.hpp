#pragma once

#include "clpt/expansions.hpp"
#include "clpt/stability.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace clpt {

/// How T factors enter the eigenbasis quadratic form.
/// scaled: I = c + sum b_n x_n + 1/2 sum lambda_n x_n^2 with b_n = T b_n^raw and
///         lambda_n = T^2 lambda_n^raw (exact for the discretized landscape).
/// raw:    the same formulas with the unscaled b_n^raw, lambda_n^raw.
enum class SpectralConvention { scaled, raw };

struct SpectralData {
    double T = 0.0;
    int L = 0;
    SpectralConvention convention = SpectralConvention::scaled;
    double c = 0.0;           ///< landscape value at the center
    Vec lambda;               ///< descending
    Vec b;
    Vec x0;                   ///< coordinates of the center protocol
    Vec x1;                   ///< b / lambda, 0 for excluded modes
    Mat f;                    ///< eigenfunctions, (1/L) sum f^2 = 1
    double I = 0.0;           ///< c - 1/2 sum b^2 / lambda over retained modes
    int n_plus = 0;           ///< eigenvalues above 1e-3 lambda_max
    double kappa = 3.0;
    std::vector<int> excluded;   ///< |lambda| below the guard

    /// Max |center_i - sum_n x0_n f_i^(n)|.
    double reconstruction_residual(const Protocol& center) const;
};

constexpr double kLambdaGuard = 1e-14;

SpectralData build_spectral_data(const ExpansionCoefficients& coeffs, const HessianSpectrum& spectrum,
                                 double kappa = 3.0, SpectralConvention conv = SpectralConvention::scaled);
/// Taylor coefficients and spectrum at the cell-averaged s_delta, delta the
/// window-width root closest to delta_guess.
SpectralData spectral_data_at(const ControlProblem& p, double T, int L, double delta_guess, double kappa = 3.0,
                              SpectralConvention conv = SpectralConvention::scaled);

struct Moments {
    double mean;
    double second;
};
/// Uniform[-1, 1] and its Gaussian surrogate exp(-(3/2) s^2) share these.
Moments gaussian_boundary_moments();

class SaddleError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// dx_n(k) = x0_n - x1_n - k_n / (kappa L); empty k means k = 0.
Vec delta_x(const SpectralData& d, const Vec& k = {});
/// Omega(y) = kappa (-I y + 1/2 sum dx_n^2 / (1 + lambda_n y)).
double omega(double y, const SpectralData& d, const Vec& k = {});
double omega_prime(double y, const SpectralData& d, const Vec& k = {});
double omega_second(double y, const SpectralData& d, const Vec& k = {});

/// Modes with dx_n^2 below this fraction of sum dx^2 carry no pole.
constexpr double kWeightlessMode = 1e-24;

struct SaddlePoint {
    double y = 0.0;
    double lambda_plus = 0.0;    ///< largest positive eigenvalue with weight
    double lambda_minus = 0.0;   ///< most negative eigenvalue with weight
    double lo = 0.0;   ///< -1/lambda_+, -inf without a weighted positive mode
    double hi = 0.0;   ///< -1/lambda_-, +inf without a weighted negative mode
    double residual = 0.0;   ///< I + 1/2 sum dx^2 lambda / (1 + lambda y)^2
    int iterations = 0;

    bool inside() const { return lo < y && y < hi; }
};

/// Minimizer of the convex Omega(y) between the poles of the largest positive
/// and negative eigenvalues. Modes with vanishing dx_n contribute no pole and
/// are skipped when forming the interval. Throws SaddleError without a
/// sign-mixed spectrum or without a stationary point.
SaddlePoint solve_saddle(const SpectralData& d, const Vec& k = {});

double r0(double x);   ///< (1 + x) / (1 + x^2)

struct QPrediction {
    double T = 0.0;
    int L = 0;
    SaddlePoint saddle;
    double leading = 0.0;      ///< (1/kappa L) sum 1/(1 + u_n)
    double leading_r0 = 0.0;   ///< (1/kappa L) sum r0(u_n)
    double corrected = 0.0;    ///< sum of full per-mode variances
    double difference = 0.0;   ///< corrected - leading
    double halved = 0.0;       ///< heuristic: only half the directions fluctuate
    Vec variance;
    std::string status = "ok";   ///< otherwise the reason no prediction exists
};

QPrediction q_prediction(const SpectralData& d);

/// -(N/L) sum [s+ log s+ + s- log s-], s+- = (1 +- s)/2, 0 log 0 = 0.
double coarse_grain_entropy(const Vec& s, double N);
/// (N alpha / 2)(1 - (1/L) sum s^2).
double tsallis_entropy(const Vec& s, double N, double alpha = 1.0);

/// First moments -x1_n - dx_n / (1 + u_n).
Vec first_moments(const SpectralData& d, const SaddlePoint& sp);

struct QbbScaling {
    double T_qsl = 0.0;
    std::vector<double> T;
    std::vector<double> dT;
    std::vector<Vec> mean_x;
    std::vector<Vec> x0;
    std::vector<double> dq_bb;   ///< -sum (2 x0_n <x_n> + <x_n>^2)
    std::vector<double> q_bb0;   ///< max(0, 1 - T_c/T)
    std::vector<int> n_plus;
    double intercept = 0.0;
    double slope = 0.0;
    double r2 = 0.0;
    /// || <x_n> + x0_n || / || x0_n || over n > n_plus at the smallest dT.
    double tail_relative_error = 0.0;
};

/// Spectral data must be built with kappa = alpha N / L.
QbbScaling qbb_scaling(const std::vector<SpectralData>& grid, double T_qsl, double T_c);

struct LinearFit {
    double intercept;
    double slope;
    double r2;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

std::string spectral_data_csv(const SpectralData& d);
std::string saddle_csv(const std::vector<QPrediction>& preds);
std::string predictions_csv(const std::vector<QPrediction>& preds, const QbbScaling* scaling = nullptr);

}  // namespace clpt
