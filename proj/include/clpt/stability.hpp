#pragma once

#include "clpt/control.hpp"

#include <optional>
#include <string>
#include <vector>

namespace clpt {

struct StabilityReport {
    bool stable = true;
    std::vector<int> violating;
    double tau_b = 0.0;
    double violation_integral = 0.0;   ///< dt * sum of violation magnitudes
};

/// Interior points need |b_i| <= tau_b; boundary points need b_i s_i <= tau_b.
/// tau_b = rel_tol * max|b|.
StabilityReport linear_stability(const Vec& b, const Protocol& center, double rel_tol = 1e-8);

struct HessianSpectrum {
    Vec eigenvalues;       ///< of (1/L) J, descending
    Mat eigenfunctions;    ///< columns, (1/L) sum f^2 = 1
    double T = 0.0;
    Protocol center;

    int L() const { return static_cast<int>(eigenvalues.size()); }
    /// Number of eigenvalues above rel * lambda_max.
    int count_above(double rel) const;
    /// Number of eigenvalues with |lambda| <= rel * lambda_max.
    int count_vanishing(double rel) const;
};

HessianSpectrum hessian_spectrum(const Mat& J, double T = 0.0, const Protocol& center = {});
/// |lambda| of the negative eigenvalues, largest magnitude first.
std::vector<double> negative_branch(const HessianSpectrum& spec);
/// Overlap (1/L) sum f_i f_{L+1-i} of a normalized eigenfunction.
double reflection_overlap(const Vec& f);
/// Log-log slope of |lambda_n| against n for n in [n_lo, n_hi] (1-based),
/// with n the rank by decreasing magnitude.
double power_law_slope(const std::vector<double>& magnitudes, int n_lo, int n_hi);

/// +1 on [0, T/2 - delta), 0 on the window, -1 on (T/2 + delta, T], sampled at
/// step midpoints; midpoints on a window edge belong to the window.
Protocol s_delta(double T, double delta, int L);
/// Same profile averaged over each step (fractional values at the edges).
Protocol s_delta_cell_average(double T, double delta, int L);
/// Linear interpolation of step-midpoint values onto L_new steps.
Protocol interpolate_protocol(const Protocol& p, int L_new);

/// Piecewise-constant protocol with arbitrary segment lengths.
struct Segment {
    double duration;
    double s;
};
std::vector<Segment> delta_segments(double T, double delta);
Mat propagate_segments(const ControlProblem& p, const std::vector<Segment>& segs);
double infidelity_segments(const ControlProblem& p, const std::vector<Segment>& segs);
/// Continuous-time gradient b(t) = -1/2 n*.M(T,t) m1 M(t,0) n0.
double gradient_at(const ControlProblem& p, const std::vector<Segment>& segs, double t);

/// Signed stability measure of s_delta: b(T/2 + delta) = (1/2) dI/d(delta).
/// Stable window widths are its upward zero crossings.
double delta_measure(const ControlProblem& p, double T, double delta);
/// Unsigned measure: integral of the pointwise violation of the stability
/// conditions for s_delta, midpoint rule on n_quad points.
double delta_violation_integral(const ControlProblem& p, double T, double delta, int n_quad = 512);
/// db/dt at t = T/2 for s_0; s_0 becomes unstable where it turns negative.
double center_slope(const ControlProblem& p, double T);

struct DeltaPoint {
    double T;
    std::string branch;   ///< delta0, delta0_unstable, delta_minus, delta_plus
    double delta;
    double infidelity;
};

struct DeltaCurve {
    std::vector<DeltaPoint> points;
    bool terminated = false;
    double termination_T = 0.0;
    std::string termination_reason;
};

struct TraceOptions {
    int scan_points = 240;
    double root_tol = 1e-12;
};

DeltaCurve trace_delta(const ControlProblem& p, const std::vector<double>& T_grid, const TraceOptions& opt = {});

struct TransitionReport {
    std::optional<double> T_c;
    std::optional<double> T_QSL;
    std::optional<double> T_sb;
    std::optional<double> bifurcation_exponent;
    int bifurcation_fit_points = 0;
    std::optional<int> n_plus;                  ///< eigenvalues above 1e-3 lambda_max just past T_QSL
    std::optional<double> sb_hessian_T;         ///< where the lowest Hessian eigenvalue crosses zero
    std::optional<int> sb_negative_count;       ///< negative eigenvalues just past that crossing
    std::optional<double> sb_parity_overlap;    ///< reflection overlap of the crossing eigenfunction
    std::vector<std::string> unresolved;
};

struct TransitionOptions {
    int L = 64;
    TraceOptions trace;
    double n_plus_offset = 0.01;   ///< T_QSL + offset where n_plus is counted
};

TransitionReport detect_transitions(const ControlProblem& p, const std::vector<double>& T_grid,
                                    const TransitionOptions& opt = {});

/// Stable window width continued from `guess` at duration T; nullopt if none.
std::optional<double> stable_delta_near(const ControlProblem& p, double T, double guess, const TraceOptions& opt = {});
/// Root of the signed measure closest to `guess`, either crossing direction.
std::optional<double> continued_delta0(const ControlProblem& p, double T, double guess, const TraceOptions& opt = {});

std::string delta_curve_csv(const DeltaCurve& curve);
std::string spectrum_csv(const std::vector<HessianSpectrum>& spectra);
std::string transitions_csv(const TransitionReport& r);

}  // namespace clpt
