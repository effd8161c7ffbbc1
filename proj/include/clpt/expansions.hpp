#pragma once

#include "clpt/control.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace clpt {

enum class ExpansionKind { dyson, taylor };

/// Truncated landscape I ~ c + dt sum b_i ds_i + dt^2/2 sum J_ij ds_i ds_j
///                         + dt^3/6 sum K_ijk ds_i ds_j ds_k,  dt = T/L.
struct ExpansionCoefficients {
    ExpansionKind kind = ExpansionKind::dyson;
    int order = 2;
    double T = 0.0;
    Protocol center;
    double c = 0.0;
    Vec b;
    Mat J;
    std::vector<double> K3;   ///< L^3 row-major, empty below order 3

    int L() const { return static_cast<int>(b.size()); }
    double k3(int i, int j, int k) const {
        const size_t n = static_cast<size_t>(L());
        return K3[(static_cast<size_t>(i) * n + j) * n + k];
    }
};

/// Terms Omega_1..Omega_k of the rotating-frame Magnus series.
struct MagnusStack {
    std::vector<Mat> terms;
    int order() const { return static_cast<int>(terms.size()); }
    Mat sum() const;
};

class ExpansionBreakdown : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Blocks (0,0)..(0,k) of exp of the block-bidiagonal matrix with A on the
/// diagonal and B above it: exp(A), then the j-fold ordered integrals of B
/// over a unit step.
std::vector<Mat> ordered_step_integrals(const Mat& A, const Mat& B, int k);

/// Rotating-frame data on a uniform grid. Per step: B_i = mean of dm'/ds,
/// D_i and E_i the normalized 2- and 3-fold time-ordered integrals.
struct RotatingFrameGrid {
    double T = 0.0;
    int L = 0;
    int order = 0;
    Mat M0T;          ///< exp(T m0)
    Vec n_star_rot;   ///< M0(T)^T n_star
    Vec n0;
    double constant = 0.0;   ///< 1 - 1/d
    std::vector<Mat> B, D, E;
};

RotatingFrameGrid rotating_frame_grid(const ControlProblem& p, double T, int L, int order);

ExpansionCoefficients dyson_coefficients(const ControlProblem& p, double T, int order, int L);
ExpansionCoefficients dyson_coefficients(const RotatingFrameGrid& grid);
/// Reference O(L^3 n^2) construction without symmetry shortcuts or threads.
std::vector<double> dyson_cubic_kernel_serial(const RotatingFrameGrid& grid);
std::vector<double> dyson_cubic_kernel(const RotatingFrameGrid& grid);

/// Exact first/second derivatives of the piecewise-constant landscape at `center`.
ExpansionCoefficients taylor_coefficients_at(const ControlProblem& p, const Protocol& center, int order);
/// Reference Hessian built from explicit propagator products (O(L^3 n^3)).
Mat taylor_hessian_serial(const ControlProblem& p, const Protocol& center);

MagnusStack magnus_terms(const RotatingFrameGrid& grid, const Vec& s, int order);
/// exp(Omega_1 + .. + Omega_order), rotating frame.
Mat magnus_propagator(const ControlProblem& p, const Protocol& protocol, int order);
double magnus_infidelity(const RotatingFrameGrid& grid, const Vec& s, int order);

/// Cumulants kappa_0..kappa_m of log((2/d + n*'.exp(Sigma) n0)/2).
std::vector<double> cumulants(const RotatingFrameGrid& grid, const Mat& sigma, int cumulant_order);
double cumulant_infidelity(const RotatingFrameGrid& grid, const Vec& s, int magnus_order, int cumulant_order);
double cumulant_infidelity(const ControlProblem& p, const Protocol& protocol, int magnus_order, int cumulant_order);

/// Largest spectral norm of the rotating-frame generator over |s| <= 1.
double generator_bound(const ControlProblem& p);
double magnus_convergence_radius(const ControlProblem& p);
int dyson_truncation_estimate(const ControlProblem& p, double T);

double evaluate_truncated(const ExpansionCoefficients& coeffs, const Protocol& protocol);
std::string coefficients_csv(const ExpansionCoefficients& coeffs);

/// A landscape that SD and LMC can query.
class Landscape {
public:
    enum class Kind { exact, dyson, taylor, magnus, cumulant };

    static Landscape exact(const ControlProblem& p, double T, int L);
    static Landscape truncated(ExpansionCoefficients coeffs);
    static Landscape magnus(const ControlProblem& p, double T, int L, int order);
    static Landscape cumulant(const ControlProblem& p, double T, int L, int magnus_order, int cumulant_order);

    double operator()(const Vec& s) const;
    Kind kind() const { return kind_; }
    double T() const { return T_; }
    int L() const { return L_; }
    int order() const { return order_; }
    const ControlProblem& problem() const { return *problem_; }
    std::string label() const;

private:
    Kind kind_ = Kind::exact;
    double T_ = 0.0;
    int L_ = 0;
    int order_ = 0;
    int cumulant_order_ = 0;
    std::shared_ptr<const ControlProblem> problem_;
    std::shared_ptr<const ExpansionCoefficients> coeffs_;
    std::shared_ptr<const RotatingFrameGrid> grid_;
};

}  // namespace clpt
