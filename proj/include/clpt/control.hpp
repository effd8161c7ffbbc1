#pragma once

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <vector>

namespace clpt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

enum class Model { single_qubit, two_qubit };

std::string model_name(Model m);   // "1q" / "2q"
Model parse_model(const std::string& name);

/// Dual (orthogonal-group) description of a driven two-level or triplet problem.
///
/// Generators follow m = sum_k h_k T_k with (T_k)_ij = f_ijk and
/// [S^i, S^j] = i f_ijk S^k. For the real Hamiltonians and real states used
/// here this generates the complex-conjugate evolution, which leaves every
/// infidelity unchanged.
struct ControlProblem {
    Model model = Model::single_qubit;
    double h_z = -1.0;
    double h_x = 0.0;
    double J = 0.0;

    int hilbert_dim = 2;   ///< 2 for one qubit, 3 for the two-qubit triplet sector
    int dual_dim = 3;      ///< d^2 - 1

    std::vector<CMat> basis;        ///< S^i with Tr(S^i S^j) = delta_ij / 2
    std::vector<double> f;          ///< structure constants, row-major (i, j, k)
    std::vector<Mat> generators;    ///< (T_k)_ij = f_ijk

    Mat m0;   ///< drift generator
    Mat m1;   ///< control generator (per unit s)
    Vec n0;
    Vec n_star;

    CMat H0;  ///< drift Hamiltonian in the working Hilbert space
    CMat H1;  ///< control Hamiltonian per unit s
    CVec psi0;
    CVec psi_star;

    double structure_constant(int i, int j, int k) const {
        return f[(static_cast<size_t>(i) * dual_dim + j) * dual_dim + k];
    }
};

/// Piecewise-constant protocol on L uniform steps over [0, T].
struct Protocol {
    double T = 0.0;
    Vec s;

    Protocol() = default;
    Protocol(double T_, Vec s_) : T(T_), s(std::move(s_)) {}
    static Protocol constant(double T, int L, double value);

    int L() const { return static_cast<int>(s.size()); }
    double dt() const { return T / static_cast<double>(s.size()); }
    double midpoint(int i) const { return (i + 0.5) * dt(); }
    bool bounded(double tol = 0.0) const;
    /// Throws std::invalid_argument on L < 1, T < 0 or |s_i| > 1.
    void validate() const;
};

std::vector<CMat> pauli_basis();
std::vector<CMat> gell_mann_basis();
/// f_ijk = -2i Tr([S^i, S^j] S^k), row-major.
std::vector<double> structure_constants(const std::vector<CMat>& basis);
/// Dual generator of a Hamiltonian: m_ij = sum_k f_ijk 2 Tr(S^k H).
Mat dual_generator(const std::vector<CMat>& basis, const std::vector<double>& f, const CMat& H);

/// Lowest eigenvector, first non-negligible amplitude made real positive.
CVec ground_state(const CMat& H);

ControlProblem build_single_qubit_problem(double h_z = -1.0, double h_x = -2.23606797749978969641);
ControlProblem build_two_qubit_problem(double h_z = -1.0, double h_x = -2.23606797749978969641,
                                       double J = -2.0);
ControlProblem build_problem(Model model, double h_z, double h_x, double J);

/// JSON object {"model": "1q"|"2q", "h_z", "h_x", "J"}.
std::string problem_to_json(const ControlProblem& p);
ControlProblem problem_from_json(const std::string& text);

/// n_i = 2 Re <psi|S^i|psi>. Throws on a non-normalized state.
Vec dualize_state(const CVec& psi, const ControlProblem& p);
/// rho = 1/d + S.n
CMat density_from_dual(const Vec& n, const ControlProblem& p);

/// exp(dt (m0 + s m1)); closed forms for dual_dim 3 and 8, generic Pade otherwise.
Mat step_exponential(const ControlProblem& p, double dt, double s);
/// Generic Pade scaling-and-squaring path, kept as the reference.
Mat step_exponential_generic(const ControlProblem& p, double dt, double s);

/// M = prod_i exp(dt (m0 + s_i m1)), latest step leftmost.
Mat propagate_exact(const ControlProblem& p, const Protocol& protocol);
/// exp(t m0)
Mat drift_propagator(const ControlProblem& p, double t);
/// Rotating-frame control generator per unit s: M0(t)^T m1 M0(t).
Mat rotating_generator(const ControlProblem& p, double t);

/// 1 - 1/d - n_star.(M n0)/2, unclipped.
double infidelity_from_propagator(const ControlProblem& p, const Mat& M);
/// Clipped to [0, 1] after checking the raw value lies within 1e-10 of it.
double infidelity_exact(const ControlProblem& p, const Protocol& protocol);

double orthogonality_defect(const Mat& M);

}  // namespace clpt
