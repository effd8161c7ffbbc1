#include "clpt/control.hpp"

#include <json.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace clpt {

namespace {

using cd = std::complex<double>;
const cd I1(0.0, 1.0);

CMat mat2(cd a, cd b, cd c, cd d) {
    CMat m(2, 2);
    m << a, b, c, d;
    return m;
}

// Triplet sector |uu>, |T0>, |dd>.
CMat diag3(double a, double b, double c) {
    CMat m = CMat::Zero(3, 3);
    m(0, 0) = a;
    m(1, 1) = b;
    m(2, 2) = c;
    return m;
}
CMat triplet_sz_total() { return diag3(1.0, 0.0, -1.0); }
CMat triplet_szsz() { return diag3(0.25, -0.25, 0.25); }
CMat triplet_sx_total() {
    CMat m = CMat::Zero(3, 3);
    const double r = 1.0 / std::sqrt(2.0);
    m(0, 1) = m(1, 0) = m(1, 2) = m(2, 1) = r;
    return m;
}

Vec dual_of_operator(const std::vector<CMat>& basis, const CMat& A) {
    Vec v(basis.size());
    for (size_t i = 0; i < basis.size(); ++i) v(i) = 2.0 * (basis[i] * A).trace().real();
    return v;
}

void finish_problem(ControlProblem& p) {
    p.dual_dim = static_cast<int>(p.basis.size());
    p.f = structure_constants(p.basis);
    p.generators.assign(p.dual_dim, Mat::Zero(p.dual_dim, p.dual_dim));
    for (int k = 0; k < p.dual_dim; ++k)
        for (int i = 0; i < p.dual_dim; ++i)
            for (int j = 0; j < p.dual_dim; ++j) p.generators[k](i, j) = p.structure_constant(i, j, k);
    p.m0 = dual_generator(p.basis, p.f, p.H0);
    p.m1 = dual_generator(p.basis, p.f, p.H1);
    p.n0 = dualize_state(p.psi0, p);
    p.n_star = dualize_state(p.psi_star, p);
}

// Adjoint action of a unitary on dual vectors: 2 Re Tr(S^i V S^j V^dagger).
Mat adjoint_action(const std::vector<CMat>& basis, const CMat& V) {
    const int n = static_cast<int>(basis.size());
    Mat M(n, n);
    for (int j = 0; j < n; ++j) {
        CMat A = V * basis[j] * V.adjoint();
        for (int i = 0; i < n; ++i) M(i, j) = 2.0 * (basis[i].cwiseProduct(A.transpose())).sum().real();
    }
    return M;
}

}  // namespace

std::string model_name(Model m) { return m == Model::single_qubit ? "1q" : "2q"; }

Model parse_model(const std::string& name) {
    if (name == "1q") return Model::single_qubit;
    if (name == "2q") return Model::two_qubit;
    throw std::invalid_argument("unknown model '" + name + "' (expected 1q or 2q)");
}

Protocol Protocol::constant(double T, int L, double value) { return Protocol(T, Vec::Constant(L, value)); }

bool Protocol::bounded(double tol) const { return s.size() == 0 || s.cwiseAbs().maxCoeff() <= 1.0 + tol; }

void Protocol::validate() const {
    if (s.size() < 1) throw std::invalid_argument("protocol needs at least one step");
    if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("protocol duration must be finite and >= 0");
    if (!bounded(1e-12)) throw std::invalid_argument("protocol values must satisfy |s| <= 1");
}

std::vector<CMat> pauli_basis() {
    return {mat2(0, 0.5, 0.5, 0), mat2(0, -0.5 * I1, 0.5 * I1, 0), mat2(0.5, 0, 0, -0.5)};
}

std::vector<CMat> gell_mann_basis() {
    std::vector<CMat> l(8, CMat::Zero(3, 3));
    l[0](0, 1) = l[0](1, 0) = 1.0;
    l[1](0, 1) = -I1;
    l[1](1, 0) = I1;
    l[2](0, 0) = 1.0;
    l[2](1, 1) = -1.0;
    l[3](0, 2) = l[3](2, 0) = 1.0;
    l[4](0, 2) = -I1;
    l[4](2, 0) = I1;
    l[5](1, 2) = l[5](2, 1) = 1.0;
    l[6](1, 2) = -I1;
    l[6](2, 1) = I1;
    l[7](0, 0) = l[7](1, 1) = 1.0 / std::sqrt(3.0);
    l[7](2, 2) = -2.0 / std::sqrt(3.0);
    for (auto& m : l) m *= 0.5;
    return l;
}

std::vector<double> structure_constants(const std::vector<CMat>& basis) {
    const size_t n = basis.size();
    std::vector<double> f(n * n * n, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
            CMat c = basis[i] * basis[j] - basis[j] * basis[i];
            for (size_t k = 0; k < n; ++k) {
                double v = (-2.0 * I1 * (c * basis[k]).trace()).real();
                f[(i * n + j) * n + k] = std::abs(v) < 1e-14 ? 0.0 : v;
            }
        }
    return f;
}

Mat dual_generator(const std::vector<CMat>& basis, const std::vector<double>& f, const CMat& H) {
    const int n = static_cast<int>(basis.size());
    Vec h = dual_of_operator(basis, H);
    Mat m = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) m(i, j) += f[(static_cast<size_t>(i) * n + j) * n + k] * h(k);
    return m;
}

CVec ground_state(const CMat& H) {
    Eigen::SelfAdjointEigenSolver<CMat> es(H);
    CVec psi = es.eigenvectors().col(0);
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
        if (std::abs(psi(i)) > 1e-12) {
            psi *= std::conj(psi(i)) / std::abs(psi(i));
            break;
        }
    }
    return psi;
}

ControlProblem build_single_qubit_problem(double h_z, double h_x) {
    ControlProblem p;
    p.model = Model::single_qubit;
    p.h_z = h_z;
    p.h_x = h_x;
    p.J = 0.0;
    p.hilbert_dim = 2;
    p.basis = pauli_basis();
    const CMat& sx = p.basis[0];
    const CMat& sz = p.basis[2];
    p.H0 = h_z * sz;
    p.H1 = h_x * sx;
    // Ground states of h_z (S^z + r S^x); r = -2 initial, r = +2 target.
    p.psi0 = ground_state(h_z * (sz - 2.0 * sx));
    p.psi_star = ground_state(h_z * (sz + 2.0 * sx));
    finish_problem(p);
    return p;
}

ControlProblem build_two_qubit_problem(double h_z, double h_x, double J) {
    ControlProblem p;
    p.model = Model::two_qubit;
    p.h_z = h_z;
    p.h_x = h_x;
    p.J = J;
    p.hilbert_dim = 3;
    p.basis = gell_mann_basis();
    const CMat sz = triplet_sz_total(), szsz = triplet_szsz(), sx = triplet_sx_total();
    p.H0 = J * szsz + h_z * sz;
    p.H1 = h_x * sx;
    // States use J / h_z = 1.
    p.psi0 = ground_state(h_z * (szsz + sz - 2.0 * sx));
    p.psi_star = ground_state(h_z * (szsz + sz + 2.0 * sx));
    finish_problem(p);
    return p;
}

ControlProblem build_problem(Model model, double h_z, double h_x, double J) {
    return model == Model::single_qubit ? build_single_qubit_problem(h_z, h_x) : build_two_qubit_problem(h_z, h_x, J);
}

std::string problem_to_json(const ControlProblem& p) {
    nlohmann::ordered_json j;
    j["model"] = model_name(p.model);
    j["h_z"] = p.h_z;
    j["h_x"] = p.h_x;
    j["J"] = p.J;
    return j.dump();
}

ControlProblem problem_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Model m = parse_model(j.at("model").get<std::string>());
    double h_z = j.value("h_z", -1.0);
    double h_x = j.value("h_x", -std::sqrt(5.0));
    double J = j.value("J", m == Model::two_qubit ? -2.0 : 0.0);
    return build_problem(m, h_z, h_x, J);
}

Vec dualize_state(const CVec& psi, const ControlProblem& p) {
    if (psi.size() != p.hilbert_dim) throw std::invalid_argument("state dimension does not match the problem");
    if (std::abs(psi.squaredNorm() - 1.0) > 1e-12) throw std::invalid_argument("state is not normalized");
    Vec n(p.basis.size());
    for (size_t i = 0; i < p.basis.size(); ++i) n(i) = 2.0 * psi.dot(p.basis[i] * psi).real();
    return n;
}

CMat density_from_dual(const Vec& n, const ControlProblem& p) {
    CMat rho = CMat::Identity(p.hilbert_dim, p.hilbert_dim) / static_cast<double>(p.hilbert_dim);
    for (size_t i = 0; i < p.basis.size(); ++i) rho += n(i) * p.basis[i];
    return rho;
}

Mat step_exponential_generic(const ControlProblem& p, double dt, double s) {
    Mat A = dt * (p.m0 + s * p.m1);
    return A.exp();
}

Mat step_exponential(const ControlProblem& p, double dt, double s) {
    if (p.dual_dim == 3) {
        // Rodrigues
        Mat A = dt * (p.m0 + s * p.m1);
        const double theta = std::sqrt(0.5 * A.squaredNorm());
        Mat A2 = A * A;
        Mat E = Mat::Identity(3, 3);
        if (theta < 1e-8) return E + A + 0.5 * A2;
        return E + (std::sin(theta) / theta) * A + ((1.0 - std::cos(theta)) / (theta * theta)) * A2;
    }
    if (p.dual_dim == 8) {
        // exp(dt m) is the adjoint action of exp(+i dt H).
        CMat H = p.H0 + s * p.H1;
        Eigen::SelfAdjointEigenSolver<CMat> es(H);
        CVec phase = (I1 * dt * es.eigenvalues().cast<cd>()).array().exp();
        CMat V = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
        return adjoint_action(p.basis, V);
    }
    return step_exponential_generic(p, dt, s);
}

Mat propagate_exact(const ControlProblem& p, const Protocol& protocol) {
    Mat M = Mat::Identity(p.dual_dim, p.dual_dim);
    const double dt = protocol.dt();
    for (int i = 0; i < protocol.L(); ++i) M = step_exponential(p, dt, protocol.s(i)) * M;
    return M;
}

Mat drift_propagator(const ControlProblem& p, double t) { return step_exponential(p, t, 0.0); }

Mat rotating_generator(const ControlProblem& p, double t) {
    Mat M0 = drift_propagator(p, t);
    return M0.transpose() * p.m1 * M0;
}

double infidelity_from_propagator(const ControlProblem& p, const Mat& M) {
    return 1.0 - 1.0 / p.hilbert_dim - 0.5 * p.n_star.dot(M * p.n0);
}

double infidelity_exact(const ControlProblem& p, const Protocol& protocol) {
    double v = infidelity_from_propagator(p, propagate_exact(p, protocol));
    if (v < -1e-10 || v > 1.0 + 1e-10) throw std::runtime_error("infidelity left [0,1]: propagator lost orthogonality");
    return std::clamp(v, 0.0, 1.0);
}

double orthogonality_defect(const Mat& M) {
    return (M.transpose() * M - Mat::Identity(M.rows(), M.cols())).cwiseAbs().maxCoeff();
}

}  // namespace clpt
