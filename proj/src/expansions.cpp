#include "clpt/expansions.hpp"

#include "clpt/csv.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace clpt {

namespace {

Mat commutator(const Mat& a, const Mat& b) { return a * b - b * a; }

Mat expm_antisymmetric(const Mat& A) {
    if (A.rows() == 3) {
        const double theta = std::sqrt(0.5 * A.squaredNorm());
        Mat A2 = A * A;
        if (theta < 1e-8) return Mat::Identity(3, 3) + A + 0.5 * A2;
        return Mat::Identity(3, 3) + (std::sin(theta) / theta) * A + ((1.0 - std::cos(theta)) / (theta * theta)) * A2;
    }
    return A.exp();
}

void check_order(int order, int lo, int hi) {
    if (order < lo || order > hi)
        throw std::invalid_argument("expansion order " + std::to_string(order) + " outside [" + std::to_string(lo) +
                                    "," + std::to_string(hi) + "]");
}

}  // namespace

Mat MagnusStack::sum() const {
    Mat s = Mat::Zero(terms.front().rows(), terms.front().cols());
    for (const auto& t : terms) s += t;
    return s;
}

std::vector<Mat> ordered_step_integrals(const Mat& A, const Mat& B, int k) {
    const int n = static_cast<int>(A.rows());
    Mat big = Mat::Zero((k + 1) * n, (k + 1) * n);
    for (int r = 0; r <= k; ++r) {
        big.block(r * n, r * n, n, n) = A;
        if (r < k) big.block(r * n, (r + 1) * n, n, n) = B;
    }
    Mat X = big.exp();
    std::vector<Mat> out;
    for (int j = 0; j <= k; ++j) out.push_back(X.block(0, j * n, n, n));
    return out;
}

RotatingFrameGrid rotating_frame_grid(const ControlProblem& p, double T, int L, int order) {
    check_order(order, 1, 3);
    if (L < 1) throw std::invalid_argument("L must be positive");
    RotatingFrameGrid g;
    g.T = T;
    g.L = L;
    g.order = order;
    g.n0 = p.n0;
    g.constant = 1.0 - 1.0 / p.hilbert_dim;
    g.M0T = drift_propagator(p, T);
    g.n_star_rot = g.M0T.transpose() * p.n_star;

    const double dt = T / L;
    const int kmax = std::max(order, 2);
    std::vector<Mat> X = ordered_step_integrals(dt * p.m0, dt * p.m1, kmax);
    const Mat& step = X[0];
    // Normalized so that a generator constant over the step gives B, B^2, B^3.
    const double w1 = dt > 0 ? 1.0 / dt : 0.0;
    const double w2 = dt > 0 ? 2.0 / (dt * dt) : 0.0;
    const double w3 = dt > 0 ? 6.0 / (dt * dt * dt) : 0.0;

    g.B.resize(L);
    if (order >= 2) g.D.resize(L);
    if (order >= 3) g.E.resize(L);
    Mat left = Mat::Identity(p.dual_dim, p.dual_dim);   // M0(t_i)
    for (int i = 0; i < L; ++i) {
        Mat right = step * left;                         // M0(t_{i+1})
        Mat rT = right.transpose();
        g.B[i] = w1 * rT * X[1] * left;
        if (order >= 2) g.D[i] = w2 * rT * X[2] * left;
        if (order >= 3) g.E[i] = w3 * rT * X[3] * left;
        left = right;
    }
    return g;
}

ExpansionCoefficients dyson_coefficients(const ControlProblem& p, double T, int order, int L) {
    return dyson_coefficients(rotating_frame_grid(p, T, L, order));
}

ExpansionCoefficients dyson_coefficients(const RotatingFrameGrid& g) {
    const int L = g.L;
    ExpansionCoefficients c;
    c.kind = ExpansionKind::dyson;
    c.order = g.order;
    c.T = g.T;
    c.center = Protocol::constant(g.T, L, 0.0);
    c.c = g.constant - 0.5 * g.n_star_rot.dot(g.n0);
    c.b.resize(L);
    const int n = static_cast<int>(g.n0.size());
    Mat U(n, L), V(n, L);
    for (int i = 0; i < L; ++i) {
        c.b(i) = -0.5 * g.n_star_rot.dot(g.B[i] * g.n0);
        U.col(i) = g.B[i].transpose() * g.n_star_rot;
        V.col(i) = g.B[i] * g.n0;
    }
    c.J = Mat::Zero(L, L);
    if (g.order >= 2) {
        Mat UV = -0.5 * U.transpose() * V;   // (i, j) -> later i, earlier j
#pragma omp parallel for schedule(static)
        for (int i = 0; i < L; ++i) {
            for (int j = 0; j < i; ++j) {
                c.J(i, j) = UV(i, j);
                c.J(j, i) = UV(i, j);
            }
            c.J(i, i) = -0.5 * g.n_star_rot.dot(g.D[i] * g.n0);
        }
    }
    if (g.order >= 3) c.K3 = dyson_cubic_kernel(g);
    return c;
}

std::vector<double> dyson_cubic_kernel_serial(const RotatingFrameGrid& g) {
    const int L = g.L;
    const size_t Ls = static_cast<size_t>(L);
    std::vector<double> K(Ls * Ls * Ls);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
            for (int k = 0; k < L; ++k) {
                int t[3] = {i, j, k};
                std::sort(t, t + 3, std::greater<int>());
                const int a = t[0], b = t[1], cc = t[2];
                Mat P;
                if (a == b && b == cc) P = g.E[a];
                else if (a == b) P = g.D[a] * g.B[cc];
                else if (b == cc) P = g.B[a] * g.D[b];
                else P = g.B[a] * g.B[b] * g.B[cc];
                K[(static_cast<size_t>(i) * Ls + j) * Ls + k] = -0.5 * g.n_star_rot.dot(P * g.n0);
            }
    return K;
}

std::vector<double> dyson_cubic_kernel(const RotatingFrameGrid& g) {
    const int L = g.L;
    const size_t Ls = static_cast<size_t>(L);
    const int n = static_cast<int>(g.n0.size());
    std::vector<double> K(Ls * Ls * Ls);
    Mat U(n, L), V(n, L), Ud(n, L), Vd(n, L);
    for (int i = 0; i < L; ++i) {
        U.col(i) = g.B[i].transpose() * g.n_star_rot;
        V.col(i) = g.B[i] * g.n0;
        Ud.col(i) = g.D[i].transpose() * g.n_star_rot;
        Vd.col(i) = g.D[i] * g.n0;
    }
    auto put = [&](int a, int b, int c, double v) {
        const int idx[6][3] = {{a, b, c}, {a, c, b}, {b, a, c}, {b, c, a}, {c, a, b}, {c, b, a}};
        for (const auto& q : idx) K[(static_cast<size_t>(q[0]) * Ls + q[1]) * Ls + q[2]] = v;
    };
#pragma omp parallel for schedule(dynamic)
    for (int a = 0; a < L; ++a) {
        for (int b = 0; b <= a; ++b) {
            Vec w = g.B[b].transpose() * U.col(a);   // B_b^T B_a^T n*'
            for (int c = 0; c <= b; ++c) {
                double v;
                if (a == b && b == c) v = -0.5 * g.n_star_rot.dot(g.E[a] * g.n0);
                else if (a == b) v = -0.5 * Ud.col(a).dot(V.col(c));
                else if (b == c) v = -0.5 * U.col(a).dot(Vd.col(b));
                else v = -0.5 * w.dot(V.col(c));
                put(a, b, c, v);
            }
        }
    }
    return K;
}

namespace {

struct StepDerivatives {
    std::vector<Mat> E, F, G;   // exp, d/ds, d^2/ds^2
    std::vector<Vec> fw, bw;    // state before step i, costate after step i
};

StepDerivatives step_derivatives(const ControlProblem& p, const Protocol& center, bool second) {
    const int L = center.L();
    const double dt = center.dt();
    StepDerivatives d;
    d.E.resize(L);
    d.F.resize(L);
    if (second) d.G.resize(L);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < L; ++i) {
        std::vector<Mat> X = ordered_step_integrals(dt * (p.m0 + center.s(i) * p.m1), dt * p.m1, second ? 2 : 1);
        d.E[i] = X[0];
        d.F[i] = X[1];
        if (second) d.G[i] = 2.0 * X[2];
    }
    d.fw.resize(L + 1);
    d.bw.resize(L);
    d.fw[0] = p.n0;
    for (int i = 0; i < L; ++i) d.fw[i + 1] = d.E[i] * d.fw[i];
    Vec lam = p.n_star;
    for (int i = L - 1; i >= 0; --i) {
        d.bw[i] = lam;
        lam = d.E[i].transpose() * lam;
    }
    return d;
}

}  // namespace

ExpansionCoefficients taylor_coefficients_at(const ControlProblem& p, const Protocol& center, int order) {
    check_order(order, 1, 2);
    center.validate();
    const int L = center.L();
    const double dt = center.dt();
    StepDerivatives d = step_derivatives(p, center, order >= 2);

    ExpansionCoefficients c;
    c.kind = ExpansionKind::taylor;
    c.order = order;
    c.T = center.T;
    c.center = center;
    c.c = 1.0 - 1.0 / p.hilbert_dim - 0.5 * p.n_star.dot(d.fw[L]);
    c.b.resize(L);
    const int n = p.dual_dim;
    Mat W(n, L);
    for (int i = 0; i < L; ++i) {
        W.col(i) = d.F[i].transpose() * d.bw[i];
        c.b(i) = -0.5 * W.col(i).dot(d.fw[i]) / dt;
    }
    c.J = Mat::Zero(L, L);
    if (order >= 2) {
        const double w = -0.5 / (dt * dt);
#pragma omp parallel for schedule(dynamic)
        for (int j = 0; j < L; ++j) {
            c.J(j, j) = w * d.bw[j].dot(d.G[j] * d.fw[j]);
            Vec u = d.F[j] * d.fw[j];
            for (int i = j + 1; i < L; ++i) {
                const double v = w * W.col(i).dot(u);
                c.J(i, j) = v;
                c.J(j, i) = v;
                u = d.E[i] * u;
            }
        }
    }
    return c;
}

Mat taylor_hessian_serial(const ControlProblem& p, const Protocol& center) {
    const int L = center.L();
    const double dt = center.dt();
    const int n = p.dual_dim;
    StepDerivatives d = step_derivatives(p, center, true);
    std::vector<Mat> P(L + 1), Q(L + 1);   // P[i] = E_{i-1}..E_0, Q[i] = E_{L-1}..E_i
    P[0] = Mat::Identity(n, n);
    for (int i = 0; i < L; ++i) P[i + 1] = d.E[i] * P[i];
    Q[L] = Mat::Identity(n, n);
    for (int i = L - 1; i >= 0; --i) Q[i] = Q[i + 1] * d.E[i];
    Mat H = Mat::Zero(L, L);
    for (int j = 0; j < L; ++j) {
        H(j, j) = -0.5 * p.n_star.dot(Q[j + 1] * d.G[j] * P[j] * p.n0);
        Mat R = d.F[j] * P[j];
        for (int i = j + 1; i < L; ++i) {
            Mat d2 = Q[i + 1] * d.F[i] * R;
            H(i, j) = H(j, i) = -0.5 * p.n_star.dot(d2 * p.n0);
            R = d.E[i] * R;
        }
    }
    return H / (dt * dt);
}

MagnusStack magnus_terms(const RotatingFrameGrid& g, const Vec& s, int order) {
    check_order(order, 1, 3);
    if (order > 1 && g.D.empty()) throw std::invalid_argument("rotating-frame grid built below the Magnus order");
    const int L = g.L;
    const int n = static_cast<int>(g.n0.size());
    const double dt = g.T / L;
    std::vector<Mat> X(L);
    for (int i = 0; i < L; ++i) X[i] = (dt * s(i)) * g.B[i];

    MagnusStack st;
    Mat omega1 = Mat::Zero(n, n);
    for (const auto& x : X) omega1 += x;
    st.terms.push_back(omega1);
    if (order == 1) return st;

    // C[i] = sum_{j<i} X_j, R[i] = sum_{j>i} X_j
    std::vector<Mat> C(L), R(L);
    Mat acc = Mat::Zero(n, n);
    for (int i = 0; i < L; ++i) {
        C[i] = acc;
        acc += X[i];
    }
    acc.setZero();
    for (int i = L - 1; i >= 0; --i) {
        R[i] = acc;
        acc += X[i];
    }

    Mat omega2 = Mat::Zero(n, n);
    for (int i = 0; i < L; ++i) {
        omega2 += 0.5 * commutator(X[i], C[i]);
        Mat inner = g.D[i] - g.D[i].transpose();
        omega2 += (0.25 * dt * dt * s(i) * s(i)) * inner;
    }
    st.terms.push_back(omega2);
    if (order == 2) return st;

    // Strictly ordered a > b > c via prefix sums and the Jacobi identity;
    // pairs sharing a step use the step-averaged generator with weight 1/2.
    Mat s1 = Mat::Zero(n, n), s2 = Mat::Zero(n, n), pairs = Mat::Zero(n, n);
    Mat Ysum = Mat::Zero(n, n);
    for (int a = 0; a < L; ++a) {
        s1 += commutator(X[a], Ysum);
        Ysum += commutator(X[a], C[a]);
        s2 += commutator(X[a], commutator(C[a], R[a]));
        pairs += 0.5 * commutator(X[a], commutator(X[a], C[a]));
        pairs += 0.5 * commutator(commutator(R[a], X[a]), X[a]);
    }
    st.terms.push_back((2.0 * s1 + s2 + pairs) / 6.0);
    return st;
}

Mat magnus_propagator(const ControlProblem& p, const Protocol& protocol, int order) {
    RotatingFrameGrid g = rotating_frame_grid(p, protocol.T, protocol.L(), std::max(order, 2));
    return expm_antisymmetric(magnus_terms(g, protocol.s, order).sum());
}

double magnus_infidelity(const RotatingFrameGrid& g, const Vec& s, int order) {
    Mat M = expm_antisymmetric(magnus_terms(g, s, order).sum());
    return g.constant - 0.5 * g.n_star_rot.dot(M * g.n0);
}

std::vector<double> cumulants(const RotatingFrameGrid& g, const Mat& sigma, int order) {
    if (order < 0 || order > 5) throw std::invalid_argument("cumulant order must lie in [0,5]");
    const double d_inv = 1.0 - g.constant;
    const double D = 2.0 * d_inv + g.n_star_rot.dot(g.n0);
    if (D <= 0.0) throw ExpansionBreakdown("cumulant expansion breakdown: 2/d + n*'.n0 <= 0");
    // a_k = n*' Sigma^k n0 / (k! D); log(1 + sum a_k e^k) = sum f_m e^m
    std::vector<double> a(order + 1, 0.0), f(order + 1, 0.0);
    Vec v = g.n0;
    double fact = 1.0;
    for (int k = 1; k <= order; ++k) {
        v = sigma * v;
        fact *= k;
        a[k] = g.n_star_rot.dot(v) / (fact * D);
    }
    std::vector<double> kappa(order + 1, 0.0);
    kappa[0] = std::log(0.5 * D);
    fact = 1.0;
    for (int m = 1; m <= order; ++m) {
        double acc = a[m];
        for (int k = 1; k < m; ++k) acc -= static_cast<double>(k) / m * f[k] * a[m - k];
        f[m] = acc;
        fact *= m;
        kappa[m] = fact * f[m];
    }
    return kappa;
}

double cumulant_infidelity(const RotatingFrameGrid& g, const Vec& s, int magnus_order, int cumulant_order) {
    Mat sigma = magnus_terms(g, s, magnus_order).sum();
    std::vector<double> kappa = cumulants(g, sigma, cumulant_order);
    double acc = 0.0, fact = 1.0;
    for (int m = 0; m <= cumulant_order; ++m) {
        if (m > 0) fact *= m;
        acc += kappa[m] / fact;
    }
    return 1.0 - std::exp(acc);
}

double cumulant_infidelity(const ControlProblem& p, const Protocol& protocol, int magnus_order, int cumulant_order) {
    RotatingFrameGrid g = rotating_frame_grid(p, protocol.T, protocol.L(), std::max(magnus_order, 2));
    return cumulant_infidelity(g, protocol.s, magnus_order, cumulant_order);
}

double generator_bound(const ControlProblem& p) {
    // The rotating frame is an orthogonal similarity, so ||m'(t)|| = ||m1||.
    Eigen::JacobiSVD<Mat> svd(p.m1);
    return svd.singularValues()(0);
}

double magnus_convergence_radius(const ControlProblem& p) { return M_PI / generator_bound(p); }

int dyson_truncation_estimate(const ControlProblem& p, double T) {
    if (!(T > 0.0)) throw std::invalid_argument("T must be positive");
    return std::max(1, static_cast<int>(std::ceil(T * generator_bound(p))));
}

double evaluate_truncated(const ExpansionCoefficients& c, const Protocol& protocol) {
    const int L = c.L();
    if (protocol.L() != L) throw std::invalid_argument("protocol length does not match the expansion");
    const double dt = c.T / L;
    Vec ds = protocol.s - c.center.s;
    double v = c.c + dt * c.b.dot(ds);
    if (c.order >= 2) v += 0.5 * dt * dt * ds.dot(c.J * ds);
    if (c.order >= 3) {
        const size_t Ls = static_cast<size_t>(L);
        double cubic = 0.0;
        for (int i = 0; i < L; ++i) {
            if (ds(i) == 0.0) continue;
            double inner = 0.0;
            for (int j = 0; j < L; ++j) {
                if (ds(j) == 0.0) continue;
                const double* row = &c.K3[(static_cast<size_t>(i) * Ls + j) * Ls];
                inner += ds(j) * Eigen::Map<const Vec>(row, L).dot(ds);
            }
            cubic += ds(i) * inner;
        }
        v += dt * dt * dt / 6.0 * cubic;
    }
    return v;
}

std::string coefficients_csv(const ExpansionCoefficients& c) {
    std::ostringstream out;
    out << "kind,order,T,L,c\n"
        << (c.kind == ExpansionKind::dyson ? "dyson" : "taylor") << ',' << c.order << ',' << fmt(c.T) << ',' << c.L()
        << ',' << fmt(c.c) << '\n';
    for (int i = 0; i < c.L(); ++i) out << (i ? "," : "") << fmt(c.b(i));
    out << '\n';
    for (int i = 0; i < c.L(); ++i) {
        for (int j = 0; j < c.L(); ++j) out << (j ? "," : "") << fmt(c.J(i, j));
        out << '\n';
    }
    return out.str();
}

Landscape Landscape::exact(const ControlProblem& p, double T, int L) {
    Landscape l;
    l.kind_ = Kind::exact;
    l.T_ = T;
    l.L_ = L;
    l.problem_ = std::make_shared<const ControlProblem>(p);
    return l;
}

Landscape Landscape::truncated(ExpansionCoefficients coeffs) {
    Landscape l;
    l.kind_ = coeffs.kind == ExpansionKind::dyson ? Kind::dyson : Kind::taylor;
    l.T_ = coeffs.T;
    l.L_ = coeffs.L();
    l.order_ = coeffs.order;
    l.coeffs_ = std::make_shared<const ExpansionCoefficients>(std::move(coeffs));
    return l;
}

Landscape Landscape::magnus(const ControlProblem& p, double T, int L, int order) {
    Landscape l;
    l.kind_ = Kind::magnus;
    l.T_ = T;
    l.L_ = L;
    l.order_ = order;
    l.problem_ = std::make_shared<const ControlProblem>(p);
    l.grid_ = std::make_shared<const RotatingFrameGrid>(rotating_frame_grid(p, T, L, std::max(order, 2)));
    return l;
}

Landscape Landscape::cumulant(const ControlProblem& p, double T, int L, int magnus_order, int cumulant_order) {
    Landscape l = magnus(p, T, L, magnus_order);
    l.kind_ = Kind::cumulant;
    l.cumulant_order_ = cumulant_order;
    return l;
}

double Landscape::operator()(const Vec& s) const {
    switch (kind_) {
        case Kind::exact: return infidelity_exact(*problem_, Protocol(T_, s));
        case Kind::dyson:
        case Kind::taylor: return evaluate_truncated(*coeffs_, Protocol(T_, s));
        case Kind::magnus: return magnus_infidelity(*grid_, s, order_);
        case Kind::cumulant: return cumulant_infidelity(*grid_, s, order_, cumulant_order_);
    }
    return 0.0;
}

std::string Landscape::label() const {
    switch (kind_) {
        case Kind::exact: return "exact";
        case Kind::dyson: return "dyson" + std::to_string(order_);
        case Kind::taylor: return "taylor" + std::to_string(order_);
        case Kind::magnus: return "magnus" + std::to_string(order_);
        case Kind::cumulant: return "cumulant" + std::to_string(cumulant_order_);
    }
    return "";
}

}  // namespace clpt
