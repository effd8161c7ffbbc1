#include "clpt/field_theory.hpp"

#include "clpt/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace clpt {

double SpectralData::reconstruction_residual(const Protocol& center) const {
    if (center.L() != L) throw std::invalid_argument("center and spectral data differ in L");
    Vec rec = f * x0;
    return (rec - center.s).cwiseAbs().maxCoeff();
}

SpectralData build_spectral_data(const ExpansionCoefficients& coeffs, const HessianSpectrum& spectrum, double kappa,
                                 SpectralConvention conv) {
    const int L = coeffs.L();
    if (spectrum.L() != L || coeffs.center.L() != L) throw std::invalid_argument("coefficients and spectrum differ in L");
    if ((coeffs.center.s - spectrum.center.s).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("coefficients and spectrum differ in center");
    if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
    const double T = coeffs.T;
    const double bs = conv == SpectralConvention::scaled ? T : 1.0;
    const double ls = conv == SpectralConvention::scaled ? T * T : 1.0;

    SpectralData d;
    d.T = T;
    d.L = L;
    d.convention = conv;
    d.c = coeffs.c;
    d.kappa = kappa;
    d.f = spectrum.eigenfunctions;
    d.lambda = ls * spectrum.eigenvalues;
    d.b = bs * (d.f.transpose() * coeffs.b) / L;
    d.x0 = (d.f.transpose() * coeffs.center.s) / L;
    d.x1 = Vec::Zero(L);
    d.I = d.c;
    for (int n = 0; n < L; ++n) {
        if (std::abs(d.lambda(n)) < kLambdaGuard) {
            d.excluded.push_back(n);
            continue;
        }
        d.x1(n) = d.b(n) / d.lambda(n);
        d.I -= 0.5 * d.b(n) * d.x1(n);
    }
    d.n_plus = spectrum.count_above(1e-3);
    return d;
}

SpectralData spectral_data_at(const ControlProblem& p, double T, int L, double delta_guess, double kappa,
                              SpectralConvention conv) {
    auto d0 = continued_delta0(p, T, delta_guess);
    if (!d0) throw std::domain_error("no window width root at T = " + fmt(T));
    Protocol center = s_delta_cell_average(T, *d0, L);
    ExpansionCoefficients coeffs = taylor_coefficients_at(p, center, 2);
    HessianSpectrum spec = hessian_spectrum(coeffs.J, T, center);
    return build_spectral_data(coeffs, spec, kappa, conv);
}

Moments gaussian_boundary_moments() {
    // uniform: (1/2) int s^2 ds = 1/3; Gaussian with precision 3: variance 1/3
    return {0.0, 1.0 / 3.0};
}

Vec delta_x(const SpectralData& d, const Vec& k) {
    Vec dx = d.x0 - d.x1;
    if (k.size() > 0) {
        if (k.size() != d.L) throw std::invalid_argument("source vector has wrong length");
        dx -= k / (d.kappa * d.L);
    }
    return dx;
}

namespace {

void check_pole(double den) {
    if (!(den > 0.0)) throw SaddleError("omega evaluated at or beyond a pole");
}

}  // namespace

double omega(double y, const SpectralData& d, const Vec& k) {
    Vec dx = delta_x(d, k);
    const double w = dx.squaredNorm();
    double s = 0.0;
    for (int n = 0; n < d.L; ++n) {
        const double den = 1.0 + d.lambda(n) * y;
        if (dx(n) * dx(n) <= kWeightlessMode * w) continue;
        check_pole(den);
        s += dx(n) * dx(n) / den;
    }
    return d.kappa * (-d.I * y + 0.5 * s);
}

double omega_prime(double y, const SpectralData& d, const Vec& k) {
    Vec dx = delta_x(d, k);
    const double w = dx.squaredNorm();
    double s = 0.0;
    for (int n = 0; n < d.L; ++n) {
        const double den = 1.0 + d.lambda(n) * y;
        if (dx(n) * dx(n) <= kWeightlessMode * w) continue;
        check_pole(den);
        s += dx(n) * dx(n) * d.lambda(n) / (den * den);
    }
    return -d.kappa * (d.I + 0.5 * s);
}

double omega_second(double y, const SpectralData& d, const Vec& k) {
    Vec dx = delta_x(d, k);
    const double w = dx.squaredNorm();
    double s = 0.0;
    for (int n = 0; n < d.L; ++n) {
        const double den = 1.0 + d.lambda(n) * y;
        if (dx(n) * dx(n) <= kWeightlessMode * w) continue;
        check_pole(den);
        s += dx(n) * dx(n) * d.lambda(n) * d.lambda(n) / (den * den * den);
    }
    return d.kappa * s;
}

SaddlePoint solve_saddle(const SpectralData& d, const Vec& k) {
    if (!(d.lambda.size() > 0 && d.lambda.maxCoeff() > 0.0 && d.lambda.minCoeff() < 0.0))
        throw SaddleError("saddle needs both positive and negative eigenvalues");
    // poles of Omega are the -1/lambda_n whose dx_n does not vanish; a side
    // without such a pole extends to infinity
    Vec dx = delta_x(d, k);
    const double w = dx.squaredNorm();
    double lp = 0.0, lm = 0.0;
    for (int n = 0; n < d.L; ++n) {
        if (dx(n) * dx(n) <= kWeightlessMode * w) continue;
        lp = std::max(lp, d.lambda(n));
        lm = std::min(lm, d.lambda(n));
    }
    const double inf = std::numeric_limits<double>::infinity();
    SaddlePoint sp;
    sp.lo = lp > 0.0 ? -1.0 / lp : -inf;
    sp.hi = lm < 0.0 ? -1.0 / lm : inf;
    sp.lambda_plus = lp;
    sp.lambda_minus = lm;
    if (!(lp > 0.0) && !(lm < 0.0)) throw SaddleError("no stationary point of omega: every dx_n vanishes");

    double scale = std::abs(d.I);
    for (int n = 0; n < d.L; ++n) scale += 0.5 * dx(n) * dx(n) * std::abs(d.lambda(n));
    scale *= d.kappa;
    const double tol = 1e-12 * std::max(scale, 1e-300);

    // Omega' increases monotonically on (lo, hi); finite ends first, then
    // safeguarded Newton.
    double a = sp.lo, b = sp.hi;
    if (std::isinf(a) || std::isinf(b)) {
        const double edge = std::isinf(a) ? b : a;
        const double dir = std::isinf(a) ? -1.0 : 1.0;
        double step = 1.0 / std::max(lp, -lm);
        for (int it = 0;; ++it) {
            const double y = edge + dir * step;
            const double f = omega_prime(y, d, k);
            if (dir < 0 ? f <= 0.0 : f >= 0.0) {
                (dir < 0 ? a : b) = y;
                break;
            }
            (dir < 0 ? b : a) = y;
            step *= 2.0;
            if (it > 200) throw SaddleError("no stationary point of omega: derivative keeps its sign at infinity");
        }
    }
    double y = 0.5 * (a + b);
    double fy = omega_prime(y, d, k);
    int it = 0;
    for (; it < 500 && std::abs(fy) > tol; ++it) {
        if (fy < 0.0)
            a = y;
        else
            b = y;
        double yn = y - fy / omega_second(y, d, k);
        if (!(yn > a && yn < b)) yn = 0.5 * (a + b);
        if (yn == y) break;
        y = yn;
        fy = omega_prime(y, d, k);
    }
    if (std::abs(fy) > tol) {
        // accept only a converged interior root; a collapse onto a pole means
        // Omega' does not change sign on the interval
        const double width = std::isfinite(sp.hi - sp.lo) ? sp.hi - sp.lo : std::abs(b) + std::abs(a);
        const double rel = (b - a) / width;
        if (rel > 1e-14 || y - sp.lo < 1e-12 * width || sp.hi - y < 1e-12 * width)
            throw SaddleError("no stationary point of omega inside the pole interval");
    }
    sp.y = y;
    sp.iterations = it;
    sp.residual = -fy / d.kappa;
    return sp;
}

double r0(double x) { return (1.0 + x) / (1.0 + x * x); }

QPrediction q_prediction(const SpectralData& d) {
    QPrediction q;
    q.T = d.T;
    q.L = d.L;
    q.saddle = solve_saddle(d);
    const double y = q.saddle.y;
    const double kL = d.kappa * d.L;
    Vec dx = delta_x(d);
    const double oyy = omega_second(y, d);
    q.variance.resize(d.L);
    for (int n = 0; n < d.L; ++n) {
        const double u = d.lambda(n) * y;
        if (!(1.0 + u > 0.0))
            throw SaddleError("saddle lies beyond the branch point of mode " + std::to_string(n + 1));
        q.leading += 1.0 / (1.0 + u) / kL;
        q.leading_r0 += r0(u) / kL;
        // d/dk_n of the saddle location enters through Omega_ky
        const double oky = dx(n) * d.lambda(n) / (d.L * (1.0 + u) * (1.0 + u));
        q.variance(n) = 1.0 / (kL * (1.0 + u)) - d.L * oky * oky / oyy;
    }
    q.corrected = q.variance.sum();
    q.difference = q.corrected - q.leading;
    q.halved = 0.5 * q.leading;
    return q;
}

double coarse_grain_entropy(const Vec& s, double N) {
    auto h = [](double p) { return p > 0.0 ? p * std::log(p) : 0.0; };
    double acc = 0.0;
    for (int i = 0; i < s.size(); ++i) {
        if (std::abs(s(i)) > 1.0 + 1e-12) throw std::invalid_argument("protocol value outside [-1, 1]");
        const double v = std::clamp(s(i), -1.0, 1.0);
        acc += h(0.5 * (1.0 + v)) + h(0.5 * (1.0 - v));
    }
    return -N * acc / s.size();
}

double tsallis_entropy(const Vec& s, double N, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    return 0.5 * N * alpha * (1.0 - s.squaredNorm() / s.size());
}

Vec first_moments(const SpectralData& d, const SaddlePoint& sp) {
    Vec dx = delta_x(d);
    Vec m(d.L);
    for (int n = 0; n < d.L; ++n) m(n) = -d.x1(n) - dx(n) / (1.0 + d.lambda(n) * sp.y);
    return m;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear fit needs two or more points");
    const int n = static_cast<int>(x.size());
    Mat A(n, 2);
    Vec v(n);
    for (int i = 0; i < n; ++i) {
        A(i, 0) = 1.0;
        A(i, 1) = x[i];
        v(i) = y[i];
    }
    Vec c = A.colPivHouseholderQr().solve(v);
    const double mean = v.mean();
    const double ss_res = (A * c - v).squaredNorm();
    const double ss_tot = (v.array() - mean).square().sum();
    return {c(0), c(1), ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0};
}

QbbScaling qbb_scaling(const std::vector<SpectralData>& grid, double T_qsl, double T_c) {
    if (grid.size() < 2) throw std::invalid_argument("qbb scaling needs at least two durations");
    QbbScaling r;
    r.T_qsl = T_qsl;
    for (const auto& d : grid) {
        if (!(d.T > T_qsl)) throw std::invalid_argument("qbb scaling needs durations above T_QSL");
        SaddlePoint sp = solve_saddle(d);
        Vec m = first_moments(d, sp);
        r.T.push_back(d.T);
        r.dT.push_back(d.T - T_qsl);
        r.mean_x.push_back(m);
        r.x0.push_back(d.x0);
        r.n_plus.push_back(d.n_plus);
        r.dq_bb.push_back(-(2.0 * d.x0.cwiseProduct(m) + m.cwiseProduct(m)).sum());
        r.q_bb0.push_back(std::max(0.0, 1.0 - T_c / d.T));
    }
    LinearFit fit = linear_fit(r.dT, r.dq_bb);
    r.intercept = fit.intercept;
    r.slope = fit.slope;
    r.r2 = fit.r2;

    size_t first = static_cast<size_t>(std::min_element(r.dT.begin(), r.dT.end()) - r.dT.begin());
    const int np = r.n_plus[first];
    const Vec& m = r.mean_x[first];
    const Vec& x0 = r.x0[first];
    const int tail = static_cast<int>(m.size()) - np;
    if (tail > 0) {
        const double den = x0.tail(tail).norm();
        r.tail_relative_error = den > 0.0 ? (m.tail(tail) + x0.tail(tail)).norm() / den : 0.0;
    }
    return r;
}

std::string spectral_data_csv(const SpectralData& d) {
    CsvTable t({"n", "lambda", "b", "x0", "x1"});
    for (int n = 0; n < d.L; ++n)
        t.add_row({std::to_string(n + 1), fmt(d.lambda(n)), fmt(d.b(n)), fmt(d.x0(n)), fmt(d.x1(n))});
    return t.render();
}

std::string saddle_csv(const std::vector<QPrediction>& preds) {
    CsvTable t({"T", "L", "y_star", "lo", "hi", "residual", "status"});
    for (const auto& q : preds)
        t.add_row({fmt(q.T), std::to_string(q.L), fmt(q.saddle.y), fmt(q.saddle.lo), fmt(q.saddle.hi),
                   fmt(q.saddle.residual), q.status});
    return t.render();
}

std::string predictions_csv(const std::vector<QPrediction>& preds, const QbbScaling* scaling) {
    CsvTable t({"T", "L", "q_pred_leading", "q_pred_corrected", "q_pred_halved", "dqbb_pred", "status"});
    for (const auto& q : preds) {
        std::string dq;
        if (scaling) {
            for (size_t i = 0; i < scaling->T.size(); ++i)
                if (std::abs(scaling->T[i] - q.T) < 1e-12) dq = fmt(scaling->dq_bb[i]);
        }
        const bool ok = q.status == "ok";
        t.add_row({fmt(q.T), std::to_string(q.L), ok ? fmt(q.leading) : "", ok ? fmt(q.corrected) : "",
                   ok ? fmt(q.halved) : "", dq, q.status});
    }
    return t.render();
}

}  // namespace clpt
