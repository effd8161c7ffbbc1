#include "clpt/stability.hpp"

#include "clpt/csv.hpp"
#include "clpt/expansions.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <functional>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace clpt {

namespace {

constexpr double kEdge = 1e-7;   // distance kept from the ends of [0, T/2]

template <class F>
double solve_bracketed(F f, double a, double b, double fa, double fb) {
    std::uintmax_t iters = 200;
    auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (r.first + r.second);
}

struct Root {
    double delta;
    bool upward;   // g goes from negative to positive
};

std::vector<Root> scan_roots(const ControlProblem& p, double T, int n) {
    const double lo = kEdge, hi = 0.5 * T - kEdge;
    std::vector<Root> roots;
    if (!(hi > lo)) return roots;
    auto g = [&](double d) { return delta_measure(p, T, d); };
    double x0 = lo, g0 = g(lo);
    for (int k = 1; k <= n; ++k) {
        const double x1 = lo + (hi - lo) * k / n;
        const double g1 = g(x1);
        if (g0 == 0.0) {
            // exact zero on a node; ignore, the neighbouring interval decides
        } else if (g0 * g1 < 0.0) {
            roots.push_back({solve_bracketed(g, x0, x1, g0, g1), g0 < 0.0});
        }
        x0 = x1;
        g0 = g1;
    }
    return roots;
}

double segment_infidelity(const ControlProblem& p, double T, double delta) {
    return infidelity_segments(p, delta_segments(T, delta));
}

// dg/d(delta) by central differences, the scale of g is O(1).
double measure_slope(const ControlProblem& p, double T, double delta) {
    const double h = 1e-6;
    const double a = std::max(delta - h, kEdge), b = std::min(delta + h, 0.5 * T - kEdge);
    return (delta_measure(p, T, b) - delta_measure(p, T, a)) / (b - a);
}

// Middle (continued) root near `guess`, any crossing direction.
std::optional<double> root_near(const ControlProblem& p, double T, double guess, int n) {
    auto roots = scan_roots(p, T, n);
    std::optional<double> best;
    for (const auto& r : roots)
        if (!best || std::abs(r.delta - guess) < std::abs(*best - guess)) best = r.delta;
    return best;
}

}  // namespace

StabilityReport linear_stability(const Vec& b, const Protocol& center, double rel_tol) {
    if (b.size() != center.s.size()) throw std::invalid_argument("gradient and protocol lengths differ");
    StabilityReport r;
    r.tau_b = b.size() ? rel_tol * b.cwiseAbs().maxCoeff() : 0.0;
    const double dt = center.dt();
    for (int i = 0; i < b.size(); ++i) {
        const double s = center.s(i);
        double v;
        if (std::abs(s) >= 1.0 - 1e-12) v = b(i) * (s > 0 ? 1.0 : -1.0);
        else v = std::abs(b(i));
        if (v > r.tau_b) {
            r.violating.push_back(i);
            r.violation_integral += dt * v;
        }
    }
    r.stable = r.violating.empty();
    return r;
}

int HessianSpectrum::count_above(double rel) const {
    const double thr = rel * eigenvalues.maxCoeff();
    return static_cast<int>((eigenvalues.array() > thr).count());
}

int HessianSpectrum::count_vanishing(double rel) const {
    const double thr = rel * eigenvalues.maxCoeff();
    return static_cast<int>((eigenvalues.array().abs() <= thr).count());
}

HessianSpectrum hessian_spectrum(const Mat& J, double T, const Protocol& center) {
    const int L = static_cast<int>(J.rows());
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (J + J.transpose()) / L);
    HessianSpectrum h;
    h.T = T;
    h.center = center;
    h.eigenvalues = es.eigenvalues().reverse();
    h.eigenfunctions = es.eigenvectors().rowwise().reverse() * std::sqrt(static_cast<double>(L));
    return h;
}

std::vector<double> negative_branch(const HessianSpectrum& spec) {
    std::vector<double> out;
    for (int i = spec.L() - 1; i >= 0; --i)
        if (spec.eigenvalues(i) < 0.0) out.push_back(-spec.eigenvalues(i));
    return out;
}

double reflection_overlap(const Vec& f) {
    return f.dot(f.reverse()) / f.squaredNorm();
}

double power_law_slope(const std::vector<double>& magnitudes, int n_lo, int n_hi) {
    if (n_lo < 1 || n_hi > static_cast<int>(magnitudes.size()) || n_hi - n_lo < 1)
        throw std::invalid_argument("power-law window outside the available magnitudes");
    std::vector<double> mags(magnitudes.size());
    std::transform(magnitudes.begin(), magnitudes.end(), mags.begin(), [](double v) { return std::abs(v); });
    std::sort(mags.begin(), mags.end(), std::greater<>());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int m = n_hi - n_lo + 1;
    for (int n = n_lo; n <= n_hi; ++n) {
        const double x = std::log(static_cast<double>(n)), y = std::log(mags[n - 1]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

Protocol s_delta(double T, double delta, int L) {
    if (!(delta >= 0.0) || delta > 0.5 * T * (1 + 1e-15)) throw std::invalid_argument("delta outside [0, T/2]");
    if (L < 1) throw std::invalid_argument("L must be positive");
    Vec s(L);
    const double a = 0.5 * T - delta, b = 0.5 * T + delta;
    for (int i = 0; i < L; ++i) {
        const double t = (i + 0.5) * T / L;
        s(i) = t < a ? 1.0 : (t > b ? -1.0 : 0.0);
    }
    return Protocol(T, s);
}

Protocol s_delta_cell_average(double T, double delta, int L) {
    if (!(delta >= 0.0) || delta > 0.5 * T * (1 + 1e-15)) throw std::invalid_argument("delta outside [0, T/2]");
    Vec s(L);
    const double dt = T / L, a = 0.5 * T - delta, b = 0.5 * T + delta;
    for (int i = 0; i < L; ++i) {
        const double t0 = i * dt, t1 = (i + 1) * dt;
        const double plus = std::max(0.0, std::min(t1, a) - t0);
        const double minus = std::max(0.0, t1 - std::max(t0, b));
        s(i) = (plus - minus) / dt;
    }
    return Protocol(T, s);
}

Protocol interpolate_protocol(const Protocol& p, int L_new) {
    const int L = p.L();
    Vec s(L_new);
    for (int k = 0; k < L_new; ++k) {
        // position in units of old midpoints
        const double x = (k + 0.5) * L / static_cast<double>(L_new) - 0.5;
        if (x <= 0.0) s(k) = p.s(0);
        else if (x >= L - 1) s(k) = p.s(L - 1);
        else {
            const int i = static_cast<int>(std::floor(x));
            const double w = x - i;
            s(k) = (1 - w) * p.s(i) + w * p.s(i + 1);
        }
    }
    return Protocol(p.T, s);
}

std::vector<Segment> delta_segments(double T, double delta) {
    return {{0.5 * T - delta, 1.0}, {2.0 * delta, 0.0}, {0.5 * T - delta, -1.0}};
}

Mat propagate_segments(const ControlProblem& p, const std::vector<Segment>& segs) {
    Mat M = Mat::Identity(p.dual_dim, p.dual_dim);
    for (const auto& sg : segs)
        if (sg.duration > 0.0) M = step_exponential(p, sg.duration, sg.s) * M;
    return M;
}

double infidelity_segments(const ControlProblem& p, const std::vector<Segment>& segs) {
    return infidelity_from_propagator(p, propagate_segments(p, segs));
}

double gradient_at(const ControlProblem& p, const std::vector<Segment>& segs, double t) {
    std::vector<Segment> before, after;
    double acc = 0.0;
    for (const auto& sg : segs) {
        if (acc + sg.duration <= t) before.push_back(sg);
        else if (acc >= t) after.push_back(sg);
        else {
            before.push_back({t - acc, sg.s});
            after.push_back({acc + sg.duration - t, sg.s});
        }
        acc += sg.duration;
    }
    Vec lam = propagate_segments(p, after).transpose() * p.n_star;
    Vec n = propagate_segments(p, before) * p.n0;
    return -0.5 * lam.dot(p.m1 * n);
}

double delta_measure(const ControlProblem& p, double T, double delta) {
    return gradient_at(p, delta_segments(T, delta), 0.5 * T + delta);
}

double delta_violation_integral(const ControlProblem& p, double T, double delta, int n_quad) {
    auto segs = delta_segments(T, delta);
    const double dt = T / n_quad;
    double acc = 0.0;
    for (int k = 0; k < n_quad; ++k) {
        const double t = (k + 0.5) * dt;
        const double b = gradient_at(p, segs, t);
        double v;
        if (t < 0.5 * T - delta) v = std::max(0.0, b);
        else if (t > 0.5 * T + delta) v = std::max(0.0, -b);
        else v = std::abs(b);
        acc += dt * v;
    }
    return acc;
}

double center_slope(const ControlProblem& p, double T) {
    Vec n = step_exponential(p, 0.5 * T, 1.0) * p.n0;
    Vec lam = step_exponential(p, 0.5 * T, -1.0).transpose() * p.n_star;
    Mat c = p.m1 * p.m0 - p.m0 * p.m1;
    return -0.5 * lam.dot(c * n);
}

std::optional<double> stable_delta_near(const ControlProblem& p, double T, double guess, const TraceOptions& opt) {
    auto roots = scan_roots(p, T, opt.scan_points);
    std::optional<double> best;
    for (const auto& r : roots)
        if (r.upward && (!best || std::abs(r.delta - guess) < std::abs(*best - guess))) best = r.delta;
    if (!best && center_slope(p, T) > 0.0) best = 0.0;
    return best;
}

std::optional<double> continued_delta0(const ControlProblem& p, double T, double guess, const TraceOptions& opt) {
    return root_near(p, T, guess, opt.scan_points);
}

DeltaCurve trace_delta(const ControlProblem& p, const std::vector<double>& T_grid, const TraceOptions& opt) {
    for (size_t i = 1; i < T_grid.size(); ++i)
        if (!(T_grid[i] > T_grid[i - 1])) throw std::invalid_argument("T grid must be increasing");
    DeltaCurve curve;
    bool bifurcated = false;
    bool window_open = false;   // once a window opened, losing its root ends the trace
    for (double T : T_grid) {
        auto roots = scan_roots(p, T, opt.scan_points);
        std::vector<double> up, down;
        for (const auto& r : roots) (r.upward ? up : down).push_back(r.delta);
        auto add = [&](const std::string& br, double d) {
            curve.points.push_back({T, br, d, segment_infidelity(p, T, d)});
        };
        if (up.empty()) {
            if (center_slope(p, T) > 0.0 && !bifurcated && !window_open) {
                add("delta0", 0.0);
                continue;
            }
            curve.terminated = true;
            curve.termination_T = T;
            curve.termination_reason = bifurcated ? "stable branches left the window [0,T/2]"
                                                  : "stable window width reached T/2; no stable s_delta remains";
            break;
        }
        if (up.size() >= 2 && !down.empty()) {
            bifurcated = true;
            // the unstable continuation lies between the two stable branches
            double mid = down.front();
            for (double d : down)
                if (d > up.front() && d < up.back()) mid = d;
            add("delta_minus", up.front());
            add("delta0_unstable", mid);
            add("delta_plus", up.back());
        } else if (bifurcated) {
            curve.terminated = true;
            curve.termination_T = T;
            curve.termination_reason = "branch delta_plus left the window [0,T/2]";
            add("delta_minus", up.front());
            break;
        } else {
            add("delta0", up.back());
            window_open = true;
        }
    }
    return curve;
}

TransitionReport detect_transitions(const ControlProblem& p, const std::vector<double>& T_grid,
                                    const TransitionOptions& opt) {
    TransitionReport rep;
    const int n_scan = opt.trace.scan_points;

    // T_c: first downward sign change of the centre slope of b for s_0.
    {
        double Tprev = 0.0, fprev = 0.0;
        bool have = false;
        for (double T : T_grid) {
            const double f = center_slope(p, T);
            if (have && fprev > 0.0 && f <= 0.0) {
                rep.T_c = solve_bracketed([&](double x) { return center_slope(p, x); }, Tprev, T, fprev, f);
                break;
            }
            Tprev = T;
            fprev = f;
            have = true;
        }
        if (!rep.T_c) rep.unresolved.push_back("T_c: no sign change of the centre slope on the grid");
    }

    DeltaCurve curve = trace_delta(p, T_grid, opt.trace);

    // T_QSL: the continued branch loses stability (pitchfork).
    {
        std::vector<std::pair<double, double>> cont;   // (T, delta0)
        for (const auto& pt : curve.points)
            if ((pt.branch == "delta0" || pt.branch == "delta0_unstable") && pt.delta > 0.0) cont.push_back({pt.T, pt.delta});
        auto h_at = [&](double T, double guess) -> std::optional<double> {
            auto d = root_near(p, T, guess, n_scan);
            if (!d) return std::nullopt;
            return measure_slope(p, T, *d);
        };
        for (size_t i = 1; i < cont.size(); ++i) {
            const double h0 = measure_slope(p, cont[i - 1].first, cont[i - 1].second);
            const double h1 = measure_slope(p, cont[i].first, cont[i].second);
            if (h0 > 0.0 && h1 <= 0.0) {
                const double T0 = cont[i - 1].first, T1 = cont[i].first, d0 = cont[i - 1].second,
                             d1 = cont[i].second;
                auto f = [&](double T) {
                    const double guess = d0 + (d1 - d0) * (T - T0) / (T1 - T0);
                    return h_at(T, guess).value_or(0.0);
                };
                rep.T_QSL = solve_bracketed(f, T0, T1, h0, h1);
                break;
            }
        }
        if (!rep.T_QSL)
            rep.unresolved.push_back(curve.terminated && !cont.empty() && curve.termination_reason.find("T/2") != std::string::npos
                                         ? "T_QSL: tracing terminated before a bifurcation"
                                         : "T_QSL: no pitchfork bracketed on the grid");
    }

    // Bifurcation exponent from half-separations sampled just above T_QSL.
    if (rep.T_QSL) {
        std::vector<double> xs, ys;
        const double base = *rep.T_QSL;
        for (double dT = 0.004; dT <= 0.26; dT *= 2.0) {
            const double T = base + dT;
            auto roots = scan_roots(p, T, n_scan);
            std::vector<double> up;
            for (const auto& r : roots)
                if (r.upward) up.push_back(r.delta);
            if (up.size() < 2) continue;
            const double delta = 0.5 * (up.back() - up.front());
            xs.push_back(std::log(dT));
            ys.push_back(std::log(delta));
        }
        if (xs.size() >= 3) {
            const double m = static_cast<double>(xs.size());
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (size_t i = 0; i < xs.size(); ++i) {
                sx += xs[i];
                sy += ys[i];
                sxx += xs[i] * xs[i];
                sxy += xs[i] * ys[i];
            }
            rep.bifurcation_exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
            rep.bifurcation_fit_points = static_cast<int>(xs.size());
        } else {
            rep.unresolved.push_back("bifurcation exponent: fewer than three resolved branch pairs");
        }

        const double T = base + opt.n_plus_offset;
        if (rep.T_c) {
            auto d0 = root_near(p, T, 0.5 * (T - *rep.T_c), n_scan);
            if (d0) {
                Protocol c = s_delta_cell_average(T, *d0, opt.L);
                HessianSpectrum h = hessian_spectrum(taylor_coefficients_at(p, c, 2).J, T, c);
                rep.n_plus = h.count_above(1e-3);
            }
        }
    }

    // T_sb: tracing ran into the edge of the window.
    if (curve.terminated && curve.termination_reason.find("reached T/2") != std::string::npos) {
        double Tlo = 0.0;
        for (const auto& pt : curve.points) Tlo = pt.T;
        const double Thi = curve.termination_T;
        auto f = [&](double T) { return delta_measure(p, T, 0.5 * T - kEdge); };
        const double flo = f(Tlo), fhi = f(Thi);
        if (flo > 0.0 && fhi <= 0.0) {
            rep.T_sb = solve_bracketed(f, Tlo, Thi, flo, fhi);
            const double Tsb = *rep.T_sb;

            // Lowest Hessian eigenvalue along the traced family, continued by s = 0.
            auto center_at = [&](double T) {
                if (T >= Tsb) return Protocol::constant(T, opt.L, 0.0);
                auto d = stable_delta_near(p, T, 0.5 * T, opt.trace);
                return s_delta_cell_average(T, d ? *d : 0.5 * T, opt.L);
            };
            auto spectrum_at = [&](double T) {
                Protocol c = center_at(T);
                return hessian_spectrum(taylor_coefficients_at(p, c, 2).J, T, c);
            };
            auto lowest = [&](double T) { return spectrum_at(T).eigenvalues(opt.L - 1); };
            double a = Tsb - 0.05, b = Tsb + 0.1;
            double fa = lowest(a), fb = lowest(b);
            if (fa > 0.0 && fb < 0.0) {
                const double Tx = solve_bracketed(lowest, a, b, fa, fb);
                rep.sb_hessian_T = Tx;
                HessianSpectrum below = spectrum_at(Tx - 1e-4);
                HessianSpectrum above = spectrum_at(Tx + 1e-4);
                rep.sb_negative_count = static_cast<int>((above.eigenvalues.array() < 0.0).count());
                rep.sb_parity_overlap = reflection_overlap(below.eigenfunctions.col(opt.L - 1));
            } else {
                rep.unresolved.push_back("T_sb Hessian: lowest eigenvalue does not change sign near T_sb");
            }
        } else {
            rep.unresolved.push_back("T_sb: edge measure not bracketed");
        }
    }
    return rep;
}

std::string delta_curve_csv(const DeltaCurve& curve) {
    CsvTable t({"T", "branch", "delta", "infidelity"});
    for (const auto& p : curve.points) t.add_row({fmt(p.T), p.branch, fmt(p.delta), fmt(p.infidelity)});
    return t.render();
}

std::string spectrum_csv(const std::vector<HessianSpectrum>& spectra) {
    CsvTable t({"T", "n", "lambda"});
    for (const auto& s : spectra)
        for (int n = 0; n < s.L(); ++n) t.add_row({fmt(s.T), std::to_string(n + 1), fmt(s.eigenvalues(n))});
    return t.render();
}

std::string transitions_csv(const TransitionReport& r) {
    CsvTable t({"name", "T_value", "n_plus"});
    auto opt_str = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("unresolved"); };
    const std::string np = r.n_plus ? std::to_string(*r.n_plus) : "";
    t.add_row({"T_c", opt_str(r.T_c), ""});
    t.add_row({"T_QSL", opt_str(r.T_QSL), np});
    t.add_row({"T_sb", opt_str(r.T_sb), ""});
    if (r.sb_hessian_T) t.add_row({"T_sb_hessian", fmt(*r.sb_hessian_T), ""});
    if (r.bifurcation_exponent) t.add_row({"bifurcation_exponent", fmt(*r.bifurcation_exponent), ""});
    return t.render();
}

}  // namespace clpt
