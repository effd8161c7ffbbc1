#include "clpt/samplers.hpp"

#include "clpt/csv.hpp"

#include <boost/math/tools/minima.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace clpt {

namespace {

using cd = std::complex<double>;

template <int D>
class ExactChain final : public SiteLandscape {
public:
    using RMat = Eigen::Matrix<double, D, D>;
    using UMat = Eigen::Matrix<cd, D, D>;
    using State = Eigen::Matrix<cd, D, 1>;

    ExactChain(const ControlProblem& p, double T, int L) : L_(L), dt_(T / L) {
        if (L < 1) throw std::invalid_argument("L must be positive");
        H0_ = p.H0.real();
        H1_ = p.H1.real();
        psi0_ = p.psi0;
        psit_ = p.psi_star;
        plus_ = unitary(1.0);
        minus_ = unitary(-1.0);
        U_.resize(L);
        fw_.resize(L + 1);
        bw_.resize(L);
        reset(Vec::Zero(L));
    }

    void reset(const Vec& s) override {
        if (s.size() != L_) throw std::invalid_argument("protocol length does not match the landscape");
        s_ = s;
        for (int i = 0; i < L_; ++i) U_[i] = unitary(s(i));
        fw_[0] = psi0_;
        fw_ok_ = 0;
        bw_ok_ = L_;
        ensure(0);
        value_ = 1.0 - std::norm(bw_[0].dot(U_[0] * fw_[0]));
        pending_ = -1;
    }

    double value() const override { return value_; }

    double propose(int i, double s_new) override {
        ensure(i);
        pending_U_ = unitary(s_new);
        pending_ = i;
        pending_s_ = s_new;
        pending_value_ = 1.0 - std::norm(bw_[i].dot(pending_U_ * fw_[i]));
        return pending_value_;
    }

    void accept(int i, double s_new) override {
        if (pending_ != i || pending_s_ != s_new) propose(i, s_new);
        U_[i] = pending_U_;
        s_(i) = s_new;
        value_ = pending_value_;
        fw_ok_ = std::min(fw_ok_, i);
        bw_ok_ = std::max(bw_ok_, i);
        pending_ = -1;
    }

    const Vec& protocol() const override { return s_; }
    int L() const override { return L_; }

private:
    UMat unitary(double s) const {
        if (s == 1.0 && plus_ready_) return plus_;
        if (s == -1.0 && minus_ready_) return minus_;
        RMat H = H0_ + s * H1_;
        if constexpr (D == 2) {
            // H = a + B with B traceless: exp(-i dt H) = e^{-i a dt} (cos(w dt) - i sin(w dt) B / w).
            // The phase e^{-i a dt} cannot change an infidelity and is dropped.
            const double b = 0.5 * (H(0, 0) - H(1, 1)), c = H(0, 1);
            const double w = std::hypot(b, c);
            const double cw = std::cos(w * dt_), sw = w > 0.0 ? std::sin(w * dt_) / w : dt_;
            UMat U;
            U(0, 0) = cd(cw, -sw * b);
            U(1, 1) = cd(cw, sw * b);
            U(0, 1) = U(1, 0) = cd(0.0, -sw * c);
            return U;
        }
        Eigen::SelfAdjointEigenSolver<RMat> es;
        es.computeDirect(H);
        Eigen::Matrix<cd, D, 1> ph;
        for (int k = 0; k < D; ++k) ph(k) = std::polar(1.0, -dt_ * es.eigenvalues()(k));
        const RMat& V = es.eigenvectors();
        return V.template cast<cd>() * ph.asDiagonal() * V.transpose().template cast<cd>();
    }

    // Valid ranges: fw_[0..fw_ok_], bw_[bw_ok_..L-1].
    void ensure(int i) {
        while (fw_ok_ < i) {
            fw_[fw_ok_ + 1] = U_[fw_ok_] * fw_[fw_ok_];
            ++fw_ok_;
        }
        if (bw_ok_ == L_) {
            bw_[L_ - 1] = psit_;
            bw_ok_ = L_ - 1;
        }
        while (bw_ok_ > i) {
            bw_[bw_ok_ - 1] = U_[bw_ok_].adjoint() * bw_[bw_ok_];
            --bw_ok_;
        }
    }

    int L_;
    double dt_;
    RMat H0_, H1_;
    State psi0_, psit_;
    UMat plus_, minus_;
    bool plus_ready_ = false, minus_ready_ = false;
    std::vector<UMat> U_;
    std::vector<State> fw_, bw_;
    int fw_ok_ = 0, bw_ok_ = 0;
    Vec s_;
    double value_ = 0.0;
    int pending_ = -1;
    double pending_s_ = 0.0, pending_value_ = 0.0;
    UMat pending_U_;

public:
    void cache_bangs() {
        plus_ = unitary(1.0);
        minus_ = unitary(-1.0);
        plus_ready_ = minus_ready_ = true;
    }
};

class FunctionChain final : public SiteLandscape {
public:
    FunctionChain(std::function<double(const Vec&)> f, int L) : f_(std::move(f)), s_(Vec::Zero(L)) { value_ = f_(s_); }
    void reset(const Vec& s) override {
        s_ = s;
        value_ = f_(s_);
    }
    double value() const override { return value_; }
    double propose(int i, double s_new) override {
        Vec t = s_;
        t(i) = s_new;
        pending_i_ = i;
        pending_s_ = s_new;
        pending_value_ = f_(t);
        return pending_value_;
    }
    void accept(int i, double s_new) override {
        if (pending_i_ != i || pending_s_ != s_new) propose(i, s_new);
        s_(i) = s_new;
        value_ = pending_value_;
        pending_i_ = -1;
    }
    const Vec& protocol() const override { return s_; }
    int L() const override { return static_cast<int>(s_.size()); }

private:
    std::function<double(const Vec&)> f_;
    Vec s_;
    double value_ = 0.0;
    int pending_i_ = -1;
    double pending_s_ = 0.0, pending_value_ = 0.0;
};

double mean(const std::vector<double>& v) {
    double a = 0.0;
    for (double x : v) a += x;
    return v.empty() ? 0.0 : a / v.size();
}

}  // namespace

std::unique_ptr<SiteLandscape> make_exact_site_landscape(const ControlProblem& p, double T, int L) {
    if (p.hilbert_dim == 2) {
        auto c = std::make_unique<ExactChain<2>>(p, T, L);
        c->cache_bangs();
        return c;
    }
    if (p.hilbert_dim == 3) {
        auto c = std::make_unique<ExactChain<3>>(p, T, L);
        c->cache_bangs();
        return c;
    }
    throw std::invalid_argument("exact site landscape supports Hilbert dimension 2 or 3");
}

std::unique_ptr<SiteLandscape> make_function_site_landscape(std::function<double(const Vec&)> f, int L) {
    return std::make_unique<FunctionChain>(std::move(f), L);
}

// ---------------------------------------------------------------- SD

SdResult stochastic_descent(SiteLandscape& land, std::uint64_t seed, int max_sweeps) {
    const int N = land.L();
    if (N < 2) throw std::invalid_argument("stochastic descent needs N >= 2");
    CounterRng rng(seed);
    Vec s(N);
    for (int i = 0; i < N; ++i) s(i) = rng.below(2) ? 1.0 : -1.0;
    land.reset(s);
    SdResult r;
    r.evaluations = 1;
    // A random site is flipped and kept on a decrease. Sites already rejected
    // since the last accepted flip would be rejected again, so the draw is
    // taken among the untested ones; this leaves the accepted sequence unchanged.
    std::vector<int> untested(N);
    auto refill = [&] {
        for (int i = 0; i < N; ++i) untested[i] = i;
        untested.resize(N);
    };
    refill();
    while (!untested.empty() && r.evaluations < static_cast<long>(max_sweeps) * N) {
        const size_t k = rng.below(untested.size());
        const int i = untested[k];
        const double flipped = -land.protocol()(i);
        const double v = land.propose(i, flipped);
        ++r.evaluations;
        if (v < land.value() - 1e-14) {
            land.accept(i, flipped);
            r.trace.push_back(v);
            untested.resize(N);
            refill();
        } else {
            untested[k] = untested.back();
            untested.pop_back();
        }
    }
    r.sweeps = static_cast<int>((r.evaluations + N - 1) / N);
    r.s = land.protocol();
    r.infidelity = land.value();
    return r;
}

SdResult stochastic_descent(const ControlProblem& p, double T, int N, std::uint64_t seed) {
    auto land = make_exact_site_landscape(p, T, N);
    return stochastic_descent(*land, seed);
}

SdResult stochastic_descent(const Landscape& land, std::uint64_t seed) {
    auto chain = make_function_site_landscape([&land](const Vec& s) { return land(s); }, land.L());
    return stochastic_descent(*chain, seed);
}

// ---------------------------------------------------------------- order parameters

int SampleEnsemble::total() const {
    int n = 0;
    for (const auto& r : runs) n += static_cast<int>(r.size());
    return n;
}

double q_bb(const SampleEnsemble& e) {
    if (e.total() == 0) throw std::invalid_argument("q_bb of an empty ensemble");
    const int N = static_cast<int>(e.runs.front().front().size());
    Vec m = Vec::Zero(N);
    for (const auto& r : e.runs)
        for (const auto& s : r) m += s;
    m /= e.total();
    return 1.0 - m.squaredNorm() / N;
}

QStat q_continuous(const SampleEnsemble& e) {
    std::vector<double> qs;
    for (size_t r = 0; r < e.runs.size(); ++r) {
        if (e.runs[r].empty() || (r < e.trapped.size() && e.trapped[r])) continue;
        const auto& run = e.runs[r];
        const int L = static_cast<int>(run.front().size());
        Vec m = Vec::Zero(L), m2 = Vec::Zero(L);
        for (const auto& s : run) {
            m += s;
            m2 += s.cwiseProduct(s);
        }
        m /= run.size();
        m2 /= run.size();
        qs.push_back((m2 - m.cwiseProduct(m)).sum() / L);
    }
    if (qs.empty()) throw std::invalid_argument("q of an empty ensemble");
    QStat q;
    q.runs = static_cast<int>(qs.size());
    q.mean = mean(qs);
    if (qs.size() > 1) {
        double v = 0.0;
        for (double x : qs) v += (x - q.mean) * (x - q.mean);
        q.stderr_ = std::sqrt(v / (qs.size() - 1) / qs.size());
    }
    return q;
}

// ---------------------------------------------------------------- LMC

void LmcConfig::validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
    if (L < 2) throw std::invalid_argument("L must be >= 2");
    if (!(T > 0.0)) throw std::invalid_argument("T must be > 0");
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
    if (samples < 0) throw std::invalid_argument("samples must be >= 0");
    if (therm_window < 1 || trace_stride < 1) throw std::invalid_argument("windows and strides must be >= 1");
}

void lmc_sweep(SiteLandscape& land, double beta_scale, double sigma, CounterRng& rng, long& accepted) {
    const int L = land.L();
    for (int i = 0; i < L; ++i) {
        const double prop = land.protocol()(i) + sigma * rng.normal();
        if (std::abs(prop) > 1.0) continue;
        const double v = land.propose(i, prop);
        const double dI = v - land.value();
        if (dI <= 0.0 || rng.uniform() < std::exp(-beta_scale * dI)) {
            land.accept(i, prop);
            ++accepted;
        }
    }
}

LmcTrajectory lmc_run(SiteLandscape& land, const LmcConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (land.L() != cfg.L) throw std::invalid_argument("landscape length does not match the configuration");
    CounterRng rng(seed);
    Vec s(cfg.L);
    for (int i = 0; i < cfg.L; ++i) s(i) = rng.uniform(-1.0, 1.0);
    land.reset(s);

    LmcTrajectory tr;
    long n = 0;
    auto step = [&](double bscale) {
        lmc_sweep(land, bscale, cfg.sigma, rng, tr.accepted);
        tr.attempted += cfg.L;
        ++n;
        if (n % cfg.trace_stride == 0) tr.infidelity.push_back(land.value());
    };

    const double bs = cfg.exponent_scale();
    for (long k = 0; k < cfg.anneal_iterations; ++k) {
        const double frac = static_cast<double>(k) / cfg.anneal_iterations;
        step(cfg.anneal_beta_start * std::pow(bs / cfg.anneal_beta_start, frac));
    }

    // Relaxation: compare means of the last two windows of W iterations.
    const long W = cfg.therm_window;
    std::vector<double> ring(2 * W);
    double sum_old = 0.0, sum_new = 0.0;
    long k = 0;
    for (; k < cfg.max_relax_iterations; ++k) {
        step(bs);
        const double v = land.value();
        const long pos = k % (2 * W);
        if (k >= 2 * W) sum_old -= ring[pos];
        if (k >= W) {
            const double moved = ring[(k - W) % (2 * W)];
            sum_new -= moved;
            sum_old += moved;
        }
        ring[pos] = v;
        sum_new += v;
        if (k + 1 >= 2 * W && std::abs(sum_new - sum_old) / W / W < cfg.therm_rate) {
            tr.thermalized_at = n;
            break;
        }
    }
    tr.trapped = tr.thermalized_at < 0;

    for (int m = 0; m < cfg.samples; ++m) {
        for (long j = 0; j < cfg.stride; ++j) {
            step(bs);
            if (cfg.window_stride > 0 && n % cfg.window_stride == 0) tr.window.push_back(land.protocol());
        }
        tr.samples.push_back(land.protocol());
        tr.sample_iteration.push_back(n);
        tr.sample_infidelity.push_back(land.value());
    }
    tr.iterations = n;
    tr.final_protocol = land.protocol();
    return tr;
}

LmcTrajectory lmc_run(const ControlProblem& p, const LmcConfig& cfg, std::uint64_t seed) {
    auto land = make_exact_site_landscape(p, cfg.T, cfg.L);
    return lmc_run(*land, cfg, seed);
}

namespace {

SampleEnsemble ensemble_header(const ControlProblem& p, double T, int L, double beta, double sigma, int runs,
                               std::uint64_t seed_base) {
    if (runs < 1) throw std::invalid_argument("runs must be >= 1");
    SampleEnsemble e;
    e.problem = model_name(p.model);
    e.T = T;
    e.L = L;
    e.beta = beta;
    e.sigma = sigma;
    e.runs.resize(runs);
    e.trapped.assign(runs, false);
    for (int r = 0; r < runs; ++r) e.seeds.push_back(run_seed(seed_base, r));
    return e;
}

void post_select(SampleEnsemble& e, const std::vector<LmcTrajectory>& tr, double threshold) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : tr)
        if (!t.trapped && !t.sample_infidelity.empty()) best = std::min(best, mean(t.sample_infidelity));
    for (size_t r = 0; r < tr.size(); ++r) {
        const bool high = tr[r].sample_infidelity.empty() ? false : mean(tr[r].sample_infidelity) > best + threshold;
        e.trapped[r] = tr[r].trapped || high;
        e.runs[r] = tr[r].samples;
    }
}

}  // namespace

SampleEnsemble lmc_ensemble(const ControlProblem& p, const LmcConfig& cfg, int runs, std::uint64_t seed_base,
                            std::vector<LmcTrajectory>* trajectories) {
    cfg.validate();
    SampleEnsemble e = ensemble_header(p, cfg.T, cfg.L, cfg.beta, cfg.sigma, runs, seed_base);
    std::vector<LmcTrajectory> tr(runs);
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < runs; ++r) tr[r] = lmc_run(p, cfg, e.seeds[r]);
    post_select(e, tr, cfg.trap_threshold);
    if (trajectories) *trajectories = std::move(tr);
    return e;
}

SampleEnsemble lmc_ensemble_serial(const ControlProblem& p, const LmcConfig& cfg, int runs, std::uint64_t seed_base) {
    cfg.validate();
    SampleEnsemble e = ensemble_header(p, cfg.T, cfg.L, cfg.beta, cfg.sigma, runs, seed_base);
    std::vector<LmcTrajectory> tr(runs);
    for (int r = 0; r < runs; ++r) tr[r] = lmc_run(p, cfg, e.seeds[r]);
    post_select(e, tr, cfg.trap_threshold);
    return e;
}

SampleEnsemble sd_ensemble(const ControlProblem& p, double T, int N, int runs, std::uint64_t seed_base) {
    SampleEnsemble e = ensemble_header(p, T, N, 0.0, 0.0, runs, seed_base);
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < runs; ++r) e.runs[r] = {stochastic_descent(p, T, N, e.seeds[r]).s};
    return e;
}

SampleEnsemble sd_ensemble_serial(const ControlProblem& p, double T, int N, int runs, std::uint64_t seed_base) {
    SampleEnsemble e = ensemble_header(p, T, N, 0.0, 0.0, runs, seed_base);
    for (int r = 0; r < runs; ++r) e.runs[r] = {stochastic_descent(p, T, N, e.seeds[r]).s};
    return e;
}

// ---------------------------------------------------------------- diagnostics

std::vector<double> relaxation_toy_model(double sigma, double l0, int steps) {
    if (!(sigma > 0.0) || l0 < 0.0 || steps < 0) throw std::invalid_argument("relaxation model needs sigma > 0, l0 >= 0");
    namespace odeint = boost::numeric::odeint;
    const double a = std::sqrt(sigma * sigma / (2.0 * M_PI));
    auto rhs = [&](const double& l, double& dl, double) { dl = -a * (1.0 - std::exp(-2.0 * l * l / (sigma * sigma))); };
    std::vector<double> out{l0};
    double l = l0;
    odeint::runge_kutta_dopri5<double> stepper;
    auto ctrl = odeint::make_controlled(1e-12, 1e-12, stepper);
    for (int n = 0; n < steps; ++n) {
        odeint::integrate_adaptive(ctrl, rhs, l, static_cast<double>(n), static_cast<double>(n + 1), 0.1);
        out.push_back(l);
    }
    return out;
}

double decay_slope(const std::vector<double>& trace, long n_lo, long n_hi) {
    if (n_lo < 1 || n_hi >= static_cast<long>(trace.size()) || n_hi <= n_lo)
        throw std::invalid_argument("decay window outside the trace");
    std::vector<double> xs, ys;
    const int pts = 24;
    for (int k = 0; k <= pts; ++k) {
        const long n = std::lround(n_lo * std::pow(static_cast<double>(n_hi) / n_lo, static_cast<double>(k) / pts));
        if (trace[n] <= 0.0) continue;
        xs.push_back(std::log(static_cast<double>(n)));
        ys.push_back(std::log(trace[n]));
    }
    const double m = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

Vec covariance_spectrum(const std::vector<Vec>& window) {
    if (window.size() < 2) throw std::invalid_argument("covariance needs at least two protocols");
    const int L = static_cast<int>(window.front().size());
    Mat X(window.size(), L);
    for (size_t k = 0; k < window.size(); ++k) X.row(k) = window[k].transpose();
    Mat C = X.rowwise() - X.colwise().mean();
    Mat cov = (C.transpose() * C) / static_cast<double>(window.size());
    Eigen::SelfAdjointEigenSolver<Mat> es(cov, Eigen::EigenvaluesOnly);
    return es.eigenvalues().reverse();
}

double protocol_distance(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("protocols have different lengths");
    return std::sqrt((a - b).squaredNorm() / a.size());
}

double run_distance(const std::vector<Vec>& A, const std::vector<Vec>& B) {
    if (A.empty() || B.empty()) throw std::invalid_argument("run distance of an empty set");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : A)
        for (const auto& b : B) best = std::min(best, protocol_distance(a, b));
    return best;
}

DeformationScan deformation_scan(const ControlProblem& p, const Protocol& center, const Vec& f, double x_lo,
                                 double x_hi, int points) {
    if (f.size() != center.s.size()) throw std::invalid_argument("deformation direction has the wrong length");
    if (points < 3 || !(x_hi > x_lo)) throw std::invalid_argument("deformation grid needs >= 3 points on x_lo < x_hi");
    DeformationScan d;
    auto I = [&](double x) { return infidelity_from_propagator(p, propagate_exact(p, Protocol(center.T, center.s + x * f))); };
    for (int k = 0; k < points; ++k) {
        const double x = x_lo + (x_hi - x_lo) * k / (points - 1);
        d.x.push_back(x);
        d.infidelity.push_back(I(x));
        d.out_of_bounds.push_back((center.s + x * f).cwiseAbs().maxCoeff() > 1.0 + 1e-12);
    }
    for (int k = 1; k + 1 < points; ++k) {
        if (d.infidelity[k] < d.infidelity[k - 1] && d.infidelity[k] <= d.infidelity[k + 1]) {
            auto r = boost::math::tools::brent_find_minima(I, d.x[k - 1], d.x[k + 1], 52);
            d.minima_x.push_back(r.first);
            d.minima_infidelity.push_back(r.second);
        }
    }
    return d;
}

std::string lmc_run_csv(const std::string& problem, const LmcConfig& cfg, std::uint64_t seed, const LmcTrajectory& tr) {
    std::string out = "problem,T,L,beta,sigma,seed\n" + problem + "," + fmt(cfg.T) + "," + std::to_string(cfg.L) + "," +
                      fmt(cfg.beta) + "," + fmt(cfg.sigma) + "," + std::to_string(seed) + "\n";
    std::vector<std::string> head{"iteration", "I"};
    for (int i = 1; i <= cfg.L; ++i) head.push_back("s_" + std::to_string(i));
    CsvTable t(head);
    for (size_t k = 0; k < tr.samples.size(); ++k) {
        std::vector<std::string> row{std::to_string(tr.sample_iteration[k]), fmt(tr.sample_infidelity[k])};
        for (int i = 0; i < tr.samples[k].size(); ++i) row.push_back(fmt(tr.samples[k](i)));
        t.add_row(row);
    }
    return out + t.render();
}

std::string aggregate_csv(const std::vector<std::vector<double>>& rows) {
    CsvTable t({"T", "beta", "q", "q_BB", "stderr", "n_runs"});
    for (const auto& r : rows) t.add_numeric_row(r);
    return t.render();
}

}  // namespace clpt
