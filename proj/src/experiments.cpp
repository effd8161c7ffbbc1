#include "clpt/experiments.hpp"

#include "clpt/csv.hpp"
#include "clpt/expansions.hpp"
#include "clpt/field_theory.hpp"
#include "clpt/rng.hpp"
#include "clpt/samplers.hpp"
#include "clpt/stability.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>

namespace clpt {

namespace fs = std::filesystem;

void OutputSet::add(const std::string& name, std::string content) {
    if (files_.count(name)) throw std::logic_error("output " + name + " produced twice");
    files_[name] = std::move(content);
}

std::string OutputSet::manifest(const ExperimentConfig& cfg) const {
    // workers and output location do not change any result
    ExperimentConfig echo = cfg;
    echo.workers = 0;
    echo.output = "";
    nlohmann::ordered_json j;
    j["preset"] = cfg.preset;
    j["config"] = echo.to_text();
    j["problem"] = nlohmann::json::parse(problem_to_json(problem_for(cfg)));
    nlohmann::ordered_json files = nlohmann::ordered_json::object();
    for (const auto& [name, content] : files_) files[name] = {{"sha256", sha256_hex(content)}, {"bytes", content.size()}};
    j["files"] = files;
    return j.dump(2) + "\n";
}

void OutputSet::commit(const fs::path& dir, const ExperimentConfig& cfg) const {
    std::map<std::string, std::string> all = files_;
    all["manifest.json"] = manifest(cfg);
    for (const auto& [name, content] : all) {
        const fs::path path = dir / name;
        std::error_code ec;
        if (fs::exists(path, ec)) {
            std::string existing;
            try {
                existing = read_text(path);
            } catch (const std::exception& e) {
                throw OutputError(e.what());
            }
            if (existing != content)
                throw OutputError(path.string() + " exists with different content; refusing to overwrite");
        }
    }
    for (const auto& [name, content] : all) {
        const fs::path path = dir / name;
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw OutputError("cannot create " + path.parent_path().string() + ": " + ec.message());
        std::ofstream out(path, std::ios::binary);
        out << content;
        if (!out) throw OutputError("cannot write " + path.string());
    }
}

ControlProblem problem_for(const ExperimentConfig& cfg) {
    return build_problem(parse_model(cfg.problem), cfg.h_z, cfg.h_x, cfg.J);
}

std::string number_tag(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

double lmc_sigma_for(const ExperimentConfig& cfg, double beta) {
    // keeps beta sigma^2, and with it the acceptance rate, fixed
    if (cfg.sigma_scaling == "acceptance") return std::min(1.0, cfg.sigma * std::sqrt(cfg.beta_ref / beta));
    return cfg.sigma;
}

long lmc_stride_for(const ExperimentConfig& cfg, double beta) {
    if (cfg.stride_scaling == "diffusion") {
        const double r = cfg.sigma / lmc_sigma_for(cfg, beta);
        return std::max(1L, std::lround(static_cast<double>(cfg.stride) * r * r));
    }
    return cfg.stride;
}

namespace {

LmcConfig lmc_config(const ExperimentConfig& cfg, double T, double beta) {
    LmcConfig c;
    c.T = T;
    c.L = cfg.L;
    c.beta = beta;
    c.sigma = lmc_sigma_for(cfg, beta);
    c.stride = lmc_stride_for(cfg, beta);
    c.samples = cfg.samples;
    c.max_relax_iterations = cfg.max_relax_iterations;
    c.anneal_iterations = cfg.anneal_iterations;
    c.trap_threshold = cfg.trap_threshold;
    c.trace_stride = cfg.trace_stride;
    c.validate();
    return c;
}

std::vector<double> default_transition_grid() {
    std::vector<double> g;
    for (int i = 0; i < 30; ++i) g.push_back(0.5 + 2.5 * i / 29.0);
    return g;
}

TransitionReport transitions(const ControlProblem& p, int L) {
    TransitionOptions opt;
    opt.L = L;
    return detect_transitions(p, default_transition_grid(), opt);
}

double require(const std::optional<double>& v, const char* what) {
    if (!v) throw std::runtime_error(std::string(what) + " could not be located on the default grid");
    return *v;
}

/// Window width of the traced optimum (continued past T_QSL), 0 below T_c.
double center_delta(const ControlProblem& p, double T, double T_c) {
    if (T <= T_c) return 0.0;
    return continued_delta0(p, T, 0.5 * (T - T_c)).value_or(0.0);
}

std::string file_tag(double T) { return "T" + number_tag(T); }

void phase_diagram_sd(const ExperimentConfig& cfg, OutputSet& out) {
    const auto p = problem_for(cfg);
    CsvTable t({"T", "q_BB", "mean_infidelity", "min_infidelity", "runs"});
    for (double T : cfg.durations()) {
        const auto e = sd_ensemble(p, T, cfg.N, cfg.sd_runs, cfg.seed_base);
        double sum = 0.0, best = 1.0;
        for (const auto& run : e.runs) {
            const double I = infidelity_exact(p, Protocol(T, run.front()));
            sum += I;
            best = std::min(best, I);
        }
        t.add_row({fmt(T), fmt(q_bb(e)), fmt(sum / e.runs.size()), fmt(best), std::to_string(e.runs.size())});
    }
    out.add("phase_diagram.csv", t.render());
}

void stability_trace(const ExperimentConfig& cfg, OutputSet& out) {
    const auto p = problem_for(cfg);
    TransitionOptions opt;
    opt.L = cfg.L;
    const auto grid = cfg.durations();
    out.add("transitions.csv", transitions_csv(detect_transitions(p, grid, opt)));
    out.add("delta_curve.csv", delta_curve_csv(trace_delta(p, grid)));
}

void hessian_spectrum_preset(const ExperimentConfig& cfg, OutputSet& out) {
    const auto p = problem_for(cfg);
    const double T_c = transitions(p, cfg.L).T_c.value_or(0.0);
    std::vector<HessianSpectrum> spectra;
    CsvTable slopes({"T", "delta", "negative_slope_4_20", "n_above_1e-3", "n_negative", "n_vanishing_1e-3"});
    for (double T : cfg.durations()) {
        const double delta = center_delta(p, T, T_c);
        const Protocol center = s_delta_cell_average(T, delta, cfg.L);
        const auto coeffs = taylor_coefficients_at(p, center, 2);
        auto spec = hessian_spectrum(coeffs.J, T, center);
        // slope of the negative branch only; empty when it is too short
        const auto neg = negative_branch(spec);
        const int negative = static_cast<int>(neg.size());
        const std::string slope = negative >= 20 ? fmt(power_law_slope(neg, 4, 20)) : "";
        slopes.add_row({fmt(T), fmt(delta), slope, std::to_string(spec.count_above(1e-3)), std::to_string(negative),
                        std::to_string(spec.count_vanishing(1e-3))});
        spectra.push_back(std::move(spec));
    }
    out.add("spectrum.csv", spectrum_csv(spectra));
    out.add("slopes.csv", slopes.render());
}

void lmc_qsl(const ExperimentConfig& cfg, OutputSet& out) {
    const auto p = problem_for(cfg);
    std::vector<std::vector<double>> rows;
    CsvTable cov({"T", "beta", "n", "eigenvalue"});
    CsvTable runs({"T", "beta", "run", "seed", "trapped", "thermalized_at", "acceptance", "final_infidelity"});
    for (double T : cfg.durations()) {
        for (double beta : cfg.betas) {
            const auto c = lmc_config(cfg, T, beta);
            std::vector<LmcTrajectory> tr;
            const auto e = lmc_ensemble(p, c, cfg.lmc_runs, cfg.seed_base, &tr);
            const auto q = q_continuous(e);
            rows.push_back({T, beta, q.mean, q_bb(e), q.stderr_, static_cast<double>(q.runs)});
            const std::string dir = "runs/" + file_tag(T) + "_beta" + number_tag(beta) + "/";
            Vec mean_spec = Vec::Zero(cfg.L);
            int used = 0;
            for (size_t r = 0; r < tr.size(); ++r) {
                out.add(dir + "run_" + std::to_string(r) + ".csv", lmc_run_csv(cfg.problem, c, e.seeds[r], tr[r]));
                const double acc = tr[r].attempted ? static_cast<double>(tr[r].accepted) / tr[r].attempted : 0.0;
                const double fin = tr[r].sample_infidelity.empty() ? infidelity_exact(p, Protocol(T, tr[r].final_protocol))
                                                                   : tr[r].sample_infidelity.back();
                runs.add_row({fmt(T), fmt(beta), std::to_string(r), std::to_string(e.seeds[r]),
                              e.trapped[r] ? "1" : "0", std::to_string(tr[r].thermalized_at), fmt(acc), fmt(fin)});
                if (!e.trapped[r] && tr[r].samples.size() >= 2) {
                    mean_spec += covariance_spectrum(tr[r].samples);
                    ++used;
                }
            }
            if (used)
                for (int n = 0; n < cfg.L; ++n)
                    cov.add_row({fmt(T), fmt(beta), std::to_string(n + 1), fmt(mean_spec(n) / used)});
        }
    }
    out.add("aggregate.csv", aggregate_csv(rows));
    out.add("covariance.csv", cov.render());
    out.add("runs.csv", runs.render());
}

void lmc_distances(const ExperimentConfig& cfg, OutputSet& out) {
    const auto p = problem_for(cfg);
    CsvTable t({"T", "beta", "M", "inv_M", "mean_distance", "pairs"});
    CsvTable fits({"T", "beta", "exponent", "prefactor", "r2"});
    for (double T : cfg.durations()) {
        for (double beta : cfg.betas) {
            const auto c = lmc_config(cfg, T, beta);
            const auto e = lmc_ensemble(p, c, cfg.lmc_runs, cfg.seed_base);
            std::vector<int> keep;
            for (size_t r = 0; r < e.runs.size(); ++r)
                if (!e.trapped[r]) keep.push_back(static_cast<int>(r));
            std::vector<double> lx, ly;
            for (int M : cfg.sample_counts) {
                double sum = 0.0;
                int pairs = 0;
                for (size_t a = 0; a < keep.size(); ++a)
                    for (size_t b = a + 1; b < keep.size(); ++b) {
                        const auto& A = e.runs[keep[a]];
                        const auto& B = e.runs[keep[b]];
                        const size_t m = std::min<size_t>(M, std::min(A.size(), B.size()));
                        sum += run_distance({A.begin(), A.begin() + m}, {B.begin(), B.begin() + m});
                        ++pairs;
                    }
                if (!pairs) continue;
                const double d = sum / pairs;
                t.add_row({fmt(T), fmt(beta), std::to_string(M), fmt(1.0 / M), fmt(d), std::to_string(pairs)});
                if (d > 0.0) {
                    lx.push_back(std::log(static_cast<double>(M)));
                    ly.push_back(std::log(d));
                }
            }
            if (lx.size() >= 2) {
                const auto f = linear_fit(lx, ly);
                fits.add_row({fmt(T), fmt(beta), fmt(f.slope), fmt(std::exp(f.intercept)), fmt(f.r2)});
            }
        }
    }
    out.add("distances.csv", t.render());
    out.add("distance_fit.csv", fits.render());
}

void critical_scaling(const ExperimentConfig& cfg, OutputSet& out) {
    const auto p = problem_for(cfg);
    const auto rep = transitions(p, 64);
    const double T_c = require(rep.T_c, "T_c");
    const double T_qsl = require(rep.T_QSL, "T_QSL");
    const auto conv = cfg.convention == "raw" ? SpectralConvention::raw : SpectralConvention::scaled;
    const double kappa_sampling = cfg.alpha * cfg.N / cfg.L;
    std::vector<QPrediction> preds;
    std::vector<SpectralData> grid;
    for (double T : cfg.durations()) {
        if (T <= T_qsl) continue;
        auto d = spectral_data_at(p, T, cfg.L, 0.5 * (T - T_c), cfg.kappa, conv);
        out.add("spectral_data/" + file_tag(T) + ".csv", spectral_data_csv(d));
        try {
            preds.push_back(q_prediction(d));
        } catch (const SaddleError& e) {
            QPrediction q;
            q.T = T;
            q.L = d.L;
            try {
                q.saddle = solve_saddle(d);
            } catch (const SaddleError&) {
                // no saddle either; the saddle columns stay zero
            }
            q.status = e.what();
            preds.push_back(q);
        }
        d.kappa = kappa_sampling;
        grid.push_back(std::move(d));
    }
    if (grid.empty()) throw std::runtime_error("critical-scaling needs durations above T_QSL = " + fmt(T_qsl));
    const auto scaling = qbb_scaling(grid, T_qsl, T_c);
    out.add("saddle.csv", saddle_csv(preds));
    out.add("predictions.csv", predictions_csv(preds, &scaling));
    CsvTable s({"T", "dT", "dq_bb", "q_bb0", "n_plus"});
    for (size_t i = 0; i < scaling.T.size(); ++i)
        s.add_row({fmt(scaling.T[i]), fmt(scaling.dT[i]), fmt(scaling.dq_bb[i]), fmt(scaling.q_bb0[i]),
                   std::to_string(scaling.n_plus[i])});
    out.add("qbb_scaling.csv", s.render());
    CsvTable f({"T_c", "T_QSL", "intercept", "slope", "r2", "tail_relative_error"});
    f.add_numeric_row({T_c, T_qsl, scaling.intercept, scaling.slope, scaling.r2, scaling.tail_relative_error});
    out.add("qbb_fit.csv", f.render());
}

void relaxation_stages(const ExperimentConfig& cfg, OutputSet& out) {
    const auto p = problem_for(cfg);
    CsvTable slopes({"T", "beta", "n_lo", "n_hi", "slope"});
    for (double T : cfg.durations()) {
        for (double beta : cfg.betas) {
            auto c = lmc_config(cfg, T, beta);
            c.samples = 1;
            const auto tr = lmc_run(p, c, run_seed(cfg.seed_base, 0));
            // log-spaced rows; the full trace can hold millions of entries
            CsvTable t({"iteration", "I"});
            for (size_t k = 0; k < tr.infidelity.size(); k = k < 64 ? k + 1 : k + k / 32)
                t.add_row({std::to_string(static_cast<long>(k + 1) * c.trace_stride), fmt(tr.infidelity[k])});
            out.add("traces/" + file_tag(T) + "_beta" + number_tag(beta) + ".csv", t.render());
            const long n = static_cast<long>(tr.infidelity.size());
            for (long lo = 10; lo * 10 < n; lo *= 10)
                slopes.add_row({fmt(T), fmt(beta), std::to_string(lo * c.trace_stride),
                                std::to_string(lo * 10 * c.trace_stride), fmt(decay_slope(tr.infidelity, lo, lo * 10))});
        }
    }
    out.add("slopes.csv", slopes.render());
    // toy model of the distance l to the optimal set, I ~ l^2
    CsvTable toy({"sigma", "n", "l", "l_squared"});
    const int steps = 1 << 16;
    for (double beta : cfg.betas) {
        const double sigma = lmc_sigma_for(cfg, beta);
        const auto l = relaxation_toy_model(sigma, 1.0, steps);
        for (int n = 0; n <= steps; n = n < 16 ? n + 1 : n * 2)
            toy.add_row({fmt(sigma), std::to_string(n), fmt(l[n]), fmt(l[n] * l[n])});
    }
    out.add("toy_model.csv", toy.render());
}

void deformation_scan_preset(const ExperimentConfig& cfg, OutputSet& out) {
    const auto p = problem_for(cfg);
    const double T_c = require(transitions(p, cfg.L).T_c, "T_c");
    CsvTable minima({"T", "kind", "x", "infidelity"});
    for (double T : cfg.durations()) {
        const double delta = center_delta(p, T, T_c);
        const Protocol center = s_delta_cell_average(T, delta, cfg.L);
        const auto coeffs = taylor_coefficients_at(p, center, 2);
        const auto spec = hessian_spectrum(coeffs.J, T, center);
        const SpectralData d = build_spectral_data(coeffs, spec, cfg.kappa);
        const int n = cfg.mode - 1;
        const Vec f = spec.eigenfunctions.col(n);
        const auto scan = deformation_scan(p, center, f, cfg.x_min, cfg.x_max, cfg.points);
        CsvTable t({"x", "infidelity", "out_of_bounds", "quadratic"});
        for (size_t k = 0; k < scan.x.size(); ++k) {
            const double x = scan.x[k];
            const double quad = d.c + d.b(n) * x + 0.5 * d.lambda(n) * x * x;
            t.add_row({fmt(x), fmt(scan.infidelity[k]), scan.out_of_bounds[k] ? "1" : "0", fmt(quad)});
        }
        out.add("scans/" + file_tag(T) + "_mode" + std::to_string(cfg.mode) + ".csv", t.render());
        for (size_t k = 0; k < scan.minima_x.size(); ++k)
            minima.add_row({fmt(T), "numeric", fmt(scan.minima_x[k]), fmt(scan.minima_infidelity[k])});
        if (d.lambda(n) > 0.0) {
            const double x = -d.b(n) / d.lambda(n);
            minima.add_row({fmt(T), "quadratic", fmt(x), fmt(d.c + 0.5 * d.b(n) * x)});
        }
    }
    out.add("minima.csv", minima.render());
}

}  // namespace

OutputSet run_preset(const ExperimentConfig& cfg) {
    OutputSet out;
    const std::string& name = cfg.preset;
    if (name == "phase-diagram-sd")
        phase_diagram_sd(cfg, out);
    else if (name == "stability-trace")
        stability_trace(cfg, out);
    else if (name == "hessian-spectrum")
        hessian_spectrum_preset(cfg, out);
    else if (name == "lmc-qsl")
        lmc_qsl(cfg, out);
    else if (name == "lmc-distances")
        lmc_distances(cfg, out);
    else if (name == "critical-scaling")
        critical_scaling(cfg, out);
    else if (name == "relaxation-stages")
        relaxation_stages(cfg, out);
    else if (name == "deformation-scan")
        deformation_scan_preset(cfg, out);
    else
        throw ConfigError("unknown preset '" + name + "'");
    return out;
}

OutputSet run_experiment(const ExperimentConfig& cfg) {
    auto out = run_preset(cfg);
    out.commit(cfg.output, cfg);
    return out;
}

}  // namespace clpt
