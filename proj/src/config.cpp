#include "clpt/config.hpp"

#include "clpt/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

namespace clpt {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    out = std::strtod(s.c_str(), &end);
    return errno == 0 && end == s.c_str() + s.size();
}

bool parse_long(const std::string& s, long& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    errno = 0;
    out = std::strtol(s.c_str(), &end, 10);
    return errno == 0 && end == s.c_str() + s.size();
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
    if (s.empty() || s[0] == '-') return false;
    char* end = nullptr;
    errno = 0;
    out = std::strtoull(s.c_str(), &end, 10);
    return errno == 0 && end == s.c_str() + s.size();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        if constexpr (std::is_floating_point_v<T>)
            s += fmt(v[i]);
        else
            s += std::to_string(v[i]);
    }
    return s;
}

using Setter = std::function<bool(ExperimentConfig&, const std::string&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Field {
    std::string key;
    Setter set;
    Getter get;
};

Field dbl(const std::string& key, double ExperimentConfig::*m) {
    return {key, [m](ExperimentConfig& c, const std::string& v) { return parse_double(v, c.*m); },
            [m](const ExperimentConfig& c) { return fmt(c.*m); }};
}

Field integer(const std::string& key, int ExperimentConfig::*m) {
    return {key,
            [m](ExperimentConfig& c, const std::string& v) {
                long x;
                if (!parse_long(v, x) || x < -2147483647L || x > 2147483647L) return false;
                c.*m = static_cast<int>(x);
                return true;
            },
            [m](const ExperimentConfig& c) { return std::to_string(c.*m); }};
}

Field lng(const std::string& key, long ExperimentConfig::*m) {
    return {key, [m](ExperimentConfig& c, const std::string& v) { return parse_long(v, c.*m); },
            [m](const ExperimentConfig& c) { return std::to_string(c.*m); }};
}

Field str(const std::string& key, std::string ExperimentConfig::*m) {
    return {key,
            [m](ExperimentConfig& c, const std::string& v) {
                c.*m = v;
                return true;
            },
            [m](const ExperimentConfig& c) { return c.*m; }};
}

Field dbl_list(const std::string& key, std::vector<double> ExperimentConfig::*m) {
    return {key,
            [m](ExperimentConfig& c, const std::string& v) {
                std::vector<double> out;
                if (!v.empty())
                    for (const auto& item : split_list(v)) {
                        double x;
                        if (!parse_double(item, x)) return false;
                        out.push_back(x);
                    }
                c.*m = out;
                return true;
            },
            [m](const ExperimentConfig& c) { return join(c.*m); }};
}

Field int_list(const std::string& key, std::vector<int> ExperimentConfig::*m) {
    return {key,
            [m](ExperimentConfig& c, const std::string& v) {
                std::vector<int> out;
                for (const auto& item : split_list(v)) {
                    long x;
                    if (!parse_long(item, x)) return false;
                    out.push_back(static_cast<int>(x));
                }
                c.*m = out;
                return true;
            },
            [m](const ExperimentConfig& c) { return join(c.*m); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        str("run.preset", &ExperimentConfig::preset),
        str("run.problem", &ExperimentConfig::problem),
        {"run.seed_base", [](ExperimentConfig& c, const std::string& v) { return parse_u64(v, c.seed_base); },
         [](const ExperimentConfig& c) { return std::to_string(c.seed_base); }},
        str("run.output", &ExperimentConfig::output),
        integer("run.workers", &ExperimentConfig::workers),
        dbl("problem.h_z", &ExperimentConfig::h_z),
        dbl("problem.h_x", &ExperimentConfig::h_x),
        dbl("problem.J", &ExperimentConfig::J),
        dbl("grid.T_min", &ExperimentConfig::T_min),
        dbl("grid.T_max", &ExperimentConfig::T_max),
        integer("grid.T_points", &ExperimentConfig::T_points),
        dbl_list("grid.T_list", &ExperimentConfig::T_list),
        integer("protocol.L", &ExperimentConfig::L),
        integer("protocol.N", &ExperimentConfig::N),
        str("expansion.kind", &ExperimentConfig::kind),
        integer("expansion.order", &ExperimentConfig::order),
        integer("expansion.cumulant_order", &ExperimentConfig::cumulant_order),
        integer("sd.runs", &ExperimentConfig::sd_runs),
        dbl_list("lmc.beta", &ExperimentConfig::betas),
        dbl("lmc.sigma", &ExperimentConfig::sigma),
        str("lmc.sigma_scaling", &ExperimentConfig::sigma_scaling),
        str("lmc.stride_scaling", &ExperimentConfig::stride_scaling),
        dbl("lmc.beta_ref", &ExperimentConfig::beta_ref),
        integer("lmc.runs", &ExperimentConfig::lmc_runs),
        integer("lmc.samples", &ExperimentConfig::samples),
        lng("lmc.stride", &ExperimentConfig::stride),
        lng("lmc.max_relax_iterations", &ExperimentConfig::max_relax_iterations),
        lng("lmc.anneal_iterations", &ExperimentConfig::anneal_iterations),
        dbl("lmc.trap_threshold", &ExperimentConfig::trap_threshold),
        lng("lmc.trace_stride", &ExperimentConfig::trace_stride),
        int_list("lmc.sample_counts", &ExperimentConfig::sample_counts),
        dbl("field.kappa", &ExperimentConfig::kappa),
        dbl("field.alpha", &ExperimentConfig::alpha),
        str("field.convention", &ExperimentConfig::convention),
        integer("deformation.mode", &ExperimentConfig::mode),
        dbl("deformation.x_min", &ExperimentConfig::x_min),
        dbl("deformation.x_max", &ExperimentConfig::x_max),
        integer("deformation.points", &ExperimentConfig::points),
    };
    return f;
}

const Field* find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.key == key) return &f;
    return nullptr;
}

size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

void check_ranges(const ExperimentConfig& c, std::vector<ConfigDiagnostic>& err) {
    auto bad = [&](const std::string& key, const std::string& what) { err.push_back({0, key + ": " + what}); };
    if (c.preset.empty())
        bad("run.preset", "preset is required (one of the names listed by --help)");
    else if (std::find(preset_names().begin(), preset_names().end(), c.preset) == preset_names().end())
        bad("run.preset", "unknown preset '" + c.preset + "'");
    if (c.problem != "1q" && c.problem != "2q") bad("run.problem", "must be 1q or 2q (got '" + c.problem + "')");
    if (c.output.empty()) bad("run.output", "must not be empty");
    if (c.workers < 0) bad("run.workers", "must be >= 0 (got " + std::to_string(c.workers) + ")");
    if (c.T_list.empty()) {
        if (!(c.T_min > 0.0)) bad("grid.T_min", "must be positive (got " + fmt(c.T_min) + ")");
        if (c.T_points < 1) bad("grid.T_points", "must be >= 1 (got " + std::to_string(c.T_points) + ")");
        if (c.T_points > 1 && !(c.T_max > c.T_min)) bad("grid.T_max", "must exceed grid.T_min");
    } else {
        for (double T : c.T_list)
            if (!(T > 0.0)) bad("grid.T_list", "durations must be positive (got " + fmt(T) + ")");
    }
    if (c.L < 2 || c.L > 4096) bad("protocol.L", "must be in [2, 4096] (got " + std::to_string(c.L) + ")");
    if (c.N < 2 || c.N > 100000) bad("protocol.N", "must be in [2, 100000] (got " + std::to_string(c.N) + ")");
    static const std::vector<std::string> kinds{"exact", "dyson", "taylor", "magnus", "cumulant"};
    if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end())
        bad("expansion.kind", "must be one of exact, dyson, taylor, magnus, cumulant (got '" + c.kind + "')");
    const int max_order = c.kind == "magnus" || c.kind == "cumulant" ? 3 : (c.kind == "taylor" ? 2 : 3);
    if (c.order < 1 || c.order > max_order)
        bad("expansion.order", "must be in [1, " + std::to_string(max_order) + "] for " + c.kind);
    if (c.cumulant_order < 1 || c.cumulant_order > 8) bad("expansion.cumulant_order", "must be in [1, 8]");
    if (c.sd_runs < 1) bad("sd.runs", "must be >= 1 (got " + std::to_string(c.sd_runs) + ")");
    if (c.betas.empty()) bad("lmc.beta", "needs at least one value");
    for (double b : c.betas)
        if (!(b > 0.0)) bad("lmc.beta", "must be positive (got " + fmt(b) + ")");
    if (!(c.sigma > 0.0 && c.sigma <= 1.0)) bad("lmc.sigma", "must be in (0, 1] (got " + fmt(c.sigma) + ")");
    if (c.sigma_scaling != "fixed" && c.sigma_scaling != "acceptance")
        bad("lmc.sigma_scaling", "must be fixed or acceptance");
    if (c.stride_scaling != "fixed" && c.stride_scaling != "diffusion")
        bad("lmc.stride_scaling", "must be fixed or diffusion");
    if (!(c.beta_ref > 0.0)) bad("lmc.beta_ref", "must be positive");
    if (c.lmc_runs < 1) bad("lmc.runs", "must be >= 1 (got " + std::to_string(c.lmc_runs) + ")");
    if (c.samples < 1) bad("lmc.samples", "must be >= 1");
    if (c.stride < 1) bad("lmc.stride", "must be >= 1");
    if (c.max_relax_iterations < 1) bad("lmc.max_relax_iterations", "must be >= 1");
    if (c.anneal_iterations < 0) bad("lmc.anneal_iterations", "must be >= 0");
    if (!(c.trap_threshold >= 0.0)) bad("lmc.trap_threshold", "must be >= 0");
    if (c.trace_stride < 1) bad("lmc.trace_stride", "must be >= 1");
    if (c.preset == "lmc-distances") {
        bool range = true, increasing = true;
        for (size_t i = 0; i < c.sample_counts.size(); ++i) {
            range = range && c.sample_counts[i] >= 1 && c.sample_counts[i] <= c.samples;
            increasing = increasing && (i == 0 || c.sample_counts[i] > c.sample_counts[i - 1]);
        }
        if (c.sample_counts.empty()) bad("lmc.sample_counts", "needs at least one value");
        if (!range) bad("lmc.sample_counts", "entries must be in [1, lmc.samples = " + std::to_string(c.samples) + "]");
        if (!increasing) bad("lmc.sample_counts", "must be increasing");
    }
    if (!(c.kappa > 0.0)) bad("field.kappa", "must be positive");
    if (!(c.alpha > 0.0)) bad("field.alpha", "must be positive");
    if (c.convention != "scaled" && c.convention != "raw") bad("field.convention", "must be scaled or raw");
    if (c.mode < 1 || c.mode > c.L) bad("deformation.mode", "must be in [1, protocol.L]");
    if (!(c.x_max > c.x_min)) bad("deformation.x_max", "must exceed deformation.x_min");
    if (c.points < 3) bad("deformation.points", "must be >= 3");
}

}  // namespace

std::vector<double> ExperimentConfig::durations() const {
    if (!T_list.empty()) return T_list;
    std::vector<double> out;
    if (T_points == 1) return {T_min};
    for (int i = 0; i < T_points; ++i) out.push_back(T_min + (T_max - T_min) * i / (T_points - 1));
    return out;
}

std::string ExperimentConfig::to_text() const {
    std::string out;
    std::string section;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        const std::string sec = f.key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) out += "\n";
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += f.key.substr(dot + 1) + " = " + f.get(*this) + "\n";
    }
    return out;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"phase-diagram-sd", "stability-trace",   "hessian-spectrum",
                                                "lmc-qsl",          "lmc-distances",     "critical-scaling",
                                                "relaxation-stages", "deformation-scan"};
    return names;
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& f : fields()) k.push_back(f.key);
        return k;
    }();
    return keys;
}

std::string nearest_key(const std::string& key) {
    std::string best;
    size_t best_d = std::string::npos;
    for (const auto& k : config_keys()) {
        // compare against both the full key and its last component
        const size_t d = std::min(edit_distance(key, k), edit_distance(key, k.substr(k.find('.') + 1)));
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

ConfigResult validate_config(const std::string& text, const std::string& preset_override) {
    ConfigResult r;
    std::stringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    std::map<std::string, int> seen;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                r.errors.push_back({line_no, "malformed section header '" + line + "'"});
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            r.errors.push_back({line_no, "expected 'key = value', got '" + line + "'"});
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string full = key.find('.') == std::string::npos && !section.empty() ? section + "." + key : key;
        const Field* f = find_field(full);
        if (!f) {
            r.warnings.push_back({line_no, "unknown key '" + full + "' ignored; nearest valid key is '" +
                                               nearest_key(full) + "'"});
            continue;
        }
        if (seen.count(full))
            r.warnings.push_back({line_no, "'" + full + "' repeats line " + std::to_string(seen[full]) +
                                               "; the later value wins"});
        seen[full] = line_no;
        if (!f->set(r.config, value)) r.errors.push_back({line_no, full + ": cannot parse '" + value + "'"});
    }
    if (!preset_override.empty()) r.config.preset = preset_override;
    std::vector<ConfigDiagnostic> range;
    check_ranges(r.config, range);
    for (auto& d : range) {
        const auto it = seen.find(d.message.substr(0, d.message.find(':')));
        if (it != seen.end()) d.line = it->second;
        r.errors.push_back(d);
    }
    return r;
}

std::string format_diagnostics(const std::vector<ConfigDiagnostic>& d, const std::string& kind) {
    std::string out;
    for (const auto& x : d) {
        out += kind;
        if (x.line > 0) out += " (line " + std::to_string(x.line) + ")";
        out += ": " + x.message + "\n";
    }
    return out;
}

}  // namespace clpt
