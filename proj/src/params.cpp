#include "rbc/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rbc {

namespace {

void require_positive(std::vector<std::string>& errs, double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
        errs.push_back(std::string(name) + " must be positive");
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::vector<std::string> PhysicalParams::validate() const {
    std::vector<std::string> errs;
    require_positive(errs, nu, "nu");
    require_positive(errs, kappa, "kappa");
    require_positive(errs, g, "g");
    require_positive(errs, alpha, "alpha");
    require_positive(errs, gamma, "gamma");
    if (gamma_tilde < 0.0 || !std::isfinite(gamma_tilde))
        errs.push_back("gamma_tilde must be >= 0");
    require_positive(errs, h, "h");
    require_positive(errs, t1, "t1");
    require_positive(errs, l_phys, "l_phys");
    if (d != 2 && d != 3)
        errs.push_back("d must be 2 or 3");
    return errs;
}

std::vector<std::string> NondimParams::validate() const {
    std::vector<std::string> errs;
    require_positive(errs, pr, "pr");
    require_positive(errs, ra, "ra");
    require_positive(errs, ra_tilde, "ra_tilde");
    require_positive(errs, aspect, "aspect");
    if (n1 < 0)
        errs.push_back("n1 must be >= 0");
    if (n2 < 0)
        errs.push_back("n2 must be >= 0");
    if (sigma_tilde_norm < 0.0 || !std::isfinite(sigma_tilde_norm))
        errs.push_back("sigma_tilde_norm must be >= 0");
    if ((n1 == 0) != (sigma_tilde_norm == 0.0))
        errs.push_back("n1 == 0 iff sigma_tilde_norm == 0 (velocity forcing needs modes and "
                       "strength together)");
    return errs;
}

NondimParams nondimensionalize(const PhysicalParams& p, int n1, int n2) {
    auto errs = p.validate();
    if (n1 < 0)
        errs.push_back("n1 must be >= 0");
    if (n2 < 0)
        errs.push_back("n2 must be >= 0");
    if (!errs.empty()) {
        std::string msg = "invalid physical parameters: ";
        for (size_t i = 0; i < errs.size(); ++i)
            msg += (i ? "; " : "") + errs[i];
        throw std::invalid_argument(msg);
    }
    NondimParams q;
    const double hd = static_cast<double>(p.d);
    q.pr = p.nu / p.kappa;
    q.ra = p.g * p.alpha * p.gamma * std::pow(p.h, 4.0 - hd / 2.0) /
           (p.nu * std::pow(p.kappa, 1.5));
    q.ra_tilde = std::sqrt(p.kappa) * std::pow(p.h, hd / 2.0 - 1.0) * p.t1 / p.gamma;
    q.aspect = p.l_phys / p.h;
    q.n1 = n1;
    q.n2 = n2;
    // velocity noise strength after rescaling; the mode shapes carry unit norm
    q.sigma_tilde_norm = p.gamma_tilde / (p.nu * std::sqrt(p.kappa) * std::pow(p.h, hd / 2.0 - 2.0));
    if (n1 == 0 && q.sigma_tilde_norm != 0.0)
        throw std::invalid_argument("invalid physical parameters: gamma_tilde > 0 requires n1 > 0");
    if (n1 > 0 && q.sigma_tilde_norm == 0.0)
        throw std::invalid_argument("invalid physical parameters: n1 > 0 requires gamma_tilde > 0");
    return q;
}

void temperature_to_theta(const Grid& g, double ra_tilde, const Field& temperature, Field& theta) {
    check_shape(g, temperature, "temperature_to_theta");
    theta = Field(g);
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.nz; ++j)
            theta(i, j) = temperature(i, j) - ra_tilde * (1.0 - g.z(j));
}

void theta_to_temperature(const Grid& g, double ra_tilde, const Field& theta, Field& temperature) {
    check_shape(g, theta, "theta_to_temperature");
    temperature = Field(g);
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.nz; ++j)
            temperature(i, j) = theta(i, j) + ra_tilde * (1.0 - g.z(j));
}

namespace {
// mollifier and its running integral (the quintic smoothstep)
inline double mollifier(double s) { return 30.0 * s * s * (1.0 - s) * (1.0 - s); }
inline double mollifier_integral(double s) { return s * s * s * (10.0 + s * (-15.0 + 6.0 * s)); }
} // namespace

double BackgroundProfile::tau(double z) const {
    if (z >= delta)
        return 0.0;
    return ra_tilde * (1.0 - mollifier_integral(z / delta));
}

double BackgroundProfile::dtau(double z) const {
    if (z >= delta)
        return 0.0;
    return -(ra_tilde / delta) * mollifier(z / delta);
}

BackgroundProfile build_background_profile(double ra, double ra_tilde) {
    if (!(ra > 0.0) || !(ra_tilde > 0.0))
        throw std::invalid_argument("build_background_profile: ra and ra_tilde must be positive");
    BackgroundProfile bp;
    bp.ra_tilde = ra_tilde;
    bp.delta = std::min(1.0, 1.0 / std::sqrt(2.0 * ra * ra_tilde));
    return bp;
}

// --- configuration -----------------------------------------------------------

namespace {

struct Parser {
    std::vector<std::string> errors;

    bool to_double(const std::string& key, const std::string& s, double& out) {
        try {
            size_t pos = 0;
            out = std::stod(s, &pos);
            if (pos != s.size())
                throw std::invalid_argument("trailing");
            return true;
        } catch (...) {
            errors.push_back("key '" + key + "': expected a real number, got '" + s + "'");
            return false;
        }
    }
    bool to_int(const std::string& key, const std::string& s, int& out) {
        try {
            size_t pos = 0;
            out = std::stoi(s, &pos);
            if (pos != s.size())
                throw std::invalid_argument("trailing");
            return true;
        } catch (...) {
            errors.push_back("key '" + key + "': expected an integer, got '" + s + "'");
            return false;
        }
    }
    bool to_u64(const std::string& key, const std::string& s, std::uint64_t& out) {
        try {
            size_t pos = 0;
            out = std::stoull(s, &pos);
            if (pos != s.size())
                throw std::invalid_argument("trailing");
            return true;
        } catch (...) {
            errors.push_back("key '" + key + "': expected an unsigned integer, got '" + s + "'");
            return false;
        }
    }
    bool to_bool(const std::string& key, const std::string& s, bool& out) {
        if (s == "1" || s == "true" || s == "on") {
            out = true;
            return true;
        }
        if (s == "0" || s == "false" || s == "off") {
            out = false;
            return true;
        }
        errors.push_back("key '" + key + "': expected a boolean (0/1/true/false), got '" + s + "'");
        return false;
    }
    bool to_list(const std::string& key, const std::string& s, std::vector<double>& out) {
        out.clear();
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            double v;
            if (!to_double(key, item, v))
                return false;
            out.push_back(v);
        }
        if (out.empty()) {
            errors.push_back("key '" + key + "': expected a comma-separated list, got '" + s + "'");
            return false;
        }
        return true;
    }
};

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    return s.substr(a, b - a + 1);
}

std::string join_list(const std::vector<double>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i)
        s += (i ? "," : "") + fmt_double(v[i]);
    return s;
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig c;
    Parser p;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            p.errors.push_back("line " + std::to_string(lineno) + ": expected key=value, got '" +
                               line + "'");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        if (key == "pr") p.to_double(key, val, c.pr);
        else if (key == "ra") p.to_double(key, val, c.ra);
        else if (key == "ra_tilde") p.to_double(key, val, c.ra_tilde);
        else if (key == "aspect") p.to_double(key, val, c.aspect);
        else if (key == "sigma_tilde_norm") p.to_double(key, val, c.sigma_tilde_norm);
        else if (key == "n1") p.to_int(key, val, c.n1);
        else if (key == "n2") p.to_int(key, val, c.n2);
        else if (key == "nx") p.to_int(key, val, c.nx);
        else if (key == "nz") p.to_int(key, val, c.nz);
        else if (key == "dt") p.to_double(key, val, c.dt);
        else if (key == "t_end") p.to_double(key, val, c.t_end);
        else if (key == "cfl_limit") p.to_double(key, val, c.cfl_limit);
        else if (key == "seed") p.to_u64(key, val, c.seed);
        else if (key == "ic_amplitude") p.to_double(key, val, c.ic_amplitude);
        else if (key == "trace_dt") p.to_double(key, val, c.trace_dt);
        else if (key == "snapshot_dt") p.to_double(key, val, c.snapshot_dt);
        else if (key == "checkpoint_dt") p.to_double(key, val, c.checkpoint_dt);
        else if (key == "burn_in") p.to_double(key, val, c.burn_in);
        else if (key == "batches") p.to_int(key, val, c.batches);
        else if (key == "model") c.model = val;
        else if (key == "coupling_case") c.coupling_case = val;
        else if (key == "lambda1") p.to_double(key, val, c.lambda1);
        else if (key == "lambda2") p.to_double(key, val, c.lambda2);
        else if (key == "n_nudge_u") p.to_int(key, val, c.n_nudge_u);
        else if (key == "n_nudge_theta") p.to_int(key, val, c.n_nudge_theta);
        else if (key == "auto_modes") p.to_bool(key, val, c.auto_modes);
        else if (key == "budget") p.to_double(key, val, c.budget);
        else if (key == "sync_eps") p.to_double(key, val, c.sync_eps);
        else if (key == "fit_window") p.to_double(key, val, c.fit_window);
        else if (key == "sync_fraction") p.to_double(key, val, c.sync_fraction);
        else if (key == "members") p.to_int(key, val, c.members);
        else if (key == "threads") p.to_int(key, val, c.threads);
        else if (key == "gamma") p.to_double(key, val, c.gamma);
        else if (key == "k_values") p.to_list(key, val, c.k_values);
        else if (key == "sweep_ra") p.to_list(key, val, c.sweep_ra);
        else if (key == "comparison_v_amplitude") p.to_double(key, val, c.comparison_v_amplitude);
        else p.errors.push_back("unknown config key '" + key + "'");
    }
    if (!p.errors.empty()) {
        std::string msg = "config errors: ";
        for (size_t i = 0; i < p.errors.size(); ++i)
            msg += (i ? "; " : "") + p.errors[i];
        throw std::invalid_argument(msg);
    }
    return c;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

NondimParams ExperimentConfig::nondim() const {
    NondimParams q;
    q.pr = pr;
    q.ra = ra;
    q.ra_tilde = ra_tilde;
    q.aspect = aspect;
    q.n1 = n1;
    q.n2 = n2;
    q.sigma_tilde_norm = sigma_tilde_norm;
    return q;
}

std::vector<std::string> ExperimentConfig::validate() const {
    std::vector<std::string> errs = nondim().validate();
    if (nx < 8 || (nx & (nx - 1)) != 0)
        errs.push_back("nx must be a power of two >= 8");
    if (nz < 9 || nz % 2 == 0)
        errs.push_back("nz must be odd and >= 9");
    if (!(dt > 0.0))
        errs.push_back("dt must be positive");
    if (t_end < 0.0)
        errs.push_back("t_end must be >= 0");
    if (!(cfl_limit > 0.0) || cfl_limit > 1.0)
        errs.push_back("cfl_limit must be in (0, 1]");
    if (ic_amplitude < 0.0)
        errs.push_back("ic_amplitude must be >= 0");
    if (trace_dt < 0.0)
        errs.push_back("trace_dt must be >= 0");
    if (snapshot_dt < 0.0)
        errs.push_back("snapshot_dt must be >= 0");
    if (checkpoint_dt < 0.0)
        errs.push_back("checkpoint_dt must be >= 0");
    if (burn_in < 0.0)
        errs.push_back("burn_in must be >= 0");
    if (batches < 2)
        errs.push_back("batches must be >= 2");
    if (model != "finite" && model != "infinite")
        errs.push_back("model must be 'finite' or 'infinite'");
    if (coupling_case != "case_i" && coupling_case != "case_ii")
        errs.push_back("coupling_case must be 'case_i' or 'case_ii'");
    if (coupling_case == "case_ii" && lambda1 != 0.0)
        errs.push_back("case_ii requires lambda1 == 0 (temperature-only nudging)");
    if (lambda1 < 0.0)
        errs.push_back("lambda1 must be >= 0");
    if (lambda2 < 0.0)
        errs.push_back("lambda2 must be >= 0");
    if (n_nudge_u < 0)
        errs.push_back("n_nudge_u must be >= 0");
    if (n_nudge_theta < 0)
        errs.push_back("n_nudge_theta must be >= 0");
    if (!(budget > 0.0))
        errs.push_back("budget must be positive");
    if (!(sync_eps > 0.0))
        errs.push_back("sync_eps must be positive");
    if (!(fit_window > 0.0) || fit_window >= 1.0)
        errs.push_back("fit_window must be in (0, 1)");
    if (sync_fraction < 0.0 || sync_fraction > 1.0)
        errs.push_back("sync_fraction must be in [0, 1]");
    if (members < 1)
        errs.push_back("members must be >= 1");
    if (threads < 1)
        errs.push_back("threads must be >= 1");
    if (gamma < 0.0)
        errs.push_back("gamma must be >= 0");
    for (double k : k_values)
        if (!(k > 0.0))
            errs.push_back("k_values must all be positive");
    for (double r : sweep_ra)
        if (!(r > 0.0))
            errs.push_back("sweep_ra must all be positive");
    if (comparison_v_amplitude < 0.0)
        errs.push_back("comparison_v_amplitude must be >= 0");
    return errs;
}

std::string ExperimentConfig::canonical() const {
    std::map<std::string, std::string> kv;
    kv["pr"] = fmt_double(pr);
    kv["ra"] = fmt_double(ra);
    kv["ra_tilde"] = fmt_double(ra_tilde);
    kv["aspect"] = fmt_double(aspect);
    kv["sigma_tilde_norm"] = fmt_double(sigma_tilde_norm);
    kv["n1"] = std::to_string(n1);
    kv["n2"] = std::to_string(n2);
    kv["nx"] = std::to_string(nx);
    kv["nz"] = std::to_string(nz);
    kv["dt"] = fmt_double(dt);
    kv["t_end"] = fmt_double(t_end);
    kv["cfl_limit"] = fmt_double(cfl_limit);
    kv["seed"] = std::to_string(seed);
    kv["ic_amplitude"] = fmt_double(ic_amplitude);
    kv["trace_dt"] = fmt_double(trace_dt);
    kv["snapshot_dt"] = fmt_double(snapshot_dt);
    kv["checkpoint_dt"] = fmt_double(checkpoint_dt);
    kv["burn_in"] = fmt_double(burn_in);
    kv["batches"] = std::to_string(batches);
    kv["model"] = model;
    kv["coupling_case"] = coupling_case;
    kv["lambda1"] = fmt_double(lambda1);
    kv["lambda2"] = fmt_double(lambda2);
    kv["n_nudge_u"] = std::to_string(n_nudge_u);
    kv["n_nudge_theta"] = std::to_string(n_nudge_theta);
    kv["auto_modes"] = auto_modes ? "1" : "0";
    kv["budget"] = fmt_double(budget);
    kv["sync_eps"] = fmt_double(sync_eps);
    kv["fit_window"] = fmt_double(fit_window);
    kv["sync_fraction"] = fmt_double(sync_fraction);
    kv["members"] = std::to_string(members);
    // threads is an execution knob: results are thread-count independent, so
    // it stays out of the canonical text (and thus out of the config hash).
    kv["gamma"] = fmt_double(gamma);
    kv["k_values"] = join_list(k_values);
    kv["sweep_ra"] = sweep_ra.empty() ? "" : join_list(sweep_ra);
    kv["comparison_v_amplitude"] = fmt_double(comparison_v_amplitude);
    std::string out;
    for (const auto& [k, v] : kv)
        out += k + "=" + v + "\n";
    return out;
}

} // namespace rbc
