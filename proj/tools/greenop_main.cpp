// greenop CLI: experiment runner for the Green's-operator library.
//
//   greenop list
//   greenop run <config-file-or-experiment-name> [--output-dir DIR] [--seed N]
//
// Configs are flat `key = value` text with dotted sections (see configs/ and
// README). Each run writes solution.csv, report.csv, report.json and
// telemetry.json into the output directory. Exit codes: 0 success, 2 config /
// validation error, 3 numerical failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "greenop/averaging.hpp"
#include "greenop/bebutov.hpp"
#include "greenop/green_solver.hpp"
#include "greenop/spectral.hpp"
#include "greenop/time_average.hpp"

namespace {

using json = nlohmann::json;
using namespace greenop;

// ---------------------------------------------------------------------------
// config plumbing

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error("ConfigError: " + what) {}
};

using KvMap = std::map<std::string, std::string>;

KvMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    KvMap kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = val;
    }
    return kv;
}

// Typed accessors over the merged (defaults + overrides) key/value map.
class Settings {
  public:
    explicit Settings(KvMap kv) : kv_(std::move(kv)) {}

    std::string str(const std::string& key) const { return fetch(key); }

    double num(const std::string& key) const {
        const std::string v = fetch(key);
        try {
            std::size_t used = 0;
            const double x = std::stod(v, &used);
            if (trim(v.substr(used)).empty()) return x;
        } catch (const std::exception&) {
        }
        throw ConfigError("key '" + key + "': cannot parse number from '" + v + "'");
    }

    int integer(const std::string& key) const {
        const double x = num(key);
        if (std::abs(x - std::llround(x)) > 1e-9)
            throw ConfigError("key '" + key + "': expected an integer");
        return static_cast<int>(std::llround(x));
    }

    std::vector<double> num_list(const std::string& key) const {
        const std::string v = fetch(key);
        std::vector<double> out;
        std::stringstream ss(v);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cell = trim(cell);
            if (cell.empty()) continue;
            try {
                out.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("key '" + key + "': cannot parse list entry '" + cell + "'");
            }
        }
        if (out.empty()) throw ConfigError("key '" + key + "': empty list");
        return out;
    }

    const KvMap& raw() const { return kv_; }

  private:
    std::string fetch(const std::string& key) const {
        const auto it = kv_.find(key);
        if (it == kv_.end()) throw ConfigError("missing key '" + key + "'");
        return it->second;
    }

    KvMap kv_;
};

// ---------------------------------------------------------------------------
// experiment registry

struct Experiment {
    std::string name;
    std::string blurb;
    KvMap defaults;
};

const std::vector<Experiment>& registry() {
    static const std::vector<Experiment> reg = [] {
        std::vector<Experiment> r;
        r.push_back({"diag2", "closed-form linear solve, A = diag(-1, 2), f = (1, 1)",
                     {{"experiment", "diag2"},
                      {"output_dir", "out/diag2"},
                      {"seed", "12345"},
                      {"solve.h", "1e-3"},
                      {"solve.T", "30"},
                      {"solve.tail_tol", "1e-8"},
                      {"solve.fp_tol", "1e-9"},
                      {"solve.max_iter", "100"},
                      {"solve.t_eval", "8"},
                      {"output.stride", "1"}}});
        r.push_back({"scalar_lin_avg", "linear averaging sweep, x' = -x + sin(t/eps)",
                     {{"experiment", "scalar_lin_avg"},
                      {"output_dir", "out/scalar_lin_avg"},
                      {"seed", "12345"},
                      {"forcing.h", "0.01"},
                      {"eps_list", "0.2,0.1,0.05,0.025"},
                      {"solve.h", "0.01"},
                      {"solve.T", "35"},
                      {"solve.tail_tol", "1e-8"},
                      {"solve.fp_tol", "1e-9"},
                      {"solve.max_iter", "100"},
                      {"solve.t_eval", "-1"},
                      {"sweep.t_min", "-1"},
                      {"sweep.windows", "1,2,5,10,20,50,100,200"},
                      {"output.stride", "10"}}});
        r.push_back({"excub", "cubic non-uniqueness benchmark: residuals of 0 and +/-q,"
                              " plus the truncated-cubic contraction solve",
                     {{"experiment", "excub"},
                      {"output_dir", "out/excub"},
                      {"seed", "12345"},
                      {"field.scale", "0.5"},
                      {"field.trunc_radius", "0.5"},
                      {"residual.t0", "0.1"},
                      {"solve.h", "1e-4"},
                      {"solve.T", "20"},
                      {"solve.tail_tol", "1e-8"},
                      {"solve.fp_tol", "1e-9"},
                      {"solve.max_iter", "100"},
                      {"solve.t_eval", "-1"},
                      {"output.stride", "10"}}});
        r.push_back({"heat31", "semi-linear averaging sweep on the 31-point Dirichlet Laplacian",
                     {{"experiment", "heat31"},
                      {"output_dir", "out/heat31"},
                      {"seed", "12345"},
                      {"operator.points", "31"},
                      {"forcing.h", "0.01"},
                      {"field.scale", "1"},
                      {"eps_list", "0.2,0.1,0.05,0.025"},
                      {"solve.h", "0.01"},
                      {"solve.T", "8"},
                      {"solve.tail_tol", "1e-8"},
                      {"solve.fp_tol", "1e-9"},
                      {"solve.max_iter", "100"},
                      {"solve.t_eval", "-1"},
                      {"sweep.t_min", "-1"},
                      {"sweep.windows", "1,2,5,10,20,50"},
                      {"output.stride", "40"}}});
        r.push_back({"semilinear_scalar", "scalar contraction benchmark, A = -1, F = 0.1 sin x",
                     {{"experiment", "semilinear_scalar"},
                      {"output_dir", "out/semilinear_scalar"},
                      {"seed", "12345"},
                      {"field.scale", "0.1"},
                      {"solve.h", "1e-3"},
                      {"solve.T", "30"},
                      {"solve.tail_tol", "1e-8"},
                      {"solve.fp_tol", "1e-9"},
                      {"solve.max_iter", "100"},
                      {"solve.t_eval", "-1"},
                      {"output.stride", "1"}}});
        r.push_back({"custom", "operator/forcing/field assembled from config keys",
                     {{"experiment", "custom"},
                      {"output_dir", "out/custom"},
                      {"seed", "12345"},
                      {"operator.kind", "dense_matrix"},
                      {"operator.matrix_csv", ""},
                      {"operator.points", "0"},
                      {"operator.gap_tolerance", "1e-8"},
                      {"operator.nu_fraction", "0.9"},
                      {"forcing.kind", "constant"},
                      {"forcing.amplitude", "1"},
                      {"forcing.omega", "1"},
                      {"forcing.omega2", "1.4142135623730951"},
                      {"forcing.value", "1"},
                      {"forcing.csv", ""},
                      {"forcing.profile", "ones"},
                      {"forcing.h", "0.01"},
                      {"field.kind", "none"},
                      {"field.scale", "0.1"},
                      {"field.trunc_radius", "1"},
                      {"field.modulation", "none"},
                      {"eps_list", ""},
                      {"solve.h", "1e-3"},
                      {"solve.T", "30"},
                      {"solve.tail_tol", "1e-8"},
                      {"solve.fp_tol", "1e-9"},
                      {"solve.max_iter", "100"},
                      {"solve.t_eval", "-1"},
                      {"sweep.t_min", "-1"},
                      {"sweep.windows", "1,2,5,10,20,50"},
                      {"output.stride", "1"}}});
        return r;
    }();
    return reg;
}

const Experiment* find_experiment(const std::string& name) {
    for (const auto& e : registry())
        if (e.name == name) return &e;
    return nullptr;
}

// ---------------------------------------------------------------------------
// shared pieces

SolveConfig solve_config_from(const Settings& s) {
    SolveConfig cfg;
    cfg.h = s.num("solve.h");
    cfg.T = s.num("solve.T");
    cfg.tail_tol = s.num("solve.tail_tol");
    cfg.fp_tol = s.num("solve.fp_tol");
    cfg.max_iter = s.integer("solve.max_iter");
    cfg.t_eval = s.num("solve.t_eval");
    if (cfg.h <= 0 || cfg.T <= 0 || cfg.tail_tol <= 0 || cfg.fp_tol <= 0 || cfg.max_iter < 1)
        throw ConfigError("solve.* values must be positive");
    return cfg;
}

double decaying_mix_signal(double t) {
    return (std::sin(t) + std::cos(std::sqrt(2.0) * t) + std::exp(-t)) / 3.0;
}

GridFunction strided(const GridFunction& f, int stride) {
    if (stride <= 1) return f;
    std::vector<Eigen::VectorXd> vals;
    for (std::size_t k = 0; k < f.size(); k += static_cast<std::size_t>(stride))
        vals.push_back(f[k]);
    if (vals.size() < 2) vals.push_back(f[f.size() - 1]);
    return GridFunction(f.t0(), f.h() * stride, std::move(vals));
}

// Randomized validation of a declared Lipschitz constant (and (G1) when the
// field enters an averaging sweep). Uses the --seed so reruns are exact.
void spot_check_field(const LipschitzField& F, Eigen::Index dim, unsigned seed, bool check_g1) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> ut(0.0, 10.0), ux(-2.0, 2.0);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < 50; ++i) {
        const double t = ut(rng);
        Eigen::VectorXd x(dim), y(dim);
        for (Eigen::Index j = 0; j < dim; ++j) {
            x(j) = ux(rng);
            y(j) = ux(rng);
        }
        const double lhs = (F.eval(t, x) - F.eval(t, y)).norm();
        if (lhs > F.L * (x - y).norm() * (1.0 + 1e-9))
            throw ConfigError("declared Lipschitz constant violated by a sampled pair");
        if (check_g1 && F.eval(t, zero).norm() > 1e-12)
            throw ConfigError("field does not vanish at x = 0 (condition for averaging)");
    }
}

struct Outputs {
    GridFunction solution;
    std::string report_csv;
    json report;
    json telemetry;
};

json report_json_from_sweep(const AveragingReport& rep) {
    json rows = json::array();
    for (const auto& r : rep.rows) {
        json row{{"eps", r.eps},
                 {"sup_dev", r.sup_dev},
                 {"sup_dev_full", r.sup_dev_full},
                 {"iterations", r.iterations},
                 {"alpha", r.alpha}};
        if (r.bound) row["bound"] = *r.bound;
        if (r.slope_cumulative) row["slope_cumulative"] = *r.slope_cumulative;
        rows.push_back(row);
    }
    std::vector<double> psi(rep.psi_bar.data(), rep.psi_bar.data() + rep.psi_bar.size());
    return json{{"psi_bar", psi}, {"rows", rows},     {"slope", rep.slope},
                {"t_min", rep.t_min}, {"N", rep.N},   {"nu", rep.nu}};
}

std::string sweep_csv(const AveragingReport& rep) {
    std::ostringstream out;
    out << "eps,sup_dev,bound,slope_cumulative\n";
    char buf[40];
    const auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (const auto& r : rep.rows) {
        put(r.eps);
        out << ',';
        put(r.sup_dev);
        out << ',';
        if (r.bound) put(*r.bound);
        out << ',';
        if (r.slope_cumulative) put(*r.slope_cumulative);
        out << "\n";
    }
    return out.str();
}

std::string metrics_csv(const std::vector<std::pair<std::string, double>>& rows) {
    std::ostringstream out;
    out << "metric,value\n";
    char buf[40];
    for (const auto& [k, v] : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << k << ',' << buf << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// built-in experiments

Outputs run_diag2(const Settings& st, unsigned) {
    const SolveConfig cfg = solve_config_from(st);
    Eigen::MatrixXd A(2, 2);
    A << -1, 0, 0, 2;
    HyperbolicSplitting s = split(OperatorSpec::dense(A));
    const GridFunction f = GridFunction::constant(0.0, cfg.h, cfg.T, Eigen::VectorXd::Ones(2));
    const GridFunction phi = green_apply_semiaxis(s, f, cfg);

    double closed_err = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        Eigen::VectorXd exact(2);
        exact << 1.0 - std::exp(-phi.time_at(k)), -0.5;
        closed_err = std::max(closed_err, (phi[k] - exact).norm());
    }
    const double boundary = (s.P_minus * phi[0]).norm();
    const double resid = ode_residual(s, f, nullptr, phi);

    std::vector<std::pair<std::string, double>> rows{
        {"closed_form_max_err", closed_err},
        {"boundary_norm", boundary},
        {"ode_residual", resid},
        {"solution_sup", phi.sup_norm()},
        {"norm_bound_2N_over_nu", 2.0 * s.N / s.nu * f.sup_norm()},
        {"gap", s.gap},
        {"N", s.N},
        {"nu", s.nu}};
    Outputs out{strided(phi, st.integer("output.stride")), metrics_csv(rows), json{}, json{}};
    for (const auto& [k, v] : rows) out.report[k] = v;
    out.telemetry = {{"experiment", "diag2"},
                     {"h", cfg.h},
                     {"T", cfg.T},
                     {"trusted_until", phi.t_end()},
                     {"samples", phi.size()}};
    return out;
}

Outputs run_scalar_lin_avg(const Settings& st, unsigned) {
    const SolveConfig cfg = solve_config_from(st);
    const std::vector<double> eps_list = st.num_list("eps_list");
    const double h_slow = st.num("forcing.h");
    const double eps_min = *std::min_element(eps_list.begin(), eps_list.end());
    const double slow_len = cfg.T / eps_min;
    const auto count = static_cast<std::size_t>(std::llround(slow_len / h_slow)) + 2;

    AveragingProblem p;
    p.op = OperatorSpec::dense(-Eigen::MatrixXd::Identity(1, 1));
    p.f = GridFunction::sample_scalar(0.0, h_slow, count, [](double t) { return std::sin(t); });
    p.f_bar = Eigen::VectorXd::Zero(1);
    p.omega = time_average(p.f, st.num_list("sweep.windows"));

    const AveragingReport rep = averaging_sweep(p, eps_list, cfg, st.num("sweep.t_min"));
    HyperbolicSplitting s = split(p.op);
    const GridFunction psi = detail::solve_rescaled_with(p, s, eps_list.back(), cfg);

    Outputs out{strided(psi, st.integer("output.stride")), sweep_csv(rep),
                report_json_from_sweep(rep), json{}};
    out.telemetry = {{"experiment", "scalar_lin_avg"},
                     {"eps_count", eps_list.size()},
                     {"slow_samples", p.f.size()},
                     {"solution_eps", eps_list.back()},
                     {"t_min", rep.t_min}};
    return out;
}

Outputs run_excub(const Settings& st, unsigned seed) {
    const SolveConfig cfg = solve_config_from(st);
    const double scale = st.num("field.scale");
    const double radius = st.num("field.trunc_radius");
    const double t0 = st.num("residual.t0");
    if (scale <= 0 || radius <= 0 || t0 <= 0)
        throw ConfigError("field.scale, field.trunc_radius and residual.t0 must be positive");

    HyperbolicSplitting s = split(OperatorSpec::dense(Eigen::MatrixXd::Identity(1, 1)));

    const auto q = [scale](double t) { return 1.0 / std::sqrt(scale * (1.0 - std::exp(-2.0 * t))); };
    const auto count = static_cast<std::size_t>(std::llround((cfg.T - t0) / cfg.h)) + 1;
    const GridFunction zero_f = GridFunction::constant(t0, cfg.h, cfg.T - t0, Eigen::VectorXd::Zero(1));

    LipschitzField cubic_true;
    cubic_true.eval = [scale](double, const Eigen::VectorXd& x) {
        return Eigen::VectorXd(-scale * x.array().cube());
    };
    cubic_true.L = 0.0;  // only used for residual evaluation

    std::vector<std::pair<std::string, double>> rows;
    std::vector<GridFunction> branches;
    const std::vector<std::pair<std::string, double>> signs{
        {"zero", 0.0}, {"plus_q", 1.0}, {"minus_q", -1.0}};
    for (const auto& [name, sgn] : signs) {
        const GridFunction branch = GridFunction::sample_scalar(
            t0, cfg.h, count, [&](double t) { return sgn * q(t); });
        rows.emplace_back("residual_" + name, ode_residual(s, zero_f, &cubic_true, branch));
        branches.push_back(branch);
    }

    // contraction solve with the cubic truncated to a global-Lipschitz field
    LipschitzField trunc;
    trunc.eval = [scale, radius](double, const Eigen::VectorXd& x) {
        Eigen::VectorXd c = x.cwiseMax(-radius).cwiseMin(radius);
        return Eigen::VectorXd(-scale * c.array().cube());
    };
    trunc.L = scale * 3.0 * radius * radius;
    spot_check_field(trunc, 1, seed, false);
    const GridFunction f0 = GridFunction::constant(0.0, cfg.h, cfg.T, Eigen::VectorXd::Zero(1));
    const SemilinearResult res = solve_semilinear(s, f0, trunc, cfg);
    rows.emplace_back("solver_sup_norm", res.phi.sup_norm());
    rows.emplace_back("solver_iterations", res.iterations);
    rows.emplace_back("alpha", res.alpha);

    std::vector<Eigen::VectorXd> stacked;
    for (std::size_t k = 0; k < count; ++k) {
        Eigen::VectorXd v(3);
        v << branches[0][k](0), branches[1][k](0), branches[2][k](0);
        stacked.push_back(v);
    }
    Outputs out{strided(GridFunction(t0, cfg.h, std::move(stacked)), st.integer("output.stride")),
                metrics_csv(rows), json{}, json{}};
    for (const auto& [k, v] : rows) out.report[k] = v;
    out.telemetry = {{"experiment", "excub"},
                     {"eps_cubic", scale},
                     {"trunc_radius", radius},
                     {"L", trunc.L},
                     {"contraction_alpha", res.alpha},
                     {"iterations", res.iterations}};
    return out;
}

Outputs run_heat31(const Settings& st, unsigned seed) {
    const SolveConfig cfg = solve_config_from(st);
    const int points = st.integer("operator.points");
    const double fscale = st.num("field.scale");
    if (points < 1) throw ConfigError("operator.points must be positive");
    const std::vector<double> eps_list = st.num_list("eps_list");
    const double h_slow = st.num("forcing.h");
    const double eps_min = *std::min_element(eps_list.begin(), eps_list.end());
    const auto count =
        static_cast<std::size_t>(std::llround(cfg.T / eps_min / h_slow)) + 2;

    Eigen::VectorXd profile(points);
    for (int j = 0; j < points; ++j)
        profile(j) = std::sin(M_PI * static_cast<double>(j + 1) / static_cast<double>(points + 1));

    AveragingProblem p;
    p.op = OperatorSpec::dirichlet_laplacian(points);
    p.f = GridFunction::sample(0.0, h_slow, count, [&](double t) {
        return Eigen::VectorXd(decaying_mix_signal(t) * profile);
    });
    p.f_bar = Eigen::VectorXd::Zero(points);  // the mix has zero time average
    p.omega = time_average(p.f, st.num_list("sweep.windows"));

    LipschitzField F;
    F.eval = [fscale](double t, const Eigen::VectorXd& x) {
        return Eigen::VectorXd(fscale * decaying_mix_signal(t) * x.array().sin());
    };
    F.L = fscale;  // |mix| <= 1 and sin is 1-Lipschitz
    F.averaged = [points](const Eigen::VectorXd&) {
        return Eigen::VectorXd(Eigen::VectorXd::Zero(points));
    };
    spot_check_field(F, points, seed, true);
    p.F = F;

    const AveragingReport rep = averaging_sweep(p, eps_list, cfg, st.num("sweep.t_min"));
    HyperbolicSplitting s = split(p.op);
    const GridFunction psi = detail::solve_rescaled_with(p, s, eps_list.back(), cfg);

    Outputs out{strided(psi, st.integer("output.stride")), sweep_csv(rep),
                report_json_from_sweep(rep), json{}};
    out.telemetry = {{"experiment", "heat31"},
                     {"points", points},
                     {"gap", s.gap},
                     {"N", s.N},
                     {"nu", s.nu},
                     {"eps_count", eps_list.size()},
                     {"solution_eps", eps_list.back()},
                     {"t_min", rep.t_min}};
    return out;
}

Outputs run_semilinear_scalar(const Settings& st, unsigned seed) {
    const SolveConfig cfg = solve_config_from(st);
    const double scale = st.num("field.scale");
    HyperbolicSplitting s = split(OperatorSpec::dense(-Eigen::MatrixXd::Identity(1, 1)));
    const GridFunction f = GridFunction::constant(0.0, cfg.h, cfg.T, Eigen::VectorXd::Ones(1));

    LipschitzField F;
    F.eval = [scale](double, const Eigen::VectorXd& x) {
        return Eigen::VectorXd(scale * x.array().sin());
    };
    F.L = scale;
    spot_check_field(F, 1, seed, false);

    const SemilinearResult res = solve_semilinear(s, f, F, cfg);
    const double r_bound =
        4.0 * s.N * s.N * F.L * f.sup_norm() / (s.nu * (s.nu - 2.0 * s.N * F.L)) + cfg.fp_tol;
    double dist = 0.0;
    for (std::size_t k = 0; k < res.phi.size(); ++k)
        dist = std::max(dist, (res.phi[k] - res.phi0[k]).norm());

    std::ostringstream csv;
    csv << "iteration,delta,ratio\n";
    char buf[40];
    for (std::size_t i = 0; i < res.deltas.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", res.deltas[i]);
        csv << (i + 1) << ',' << buf << ',';
        if (i > 0 && res.deltas[i - 1] > 0.0) {
            std::snprintf(buf, sizeof buf, "%.17g", res.deltas[i] / res.deltas[i - 1]);
            csv << buf;
        }
        csv << "\n";
    }

    Outputs out{strided(res.phi, st.integer("output.stride")), csv.str(), json{}, json{}};
    out.report = {{"alpha", res.alpha},
                  {"iterations", res.iterations},
                  {"r_bound", r_bound},
                  {"dist_phi_phi0", dist},
                  {"boundary_norm", (s.P_minus * res.phi[0]).norm()},
                  {"N", s.N},
                  {"nu", s.nu}};
    out.telemetry = {{"experiment", "semilinear_scalar"},
                     {"h", cfg.h},
                     {"T", cfg.T},
                     {"trusted_until", res.phi.t_end()},
                     {"iterations", res.iterations}};
    return out;
}

// custom: operator / forcing / field assembled from config keys
Outputs run_custom(const Settings& st, unsigned seed) {
    const SolveConfig cfg = solve_config_from(st);

    OperatorSpec op;
    const std::string okind = st.str("operator.kind");
    if (okind == "dense_matrix") {
        const std::string path = st.str("operator.matrix_csv");
        if (path.empty()) throw ConfigError("operator.matrix_csv required for dense_matrix");
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open operator matrix CSV '" + path + "'");
        std::vector<std::vector<double>> rows;
        std::string line;
        while (std::getline(in, line)) {
            line = trim(line);
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string cell;
            std::vector<double> row;
            while (std::getline(ss, cell, ',')) {
                try {
                    row.push_back(std::stod(cell));
                } catch (const std::exception&) {
                    throw ConfigError("bad matrix entry '" + cell + "' in " + path);
                }
            }
            rows.push_back(row);
        }
        if (rows.empty()) throw ConfigError("operator matrix CSV is empty");
        Eigen::MatrixXd A(rows.size(), rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows.front().size())
                throw ConfigError("ragged operator matrix CSV");
            for (std::size_t j = 0; j < rows[i].size(); ++j)
                A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
        op = OperatorSpec::dense(A);
    } else if (okind == "dirichlet_laplacian_1d") {
        op = OperatorSpec::dirichlet_laplacian(st.integer("operator.points"));
    } else {
        throw ConfigError("operator.kind must be dense_matrix or dirichlet_laplacian_1d");
    }

    HyperbolicSplitting s =
        split(op, st.num("operator.gap_tolerance"), st.num("operator.nu_fraction"));
    const auto dim = s.dim();

    // eps sweep or single solve?
    std::vector<double> eps_list;
    if (!st.str("eps_list").empty()) eps_list = st.num_list("eps_list");

    // forcing signal on the slow grid (sweep) or the solve grid (single)
    const double h_slow = st.num("forcing.h");
    const double eps_min =
        eps_list.empty() ? 1.0 : *std::min_element(eps_list.begin(), eps_list.end());
    const double length = cfg.T / eps_min;
    const auto count = static_cast<std::size_t>(std::llround(length / h_slow)) + 2;

    Eigen::VectorXd profile = Eigen::VectorXd::Ones(dim);
    const std::string prof = st.str("forcing.profile");
    if (prof == "first_mode") {
        for (Eigen::Index j = 0; j < dim; ++j)
            profile(j) = std::sin(M_PI * static_cast<double>(j + 1) / static_cast<double>(dim + 1));
    } else if (prof != "ones") {
        throw ConfigError("forcing.profile must be ones or first_mode");
    }

    GridFunction f = [&]() -> GridFunction {
        const std::string kind = st.str("forcing.kind");
        const double amp = st.num("forcing.amplitude");
        if (kind == "sine") {
            const double w = st.num("forcing.omega");
            return GridFunction::sample(0.0, h_slow, count, [&](double t) {
                return Eigen::VectorXd(amp * std::sin(w * t) * profile);
            });
        }
        if (kind == "quasi_periodic") {
            const double w1 = st.num("forcing.omega"), w2 = st.num("forcing.omega2");
            return GridFunction::sample(0.0, h_slow, count, [&](double t) {
                return Eigen::VectorXd(amp * (std::sin(w1 * t) + std::sin(w2 * t)) * profile);
            });
        }
        if (kind == "decaying_mix") {
            return GridFunction::sample(0.0, h_slow, count, [&](double t) {
                return Eigen::VectorXd(amp * decaying_mix_signal(t) * profile);
            });
        }
        if (kind == "constant") {
            const std::vector<double> v = st.num_list("forcing.value");
            if (static_cast<Eigen::Index>(v.size()) != dim)
                throw ConfigError("forcing.value length must equal the operator dimension");
            Eigen::VectorXd c(dim);
            for (Eigen::Index j = 0; j < dim; ++j) c(j) = v[static_cast<std::size_t>(j)];
            return GridFunction::constant(0.0, h_slow, length + h_slow, c);
        }
        if (kind == "csv") {
            const std::string path = st.str("forcing.csv");
            if (path.empty()) throw ConfigError("forcing.csv path required");
            GridFunction g = GridFunction::read_csv(path);
            if (g.dim() != dim) throw ConfigError("forcing CSV dimension mismatch");
            return g;
        }
        throw ConfigError("forcing.kind must be sine, quasi_periodic, constant, decaying_mix or csv");
    }();

    std::optional<LipschitzField> field;
    const std::string fkind = st.str("field.kind");
    if (fkind != "none") {
        LipschitzField F;
        const double scale = st.num("field.scale");
        const std::string mod = st.str("field.modulation");
        if (mod != "none" && mod != "decaying_mix")
            throw ConfigError("field.modulation must be none or decaying_mix");
        const bool modulated = mod == "decaying_mix";
        if (fkind == "sin_scaled") {
            F.eval = [scale, modulated](double t, const Eigen::VectorXd& x) {
                const double g = modulated ? decaying_mix_signal(t) : 1.0;
                return Eigen::VectorXd(scale * g * x.array().sin());
            };
            F.L = scale;
            if (modulated) {
                const auto d = dim;
                F.averaged = [d](const Eigen::VectorXd&) {
                    return Eigen::VectorXd(Eigen::VectorXd::Zero(d));
                };
            } else {
                F.averaged = [scale](const Eigen::VectorXd& x) {
                    return Eigen::VectorXd(scale * x.array().sin());
                };
            }
        } else if (fkind == "cubic") {
            const double radius = st.num("field.trunc_radius");
            F.eval = [scale, radius](double, const Eigen::VectorXd& x) {
                Eigen::VectorXd c = x.cwiseMax(-radius).cwiseMin(radius);
                return Eigen::VectorXd(-scale * c.array().cube());
            };
            F.L = scale * 3.0 * radius * radius;
            F.averaged = [scale, radius](const Eigen::VectorXd& x) {
                Eigen::VectorXd c = x.cwiseMax(-radius).cwiseMin(radius);
                return Eigen::VectorXd(-scale * c.array().cube());
            };
        } else {
            throw ConfigError("field.kind must be none, sin_scaled or cubic");
        }
        spot_check_field(F, dim, seed, !eps_list.empty());
        field = F;
    }

    if (!eps_list.empty()) {
        AveragingProblem p;
        p.op = op;
        p.f = f;
        p.F = field;
        const AverageProfile prof_avg = time_average(f, st.num_list("sweep.windows"));
        p.f_bar = prof_avg.mean;
        p.omega = prof_avg;
        const AveragingReport rep = averaging_sweep(p, eps_list, cfg, st.num("sweep.t_min"));
        const GridFunction psi = detail::solve_rescaled_with(p, s, eps_list.back(), cfg);
        Outputs out{strided(psi, st.integer("output.stride")), sweep_csv(rep),
                    report_json_from_sweep(rep), json{}};
        out.telemetry = {{"experiment", "custom"},
                         {"mode", "sweep"},
                         {"dim", dim},
                         {"gap", s.gap},
                         {"N", s.N},
                         {"nu", s.nu}};
        return out;
    }

    // single solve on [0, T]
    const GridFunction f_run = f.restrict_to(0.0, cfg.T);
    std::vector<std::pair<std::string, double>> rows;
    GridFunction phi;
    if (field) {
        SolveConfig c2 = cfg;
        c2.h = f_run.h();
        const SemilinearResult res = solve_semilinear(s, f_run, *field, c2);
        phi = res.phi;
        rows.emplace_back("iterations", res.iterations);
        rows.emplace_back("alpha", res.alpha);
        const LipschitzField* fp = &*field;
        rows.emplace_back("ode_residual", ode_residual(s, f_run, fp, phi));
    } else {
        SolveConfig c2 = cfg;
        c2.h = f_run.h();
        phi = green_apply_semiaxis(s, f_run, c2);
        rows.emplace_back("ode_residual", ode_residual(s, f_run, nullptr, phi));
    }
    rows.emplace_back("boundary_norm", (s.P_minus * phi[0]).norm());
    rows.emplace_back("solution_sup", phi.sup_norm());
    rows.emplace_back("gap", s.gap);
    rows.emplace_back("N", s.N);
    rows.emplace_back("nu", s.nu);

    Outputs out{strided(phi, st.integer("output.stride")), metrics_csv(rows), json{}, json{}};
    for (const auto& [k, v] : rows) out.report[k] = v;
    out.telemetry = {{"experiment", "custom"}, {"mode", "single"}, {"dim", dim}};
    return out;
}

// ---------------------------------------------------------------------------

int run_command(const std::string& config_arg, const std::string& output_dir_flag,
                std::optional<unsigned> seed_flag) {
    KvMap overrides;
    std::string name;
    if (const Experiment* e = find_experiment(config_arg); e && !std::filesystem::exists(config_arg)) {
        name = e->name;
    } else {
        if (!std::filesystem::exists(config_arg))
            throw ConfigError("'" + config_arg +
                              "' is neither a built-in experiment nor a config file; see 'greenop list'");
        overrides = parse_config_file(config_arg);
        const auto it = overrides.find("experiment");
        if (it == overrides.end()) throw ConfigError("config must set 'experiment'");
        name = it->second;
    }
    const Experiment* exp = find_experiment(name);
    if (!exp) throw ConfigError("unknown experiment '" + name + "'");

    KvMap merged = exp->defaults;
    for (const auto& [k, v] : overrides) {
        if (!merged.count(k)) throw ConfigError("unknown key '" + k + "' for experiment " + name);
        merged[k] = v;
    }
    Settings st(merged);
    const unsigned seed = seed_flag ? *seed_flag : static_cast<unsigned>(st.integer("seed"));
    const std::string out_dir = output_dir_flag.empty() ? st.str("output_dir") : output_dir_flag;
    if (out_dir.empty()) throw ConfigError("output_dir must not be empty");

    const auto start = std::chrono::steady_clock::now();
    Outputs out = [&] {
        if (name == "diag2") return run_diag2(st, seed);
        if (name == "scalar_lin_avg") return run_scalar_lin_avg(st, seed);
        if (name == "excub") return run_excub(st, seed);
        if (name == "heat31") return run_heat31(st, seed);
        if (name == "semilinear_scalar") return run_semilinear_scalar(st, seed);
        return run_custom(st, seed);
    }();
    const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    out.telemetry["wall_ms"] = wall_ms;
    out.telemetry["seed"] = seed;

    std::filesystem::create_directories(out_dir);
    out.solution.write_csv(out_dir + "/solution.csv");
    {
        std::ofstream rc(out_dir + "/report.csv");
        if (!rc) throw ConfigError("cannot write " + out_dir + "/report.csv");
        rc << out.report_csv;
    }
    {
        std::ofstream rj(out_dir + "/report.json");
        rj << out.report.dump(2) << "\n";
    }
    {
        std::ofstream tj(out_dir + "/telemetry.json");
        tj << out.telemetry.dump(2) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"greenop: bounded solutions of hyperbolic evolution equations,"
                 " contraction solves, and averaging experiments"};
    app.require_subcommand(1);

    auto* list_cmd = app.add_subcommand("list", "list built-in experiments");

    std::string config_arg, output_dir_flag;
    unsigned seed_value = 0;
    auto* run_cmd = app.add_subcommand("run", "run an experiment from a config file or by name");
    run_cmd->add_option("config", config_arg, "config file path or experiment name")->required();
    run_cmd->add_option("--output-dir", output_dir_flag, "override the output directory");
    auto* seed_opt = run_cmd->add_option("--seed", seed_value, "seed for randomized validation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (list_cmd->parsed()) {
            // the five named benchmarks; `custom` is config-only (see README)
            for (const auto& e : registry())
                if (e.name != "custom") std::printf("%-18s %s\n", e.name.c_str(), e.blurb.c_str());
            return 0;
        }
        std::optional<unsigned> seed_flag;
        if (seed_opt->count() > 0) seed_flag = seed_value;
        return run_command(config_arg, output_dir_flag, seed_flag);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        static const std::set<std::string> validation{"NonCommensurateShift", "EmptyOverlap",
                                                      "GridMismatch",         "WindowTooLong",
                                                      "OmegaTableTooCoarse",  "DomainTooShort"};
        std::fprintf(stderr, "error: %s\n", e.what());
        return validation.count(e.code()) ? 2 : 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
