// Acceptance suite: one line per criterion, PASS/FAIL, with the pinned
// tolerances baked in. Returns the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>
#include <unsupported/Eigen/MatrixFunctions>

#include "greenop/averaging.hpp"
#include "greenop/bebutov.hpp"
#include "greenop/green_solver.hpp"
#include "greenop/spectral.hpp"
#include "greenop/time_average.hpp"

using namespace greenop;

namespace {

struct Verdict {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

Eigen::MatrixXd random_hyperbolic6(std::mt19937& rng) {
    std::uniform_real_distribution<double> mag(0.5, 3.0), entry(-1.0, 1.0);
    std::uniform_int_distribution<int> coin(0, 1);
    Eigen::VectorXd lambda(6);
    for (int i = 0; i < 6; ++i) lambda(i) = (coin(rng) ? 1.0 : -1.0) * mag(rng);
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) S(i, j) += 0.4 * entry(rng);
    return S * lambda.asDiagonal() * S.inverse();
}

double two_norm(const Eigen::MatrixXd& M) { return M.jacobiSvd().singularValues()(0); }

double sup_diff_overlap(const GridFunction& a, const GridFunction& b) {
    const double lo = std::max(a.t0(), b.t0());
    const double hi = std::min(a.t_end(), b.t_end());
    const auto ra = a.restrict_to(lo, hi);
    const auto rb = b.restrict_to(lo, hi);
    double m = 0.0;
    for (std::size_t k = 0; k < std::min(ra.size(), rb.size()); ++k)
        m = std::max(m, (ra[k] - rb[k]).norm());
    return m;
}

// --------------------------------------------------------------- criterion 1
Verdict projector_algebra() {
    Verdict v;
    std::mt19937 rng(1001);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(6, 6);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::MatrixXd A = random_hyperbolic6(rng);
        const auto s = split(OperatorSpec::dense(A));
        v.require((s.P_minus * s.P_minus - s.P_minus).norm() <= 1e-9, "P^2 != P");
        v.require((s.P_minus * s.P_plus).norm() <= 1e-9, "P- P+ != 0");
        v.require((s.P_minus + s.P_plus - I).norm() <= 1e-9, "P- + P+ != I");
        v.require((A * s.P_minus - s.P_minus * A).norm() <= 1e-9, "A does not commute with P-");
    }
    return v;
}

// --------------------------------------------------------------- criterion 2
Verdict green_bounds() {
    Verdict v;
    std::mt19937 rng(1001);  // the same 50 matrices as criterion 1
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::MatrixXd A = random_hyperbolic6(rng);
        const auto s = split(OperatorSpec::dense(A));
        const double L = 20.0 / s.nu;
        const int half = 1000;
        const double dt = L / half;

        double quad_left = 0.0, quad_right = 0.0;
        double prev_l = 0.0, prev_r = 0.0;
        for (int k = -half; k <= half; ++k) {
            const double t = k * dt;
            const double g = two_norm(s.green(t));
            v.require(g <= s.N * std::exp(-s.nu * std::abs(t)) * (1.0 + 1e-9),
                      "kernel bound N e^{-nu|t|} violated");
            // trapezoid on each side of the jump at t = 0
            if (k < 0) {
                if (k > -half) quad_left += 0.5 * (prev_l + g) * dt;
                prev_l = g;
            } else if (k == 0) {
                quad_left += 0.5 * (prev_l + two_norm(-s.unstable_exp(0.0))) * dt;
                prev_r = g;
            } else {
                quad_right += 0.5 * (prev_r + g) * dt;
                prev_r = g;
            }
        }
        v.require(quad_left + quad_right <= 2.0 * s.N / s.nu + 1e-6,
                  "integral of ||G|| above 2N/nu");
    }
    return v;
}

// --------------------------------------------------------------- criterion 3
Verdict closed_form_solve() {
    Verdict v;
    Eigen::MatrixXd A(2, 2);
    A << -1, 0, 0, 2;
    const auto s = split(OperatorSpec::dense(A));
    SolveConfig cfg;
    cfg.h = 1e-3;
    cfg.T = 30.0;
    const auto f = GridFunction::constant(0.0, cfg.h, cfg.T, Eigen::VectorXd::Ones(2));
    const auto phi = green_apply_semiaxis(s, f, cfg);
    double err = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
        const Eigen::Vector2d exact(1.0 - std::exp(-phi.time_at(k)), -0.5);
        err = std::max(err, (phi[k] - exact).norm());
    }
    v.require(err <= 1e-6, "closed-form error " + fmt_num(err));
    v.require((s.P_minus * phi[0]).norm() <= 1e-8, "P- phi(0) != 0");
    return v;
}

// --------------------------------------------------------------- criterion 4
Verdict semilinear_contraction() {
    Verdict v;
    const auto s = split(OperatorSpec::dense(-Eigen::MatrixXd::Identity(1, 1)));
    SolveConfig cfg;
    cfg.h = 1e-3;
    cfg.T = 30.0;
    const auto f = GridFunction::constant(0.0, cfg.h, cfg.T, Eigen::VectorXd::Ones(1));
    LipschitzField F;
    F.eval = [](double, const Eigen::VectorXd& x) { return Eigen::VectorXd(0.1 * x.array().sin()); };
    F.L = 0.1;
    const auto res = solve_semilinear(s, f, F, cfg);
    const double alpha = 2.0 * s.N * F.L / s.nu;
    for (std::size_t i = 1; i < res.deltas.size(); ++i)
        if (res.deltas[i - 1] > 0.0)
            v.require(res.deltas[i] / res.deltas[i - 1] <= alpha + 0.05, "contraction ratio too big");
    const double r = 4.0 * s.N * s.N * F.L * f.sup_norm() / (s.nu * (s.nu - 2.0 * s.N * F.L));
    v.require(sup_diff_overlap(res.phi, res.phi0) <= r + 1e-6, "fixed point outside radius bound");
    const auto seeded = GridFunction::constant(0.0, cfg.h, cfg.T, Eigen::VectorXd::Constant(1, 5.0));
    const auto res2 = solve_semilinear(s, f, F, cfg, &seeded);
    v.require(sup_diff_overlap(res.phi, res2.phi) <= 2.0 * cfg.fp_tol,
              "fixed point depends on the initial guess");
    return v;
}

// --------------------------------------------------------------- criterion 5
Verdict cubic_branches() {
    Verdict v;
    const auto s = split(OperatorSpec::dense(Eigen::MatrixXd::Identity(1, 1)));
    SolveConfig cfg;
    cfg.h = 1e-4;
    cfg.T = 20.0;
    for (const double eps : {0.5, 1.0}) {
        const auto count = static_cast<std::size_t>(std::llround(19.9 / cfg.h)) + 1;
        const auto zero_f = GridFunction::constant(0.1, cfg.h, 19.9, Eigen::VectorXd::Zero(1));
        LipschitzField cubic;
        cubic.eval = [eps](double, const Eigen::VectorXd& x) {
            return Eigen::VectorXd(-eps * x.array().cube());
        };
        cubic.L = 0.0;  // residual evaluation only
        for (const double sgn : {0.0, 1.0, -1.0}) {
            const auto branch = GridFunction::sample_scalar(0.1, cfg.h, count, [&](double t) {
                return sgn / std::sqrt(eps * (1.0 - std::exp(-2.0 * t)));
            });
            const double r = ode_residual(s, zero_f, &cubic, branch);
            v.require(r <= 1e-6, "branch residual " + fmt_num(r) + " at eps " + fmt_num(eps));
        }
        // truncated cubic is globally Lipschitz; the contraction picks 0
        const double R = 0.35;
        LipschitzField trunc;
        trunc.eval = [eps, R](double, const Eigen::VectorXd& x) {
            Eigen::VectorXd c = x.cwiseMax(-R).cwiseMin(R);
            return Eigen::VectorXd(-eps * c.array().cube());
        };
        trunc.L = eps * 3.0 * R * R;
        const auto f0 = GridFunction::constant(0.0, cfg.h, cfg.T, Eigen::VectorXd::Zero(1));
        const auto res = solve_semilinear(s, f0, trunc, cfg);
        v.require(res.phi.sup_norm() <= 1e-8, "solver missed the zero branch");
    }
    return v;
}

// --------------------------------------------------------------- criterion 6
Verdict linear_averaging() {
    Verdict v;
    AveragingProblem p;
    p.op = OperatorSpec::dense(-Eigen::MatrixXd::Identity(1, 1));
    p.f = GridFunction::sample_scalar(0.0, 0.01, 140002, [](double t) { return std::sin(t); });
    p.f_bar = Eigen::VectorXd::Zero(1);
    p.omega = time_average(p.f, {1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0});
    SolveConfig cfg;
    cfg.h = 0.01;
    cfg.T = 35.0;
    const auto rep = averaging_sweep(p, {0.2, 0.1, 0.05, 0.025}, cfg);
    for (const auto& row : rep.rows) {
        const double amp = row.eps / std::sqrt(1.0 + row.eps * row.eps);
        v.require(std::abs(row.sup_dev - amp) <= 0.05 * amp,
                  "sup_dev off oracle at eps " + fmt_num(row.eps));
    }
    v.require(std::abs(rep.slope - 1.0) <= 0.15, "log-log slope " + fmt_num(rep.slope));
    return v;
}

// --------------------------------------------------------------- criterion 7
Verdict semilinear_averaging() {
    Verdict v;
    const int points = 31;
    Eigen::VectorXd profile(points);
    for (int j = 0; j < points; ++j) profile(j) = std::sin(M_PI * (j + 1.0) / (points + 1.0));
    const auto g = [](double t) {
        return (std::sin(t) + std::cos(std::sqrt(2.0) * t) + std::exp(-t)) / 3.0;
    };

    AveragingProblem p;
    p.op = OperatorSpec::dirichlet_laplacian(points);
    p.f = GridFunction::sample(0.0, 0.01, 32002, [&](double t) {
        return Eigen::VectorXd(g(t) * profile);
    });
    p.f_bar = Eigen::VectorXd::Zero(points);
    p.omega = time_average(p.f, {1.0, 2.0, 5.0, 10.0, 20.0, 50.0});
    LipschitzField F;
    F.eval = [g](double t, const Eigen::VectorXd& x) {
        return Eigen::VectorXd(g(t) * x.array().sin());
    };
    F.L = 1.0;
    F.averaged = [points](const Eigen::VectorXd&) {
        return Eigen::VectorXd(Eigen::VectorXd::Zero(points));
    };
    p.F = F;

    SolveConfig cfg;
    cfg.h = 0.01;
    cfg.T = 8.0;
    const auto rep = averaging_sweep(p, {0.2, 0.1, 0.05, 0.025}, cfg);
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        if (i > 0)
            v.require(rep.rows[i].sup_dev < rep.rows[i - 1].sup_dev, "sup_dev not decreasing");
        v.require(rep.rows[i].bound.has_value(), "bound column missing");
        if (rep.rows[i].bound)
            v.require(*rep.rows[i].bound >= rep.rows[i].sup_dev, "bound below sup_dev");
    }
    v.require(rep.rows.back().sup_dev < rep.rows.front().sup_dev / 3.0,
              "final sup_dev not below a third of the initial one");
    return v;
}

// --------------------------------------------------------------- criterion 8
Verdict oscillation_diagnostics() {
    Verdict v;
    AverageProfile omega;
    omega.mean = Eigen::VectorXd::Zero(1);
    for (double T : {0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0})
        omega.omega.emplace_back(T, 2.0 / T);
    const double nu = 0.9;
    BoundTerms prev{};
    bool first = true;
    for (const double eps : {0.1, 0.05, 0.025, 0.0125}) {
        const auto b = bound_terms(omega, 1.0, nu, eps);
        if (!first) {
            v.require(b.t_term < prev.t_term, "t_term not decreasing");
            v.require(b.int_term < prev.int_term, "int_term not decreasing");
            v.require(b.tail_term < prev.tail_term, "tail_term not decreasing");
        }
        v.require(empirical_oscillation_sup(omega, nu, eps) <= b.t_term * (1.0 + 1e-12),
                  "empirical oscillation sup above the bound at eps " + fmt_num(eps));
        prev = b;
        first = false;
    }
    return v;
}

// --------------------------------------------------------------- criterion 9
Verdict almost_period_inheritance() {
    Verdict v;
    const double h = 0.01;
    const auto f = GridFunction::sample_scalar(-470.0, h, 94001, [](double t) {
        return std::sin(t) + std::sin(std::sqrt(2.0) * t);
    });
    const double eps = 0.05;
    const auto taus = almost_periods(f, eps, 445.0);
    v.require(!taus.empty(), "no almost periods detected");
    bool long_one = false;
    for (const double tau : taus)
        if (tau > 100.0) long_one = true;
    v.require(long_one, "no nontrivial almost period found");

    const auto s = split(OperatorSpec::dense(-Eigen::MatrixXd::Identity(1, 1)));
    SolveConfig cfg;
    cfg.h = h;
    cfg.T = 470.0;
    const auto phi = green_apply_axis(s, f, cfg);
    const double inherited = 2.0 * s.N / s.nu * eps + 2.0 * cfg.tail_tol;
    for (const double tau : taus) {
        const auto shifted = translate(phi, tau);
        const double dev = sup_diff_overlap(shifted, phi.restrict_to(shifted.t0(), shifted.t_end()));
        v.require(dev <= inherited,
                  "tau " + fmt_num(tau) + " inherited deviation " + fmt_num(dev));
    }
    return v;
}

// -------------------------------------------------------------- criterion 10
Verdict bebutov_metric() {
    Verdict v;
    const auto f = GridFunction::sample_scalar(-30.0, 1e-4, 600001, [](double t) { return std::sin(t); });
    const auto z = GridFunction::constant(-30.0, 1e-4, 60.0, Eigen::VectorXd::Zero(1));
    const double d = bebutov_distance(f, z);

    // independent oracle: bisect sin(1/eps) = eps on the analytic formula
    double a = 0.6, b = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (a + b);
        (std::sin(1.0 / mid) - mid > 0.0 ? a : b) = mid;
    }
    v.require(std::abs(d - 0.5 * (a + b)) <= 1e-3, "sin-vs-0 distance " + fmt_num(d));

    // fixed-point residual of the defining equation
    const double w = 1.0 / d;
    double wm = 0.0;
    const auto lo = f.index_of(std::ceil(-w / 1e-4) * 1e-4);
    const auto hi = f.index_of(std::floor(w / 1e-4) * 1e-4);
    for (auto k = lo; k <= hi; ++k) wm = std::max(wm, std::abs(f[k](0)));
    wm = std::max({wm, std::abs(f.value_at(-w)(0)), std::abs(f.value_at(w)(0))});
    v.require(std::abs(wm - d) <= 1e-10, "fixed-point residual " + fmt_num(std::abs(wm - d)));

    // metric axioms on random sampled triples
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> amp(-1.5, 1.5), freq(0.3, 3.0);
    const auto mk = [&]() {
        const double a1 = amp(rng), a2 = amp(rng), w1 = freq(rng), w2 = freq(rng), c = amp(rng);
        return GridFunction::sample_scalar(-40.0, 0.02, 4001, [=](double t) {
            return a1 * std::sin(w1 * t) + a2 * std::cos(w2 * t) + c;
        });
    };
    for (int trial = 0; trial < 100; ++trial) {
        const auto x = mk(), y = mk(), u = mk();
        const double dxy = bebutov_distance(x, y);
        const double dyx = bebutov_distance(y, x);
        const double dxu = bebutov_distance(x, u);
        const double dyu = bebutov_distance(y, u);
        v.require(dxy == dyx, "symmetry violated");
        v.require(bebutov_distance(x, x) == 0.0, "d(f,f) != 0");
        v.require(dxu <= dxy + dyu + 1e-9, "triangle inequality violated");
    }
    return v;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* label;
        double budget_s;
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "projector algebra on 50 random hyperbolic matrices", 5.0, projector_algebra},
        {2, "kernel decay bound and 2N/nu integral bound", 30.0, green_bounds},
        {3, "closed-form linear solve diag(-1,2)", 2.0, closed_form_solve},
        {4, "semi-linear contraction rates and radius", 5.0, semilinear_contraction},
        {5, "cubic branch residuals and zero-branch solve", 5.0, cubic_branches},
        {6, "linear averaging sweep against the response oracle", 30.0, linear_averaging},
        {7, "semi-linear averaging on the 31-point laplacian", 180.0, semilinear_averaging},
        {8, "oscillation bound terms decrease and dominate", 5.0, oscillation_diagnostics},
        {9, "almost-period inheritance through the solve", 30.0, almost_period_inheritance},
        {10, "compact-open metric: oracle, residual, axioms", 5.0, bebutov_metric},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v.ok = false;
            v.detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs >= c.budget_s && v.ok) {
            v.ok = false;
            v.detail = "over the " + fmt_num(c.budget_s) + " s budget";
        }
        std::printf("%s  criterion %2d: %s (%.2f s)%s%s\n", v.ok ? "PASS" : "FAIL", c.id, c.label,
                    secs, v.ok ? "" : " -- ", v.ok ? "" : v.detail.c_str());
        if (!v.ok) ++failures;
    }
    return failures;
}
