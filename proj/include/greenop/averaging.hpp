#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "greenop/green_solver.hpp"
#include "greenop/time_average.hpp"

namespace greenop {

/// A slow-time problem x' = eps (A x + f(t) + F(t, x)) posed for an eps-sweep
/// in fast time: x' = A x + f(t/eps) + F(t/eps, x). The averages f_bar (and
/// F.averaged) may be declared analytically or measured via time_average.
struct AveragingProblem {
    OperatorSpec op;
    GridFunction f;                    // slow-time forcing on a long horizon
    std::optional<LipschitzField> F;   // slow-time nonlinearity
    Eigen::VectorXd f_bar;
    AverageProfile omega;              // oscillation table of f - f_bar
    std::function<double(double)> L_of_eps;  // optional eps-dependent Lipschitz constant
};

struct SweepRow {
    double eps = 0.0;
    double sup_dev = 0.0;        // sup_{t >= t_min} |psi_eps(t) - psi_bar|
    double sup_dev_full = 0.0;   // sup over the whole trusted window
    std::optional<double> bound; // nu (J1 + J2) / (nu - 2NL) when computable
    std::optional<double> slope_cumulative;  // log-log slope over rows up to here
    int iterations = 0;
    double alpha = 0.0;
};

struct AveragingReport {
    Eigen::VectorXd psi_bar;
    std::vector<SweepRow> rows;  // sorted by decreasing eps
    double slope = 0.0;          // least-squares slope of log sup_dev vs log eps
    double t_min = 0.0;
    double N = 0.0;
    double nu = 0.0;

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw NumericalFailure("cannot open '" + path + "' for writing");
        out << "eps,sup_dev,bound,slope_cumulative\n";
        char buf[40];
        const auto put = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf;
        };
        for (const auto& r : rows) {
            put(r.eps);
            out << ',';
            put(r.sup_dev);
            out << ',';
            if (r.bound) put(*r.bound);
            out << ',';
            if (r.slope_cumulative) put(*r.slope_cumulative);
            out << "\n";
        }
    }
};

/// g(t) = f(t / eps) on [0, T_fast]. Fast samples that land on the slow grid
/// are copied exactly; others are linearly interpolated. The default fast step
/// min(f.h, eps * f.h) keeps every slow sample reachable exactly and resolves
/// an oscillation of period ~eps with the same point density as f resolves
/// period ~1.
inline GridFunction rescale_forcing(const GridFunction& f, double eps, double T_fast,
                                    double h_fast = -1.0) {
    if (!(eps > 0.0)) throw DomainTooShort("eps must be positive");
    if (h_fast <= 0.0) h_fast = std::min(f.h(), eps * f.h());
    if (f.t0() > 1e-9) throw DomainTooShort("slow forcing must start at t = 0");
    if (T_fast / eps > f.t_end() + 1e-9)
        throw DomainTooShort("slow forcing does not cover [0, T_fast/eps]");

    const auto count = static_cast<std::size_t>(std::llround(T_fast / h_fast)) + 1;
    std::vector<Eigen::VectorXd> vals;
    vals.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double t_slow = static_cast<double>(k) * h_fast / eps;
        const double x = (t_slow - f.t0()) / f.h();
        const auto j = std::llround(x);
        if (j >= 0 && j < static_cast<long long>(f.size()) &&
            std::abs(x - static_cast<double>(j)) < 1e-9)
            vals.push_back(f[static_cast<std::size_t>(j)]);
        else
            vals.push_back(f.value_at(std::min(t_slow, f.t_end())));
    }
    return GridFunction(0.0, h_fast, std::move(vals));
}

/// Equilibrium of the averaged equation: x = -A^{-1}(f_bar + F_bar(x)).
/// Linear when F_bar is absent; otherwise fixed-point iteration, failing with
/// StationaryContractionViolated when the iteration does not contract.
inline Eigen::VectorXd stationary_solution(
    const HyperbolicSplitting& s, const Eigen::VectorXd& f_bar,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& F_bar = nullptr) {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(s.A);
    Eigen::VectorXd x = lu.solve(-f_bar);
    if (F_bar) {
        double prev_delta = std::numeric_limits<double>::infinity();
        int growing = 0;
        bool converged = false;
        for (int it = 0; it < 500; ++it) {
            const Eigen::VectorXd next = lu.solve(-(f_bar + F_bar(x)));
            const double delta = (next - x).norm();
            x = next;
            if (delta <= 1e-13 * std::max(1.0, x.norm())) {
                converged = true;
                break;
            }
            growing = delta >= prev_delta ? growing + 1 : 0;
            if (growing >= 3)
                throw StationaryContractionViolated(
                    "averaged fixed-point iteration is not contracting");
            prev_delta = delta;
        }
        if (!converged)
            throw StationaryContractionViolated(
                "averaged fixed-point iteration did not converge");
        const double resid = (s.A * x + f_bar + F_bar(x)).norm();
        if (resid > 1e-10)
            throw NumericalFailure("averaged equilibrium residual " + fmt_num(resid));
    }
    return x;
}

namespace detail {

inline LipschitzField rescale_field(const LipschitzField& F, double eps, double L_row) {
    LipschitzField out;
    out.eval = [fe = F.eval, eps](double t, const Eigen::VectorXd& x) { return fe(t / eps, x); };
    out.L = L_row;
    out.averaged = F.averaged;
    return out;
}

inline GridFunction solve_rescaled_with(const AveragingProblem& p, const HyperbolicSplitting& s,
                                        double eps, const SolveConfig& cfg,
                                        SemilinearResult* info = nullptr) {
    const double h_fast = std::min(cfg.h, eps * p.f.h());
    const GridFunction g = rescale_forcing(p.f, eps, cfg.T, h_fast);
    SolveConfig fast_cfg = cfg;
    fast_cfg.h = h_fast;
    if (!p.F) {
        if (info) *info = SemilinearResult{};
        return green_apply_semiaxis(s, g, fast_cfg);
    }
    const double L_row = p.L_of_eps ? p.L_of_eps(eps) : p.F->L;
    auto res = solve_semilinear(s, g, rescale_field(*p.F, eps, L_row), fast_cfg);
    GridFunction phi = res.phi;
    if (info) *info = std::move(res);
    return phi;
}

}  // namespace detail

/// psi_eps: the bounded solution of x' = A x + f(t/eps) + F(t/eps, x) with
/// P_minus psi(0) = 0, discretized on a fast grid that resolves the
/// oscillation.
inline GridFunction solve_rescaled(const AveragingProblem& p, double eps, const SolveConfig& cfg) {
    HyperbolicSplitting s = split(p.op);
    return detail::solve_rescaled_with(p, s, eps, cfg);
}

/// The three vanishing upper bounds on sup_t e^{-nu t} t omega(t/eps) obtained
/// by splitting the time axis at xi = eps^(1/mu) (mu > 1): for t <= xi the
/// integrand is at most omega(0) t; for t >= xi the oscillation argument is at
/// least eps^(1/mu - 1) -> infinity. The three expressions bound the sup
/// itself, its nu-exponential integral, and the tail integral beyond xi; each
/// tends to 0 with eps. omega(0) is capped at the smallest tabulated window.
struct BoundTerms {
    double t_term = 0.0;
    double int_term = 0.0;
    double tail_term = 0.0;
};

inline BoundTerms bound_terms(const AverageProfile& omega, double /*N*/, double nu, double eps,
                              double mu = 2.0) {
    if (!(mu > 1.0)) throw GridMismatch("mu must exceed 1");
    if (!(eps > 0.0) || !(nu > 0.0)) throw GridMismatch("eps and nu must be positive");
    const double xi = std::pow(eps, 1.0 / mu);
    const double arg = std::pow(eps, 1.0 / mu - 1.0);
    const double w0 = omega.omega_at(0.0);   // capped at the smallest window
    const double warg = omega.omega_at(arg); // throws OmegaTableTooCoarse beyond the table
    const double decay = std::exp(-nu * xi);
    const double lin = xi + 1.0 / nu;

    BoundTerms b;
    b.t_term = w0 * xi + warg * std::max(1.0, 1.0 / (nu * std::exp(1.0)));
    b.int_term = (w0 / nu) * (1.0 / nu - decay * lin) + warg * (decay / nu) * lin;
    b.tail_term = w0 * (1.0 / (nu * nu) - decay * lin / nu) +
                  warg * (std::exp(nu * xi) / nu) * lin;
    return b;
}

/// Empirical sup_{t in [0, t_max]} e^{-nu t} t omega(t/eps) with omega read
/// from the table (clamped beyond it); the quantity the bound_terms t_term
/// dominates.
inline double empirical_oscillation_sup(const AverageProfile& omega, double nu, double eps,
                                        double t_max = -1.0, int samples = 20000) {
    if (t_max <= 0.0) t_max = 20.0 / nu;
    double sup = 0.0;
    for (int k = 0; k <= samples; ++k) {
        const double t = t_max * static_cast<double>(k) / static_cast<double>(samples);
        const double w = omega.omega_at(t > 0.0 ? t / eps : 0.0, /*clamp_above=*/true);
        sup = std::max(sup, std::exp(-nu * t) * t * w);
    }
    return sup;
}

/// eps-sweep of the averaging principle: solves the rescaled problem for each
/// eps, measures sup_{t >= t_min} |psi_eps - psi_bar|, fills the theoretical
/// bound column nu (J1 + J2)/(nu - 2NL) where the boundary compatibility
/// P_minus psi_bar = 0 makes it applicable, and fits the log-log slope.
/// Rows run concurrently.
inline AveragingReport averaging_sweep(const AveragingProblem& p,
                                       const std::vector<double>& eps_list,
                                       const SolveConfig& cfg, double t_min = -1.0) {
    if (eps_list.empty()) throw GridMismatch("eps_list must not be empty");
    for (std::size_t i = 0; i + 1 < eps_list.size(); ++i)
        if (eps_list[i + 1] >= eps_list[i])
            throw GridMismatch("eps_list must be strictly decreasing");
    if (eps_list.back() <= 0.0) throw GridMismatch("eps values must be positive");

    HyperbolicSplitting s = split(p.op);
    if (t_min < 0.0) t_min = 5.0 / s.nu;

    if (p.F) {
        // (G1): the nonlinearity must vanish on the zero function.
        const Eigen::VectorXd zero = Eigen::VectorXd::Zero(s.dim());
        for (double t : {0.0, 1.0, 3.14159, 10.0})
            if (p.F->eval(t, zero).norm() > 1e-12)
                throw GridMismatch("nonlinearity does not vanish at x = 0");
    }

    AveragingReport rep;
    rep.t_min = t_min;
    rep.N = s.N;
    rep.nu = s.nu;
    rep.psi_bar = stationary_solution(
        s, p.f_bar, p.F && p.F->averaged ? p.F->averaged
                                         : std::function<Eigen::VectorXd(const Eigen::VectorXd&)>());

    const bool boundary_compatible = (s.P_minus * rep.psi_bar).norm() <= 1e-9;

    const auto run_row = [&](double eps) {
        SweepRow row;
        row.eps = eps;
        SemilinearResult info;
        const GridFunction psi = detail::solve_rescaled_with(p, s, eps, cfg, &info);
        row.iterations = info.iterations;
        row.alpha = info.alpha;

        if (psi.t_end() < t_min - 1e-9)
            throw HorizonTooShort("trusted window ends before the burn-in t_min");
        for (std::size_t k = 0; k < psi.size(); ++k) {
            const double dev = (psi[k] - rep.psi_bar).norm();
            row.sup_dev_full = std::max(row.sup_dev_full, dev);
            if (psi.time_at(k) >= t_min - 1e-12) row.sup_dev = std::max(row.sup_dev, dev);
        }

        if (boundary_compatible && (!p.F || p.F->averaged)) {
            const double h_fast = std::min(cfg.h, eps * p.f.h());
            SolveConfig fast_cfg = cfg;
            fast_cfg.h = h_fast;
            const GridFunction g = rescale_forcing(p.f, eps, cfg.T, h_fast);
            const double L_row = p.F ? (p.L_of_eps ? p.L_of_eps(eps) : p.F->L) : 0.0;
            const double J1 =
                green_apply_semiaxis(s, g.shifted_by(-p.f_bar), fast_cfg).sup_norm();
            double J2 = 0.0;
            if (p.F) {
                const Eigen::VectorXd Fbar_psi = p.F->averaged(rep.psi_bar);
                const GridFunction g2 = GridFunction::sample(
                    0.0, h_fast, g.size(), [&](double t) -> Eigen::VectorXd {
                        return p.F->eval(t / eps, rep.psi_bar) - Fbar_psi;
                    });
                J2 = green_apply_semiaxis(s, g2, fast_cfg).sup_norm();
            }
            if (2.0 * s.N * L_row < s.nu)
                row.bound = s.nu * (J1 + J2) / (s.nu - 2.0 * s.N * L_row);
        }
        return row;
    };

    std::vector<std::future<SweepRow>> futures;
    futures.reserve(eps_list.size());
    for (double eps : eps_list)
        futures.push_back(std::async(std::launch::async, run_row, eps));
    for (auto& fut : futures) rep.rows.push_back(fut.get());

    // cumulative least-squares slope of log sup_dev against log eps
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t m = 0;
    for (auto& row : rep.rows) {
        if (row.sup_dev > 0.0) {
            const double x = std::log(row.eps), y = std::log(row.sup_dev);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++m;
        }
        if (m >= 2) {
            const double denom = static_cast<double>(m) * sxx - sx * sx;
            if (std::abs(denom) > 1e-30)
                row.slope_cumulative = (static_cast<double>(m) * sxy - sx * sy) / denom;
        }
        if (row.slope_cumulative) rep.slope = *row.slope_cumulative;
    }
    return rep;
}

}  // namespace greenop
