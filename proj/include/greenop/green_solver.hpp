#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "greenop/grid_function.hpp"
#include "greenop/spectral.hpp"

namespace greenop {

/// Discretization and iteration controls for the integral-operator solves.
struct SolveConfig {
    double h = 1e-3;        // quadrature step
    double T = 30.0;        // truncation horizon of the Green's integral
    double tail_tol = 1e-8; // admissible truncation error; fixes the output margin
    double fp_tol = 1e-9;   // fixed-point stopping tolerance (on the limit)
    int max_iter = 100;     // Banach iteration cap
    double t_eval = -1.0;   // required output horizon; < 0 means "as far as the tail allows"
};

/// A nonlinearity x' = Ax + f(t) + F(t, x) with a declared global Lipschitz
/// constant in x (Euclidean norm) and, optionally, its time average.
struct LipschitzField {
    std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> eval;
    double L = 0.0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> averaged;  // may be empty
};

namespace detail {

// Shared quadrature core. Works in the block-diagonalizing coordinates of the
// splitting: with g = Vinv f split into stable coordinates gs (top) and
// unstable gu (bottom),
//   phi(t) = V [ int_{t0}^t e^{B-(t-s)} gs(s) ds ; -int_t^{T} e^{B+(t-s)} gu(s) ds ],
// and both integrals satisfy one-step trapezoid recurrences that only ever
// exponentiate decaying blocks.
inline std::vector<Eigen::VectorXd> green_quadrature(const HyperbolicSplitting& s,
                                                     const std::vector<Eigen::VectorXd>& f,
                                                     double h) {
    const auto n = s.dim();
    const auto k = s.stable_dim;
    const auto m = f.size();

    const Eigen::MatrixXd Es = k > 0 ? Eigen::MatrixXd((s.B_minus * h).exp())
                                     : Eigen::MatrixXd::Zero(0, 0);
    const Eigen::MatrixXd Eu = k < n ? Eigen::MatrixXd((s.B_plus * (-h)).exp())
                                     : Eigen::MatrixXd::Zero(0, 0);

    std::vector<Eigen::VectorXd> gs(m), gu(m);
    for (std::size_t j = 0; j < m; ++j) {
        const Eigen::VectorXd g = s.Vinv * f[j];
        gs[j] = g.head(k);
        gu[j] = g.tail(n - k);
    }

    std::vector<Eigen::VectorXd> u(m, Eigen::VectorXd::Zero(k));
    for (std::size_t j = 0; j + 1 < m; ++j)
        u[j + 1] = Es * (u[j] + (0.5 * h) * gs[j]) + (0.5 * h) * gs[j + 1];

    std::vector<Eigen::VectorXd> w(m, Eigen::VectorXd::Zero(n - k));
    for (std::size_t j = m - 1; j-- > 0;)
        w[j] = (0.5 * h) * gu[j] + Eu * (w[j + 1] + (0.5 * h) * gu[j + 1]);

    std::vector<Eigen::VectorXd> phi(m);
    Eigen::VectorXd coords(n);
    for (std::size_t j = 0; j < m; ++j) {
        coords.head(k) = u[j];
        coords.tail(n - k) = -w[j];
        phi[j] = s.V * coords;
    }
    return phi;
}

// Distance from the domain ends inside which truncating the Green's integral
// at the horizon leaves an error above tail_tol: N e^{-nu m} |f| <= nu tail_tol.
inline double tail_margin(const HyperbolicSplitting& s, double f_sup, double tail_tol) {
    if (f_sup <= 0.0) return 0.0;
    const double m = std::log(s.N * f_sup / (s.nu * tail_tol)) / s.nu;
    return std::max(0.0, m);
}

struct FullSolve {
    GridFunction phi;   // on the full internal grid
    double margin = 0.0;
};

// phi = G f on the internal grid of f (no domain restriction yet).
inline FullSolve green_apply_full(const HyperbolicSplitting& s, const GridFunction& f,
                                  const SolveConfig& cfg) {
    if (f.dim() != s.dim())
        throw GridMismatch("forcing dimension does not match the operator");
    if (f.size() < 2) throw DomainTooShort("forcing must have at least two samples");
    if (f.t_end() + 1e-9 < cfg.T)
        throw DomainTooShort("forcing does not reach the truncation horizon T");

    const auto m = std::min<std::size_t>(
        f.size(), static_cast<std::size_t>(std::llround((cfg.T - f.t0()) / f.h())) + 1);
    std::vector<Eigen::VectorXd> vals(f.values().begin(), f.values().begin() + m);
    FullSolve out{GridFunction(f.t0(), f.h(), green_quadrature(s, vals, f.h())),
                  tail_margin(s, f.sup_norm(), cfg.tail_tol)};
    return out;
}

inline GridFunction restrict_semiaxis(const FullSolve& full, const SolveConfig& cfg) {
    const double hi = full.phi.t_end() - full.margin;
    if (cfg.t_eval >= 0.0 && hi + 1e-9 < cfg.t_eval)
        throw HorizonTooShort("trusted window ends at t = " + std::to_string(hi) +
                              ", before requested t_eval");
    if (hi < full.phi.t0() + full.phi.h())
        throw HorizonTooShort("truncation margin leaves no trusted output window");
    return full.phi.restrict_to(full.phi.t0(), hi);
}

inline GridFunction restrict_axis(const FullSolve& full, const SolveConfig& cfg) {
    const double lo = full.phi.t0() + full.margin;
    const double hi = full.phi.t_end() - full.margin;
    if (cfg.t_eval >= 0.0 && hi + 1e-9 < cfg.t_eval)
        throw HorizonTooShort("trusted window ends before requested t_eval");
    if (hi - lo < full.phi.h())
        throw HorizonTooShort("truncation margins leave no trusted output window");
    return full.phi.restrict_to(lo, hi);
}

}  // namespace detail

/// phi = G f for forcing sampled on [0, T']: the bounded solution of
/// x' = Ax + f with P_minus x(0) = 0, returned on [0, T' - margin] where the
/// truncation of the unstable tail integral is below tail_tol.
inline GridFunction green_apply_semiaxis(const HyperbolicSplitting& s, const GridFunction& f,
                                         const SolveConfig& cfg) {
    if (std::abs(f.t0()) > 1e-9)
        throw GridMismatch("semi-axis forcing must start at t = 0");
    return detail::restrict_semiaxis(detail::green_apply_full(s, f, cfg), cfg);
}

/// phi = G f for forcing sampled on [-T', T']: the bounded whole-line solution
/// of x' = Ax + f, returned with both truncation margins removed.
inline GridFunction green_apply_axis(const HyperbolicSplitting& s, const GridFunction& f,
                                     const SolveConfig& cfg) {
    if (f.t0() > -1e-9)
        throw GridMismatch("axis forcing must extend into negative time");
    return detail::restrict_axis(detail::green_apply_full(s, f, cfg), cfg);
}

struct SemilinearResult {
    GridFunction phi;           // bounded solution of x' = Ax + f + F(t, x)
    GridFunction phi0;          // linear part G f on the same window
    int iterations = 0;
    double alpha = 0.0;         // contraction factor 2 N L / nu
    std::vector<double> deltas; // sup-norm update sizes per iteration
};

/// Contraction iteration psi_{k+1} = G(F(., psi_k + phi0)) for the semi-linear
/// problem on the semi-axis. Requires alpha = 2 N L / nu < 1; stops when the
/// update is below fp_tol (1 - alpha) / alpha, which bounds the distance to
/// the limit by fp_tol. An optional initial iterate may be supplied on the
/// full internal grid (values interpolated where grids differ).
inline SemilinearResult solve_semilinear(const HyperbolicSplitting& s, const GridFunction& f,
                                         const LipschitzField& F, const SolveConfig& cfg,
                                         const GridFunction* psi_init = nullptr) {
    const double alpha = 2.0 * s.N * F.L / s.nu;
    if (alpha >= 1.0)
        throw ContractionViolated("2NL/nu = " + std::to_string(alpha) +
                                  "; Lipschitz constant exceeds nu/(2N)");
    if (std::abs(f.t0()) > 1e-9)
        throw GridMismatch("semi-axis forcing must start at t = 0");

    const auto full0 = detail::green_apply_full(s, f, cfg);
    const auto m = full0.phi.size();
    const double h = full0.phi.h();

    std::vector<Eigen::VectorXd> psi(m, Eigen::VectorXd::Zero(s.dim()));
    if (psi_init)
        for (std::size_t j = 0; j < m; ++j)
            psi[j] = psi_init->value_at(full0.phi.time_at(j));

    const double stop = alpha > 0.0
                            ? cfg.fp_tol * (1.0 - alpha) / alpha
                            : std::numeric_limits<double>::infinity();

    SemilinearResult res;
    res.alpha = alpha;
    std::vector<Eigen::VectorXd> forcing(m);
    bool converged = false;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        for (std::size_t j = 0; j < m; ++j)
            forcing[j] = F.eval(full0.phi.time_at(j), psi[j] + full0.phi[j]);
        auto next = detail::green_quadrature(s, forcing, h);
        double delta = 0.0;
        for (std::size_t j = 0; j < m; ++j) delta = std::max(delta, (next[j] - psi[j]).norm());
        psi = std::move(next);
        res.deltas.push_back(delta);
        res.iterations = it;
        if (delta <= stop) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw MaxIterExceeded("no contraction convergence within " +
                              std::to_string(cfg.max_iter) + " iterations");

    std::vector<Eigen::VectorXd> total(m);
    double forcing_sup = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        total[j] = psi[j] + full0.phi[j];
        forcing_sup = std::max(forcing_sup, (f[j] + F.eval(full0.phi.time_at(j), total[j])).norm());
    }

    detail::FullSolve full{GridFunction(full0.phi.t0(), h, std::move(total)),
                           detail::tail_margin(s, forcing_sup, cfg.tail_tol)};
    res.phi = detail::restrict_semiaxis(full, cfg);
    res.phi0 = full0.phi.restrict_to(res.phi.t0(), res.phi.t_end());
    return res;
}

/// Sup over interior grid points of |phi'(t) - A phi(t) - f(t) - F(t, phi(t))|
/// with phi' from the 5-point 4th-order centered difference. Measures how well
/// a sampled trajectory satisfies the differential equation.
inline double ode_residual(const HyperbolicSplitting& s, const GridFunction& f,
                           const LipschitzField* F, const GridFunction& phi) {
    f.require_same_grid(phi);
    if (phi.size() < 5) throw DomainTooShort("need at least 5 samples for the residual stencil");
    const auto kf = f.index_of(std::max(f.t0(), phi.t0()));
    const auto kp = phi.index_of(std::max(f.t0(), phi.t0()));
    const auto count = std::min(f.size() - kf, phi.size() - kp);
    if (count < 5) throw DomainTooShort("domains overlap on fewer than 5 samples");

    const double h = phi.h();
    double worst = 0.0;
    for (std::size_t j = 2; j + 2 < count; ++j) {
        const Eigen::VectorXd d = (-phi[kp + j + 2] + 8.0 * phi[kp + j + 1] -
                                   8.0 * phi[kp + j - 1] + phi[kp + j - 2]) /
                                  (12.0 * h);
        Eigen::VectorXd r = d - s.A * phi[kp + j] - f[kf + j];
        if (F) r -= F->eval(phi.time_at(kp + j), phi[kp + j]);
        worst = std::max(worst, r.norm());
    }
    return worst;
}

}  // namespace greenop
