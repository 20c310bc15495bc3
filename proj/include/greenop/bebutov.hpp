#pragma once

#include <cmath>
#include <cstdlib>
#include <vector>

#include "greenop/grid_function.hpp"

namespace greenop {

namespace detail {

// Pairwise differences of f and g on the overlap of their domains, plus the
// overlap grid geometry. Grids must agree in step, phase and dimension.
struct Overlap {
    double t_lo = 0.0;
    double t_hi = 0.0;
    double h = 0.0;
    std::vector<Eigen::VectorXd> diff;  // f - g at overlap grid points
    std::vector<double> rho;            // |f - g| at overlap grid points

    double time_at(std::size_t k) const { return t_lo + static_cast<double>(k) * h; }

    // |f - g| at arbitrary t inside the overlap, functions linearly interpolated.
    double rho_at(double t) const {
        if (diff.size() == 1) return rho[0];
        const double x = (t - t_lo) / h;
        const auto k = static_cast<std::size_t>(
            std::min(static_cast<double>(diff.size() - 2), std::max(0.0, std::floor(x))));
        const double w = std::min(1.0, std::max(0.0, x - static_cast<double>(k)));
        return ((1.0 - w) * diff[k] + w * diff[k + 1]).norm();
    }

    // max of |f - g| over the window [a, b], window endpoints included via
    // linear interpolation so the max varies continuously with the window.
    double window_max(double a, double b) const {
        a = std::max(a, t_lo);
        b = std::min(b, t_hi);
        if (a > b) return 0.0;
        const auto lo = static_cast<long long>(std::ceil((a - t_lo) / h - 1e-9));
        const auto hi = static_cast<long long>(std::floor((b - t_lo) / h + 1e-9));
        double m = std::max(rho_at(a), rho_at(b));
        for (long long k = std::max(0LL, lo);
             k <= std::min<long long>(hi, static_cast<long long>(rho.size()) - 1); ++k)
            m = std::max(m, rho[static_cast<std::size_t>(k)]);
        return m;
    }
};

inline Overlap make_overlap(const GridFunction& f, const GridFunction& g) {
    f.require_same_grid(g);
    Overlap ov;
    ov.h = f.h();
    ov.t_lo = std::max(f.t0(), g.t0());
    ov.t_hi = std::min(f.t_end(), g.t_end());
    if (ov.t_hi < ov.t_lo - 1e-12) throw GridMismatch("domains do not overlap");
    const auto kf = f.index_of(ov.t_lo);
    const auto kg = g.index_of(ov.t_lo);
    const auto count = static_cast<std::size_t>(std::llround((ov.t_hi - ov.t_lo) / ov.h)) + 1;
    ov.diff.reserve(count);
    ov.rho.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        ov.diff.push_back(f[kf + k] - g[kg + k]);
        ov.rho.push_back(ov.diff.back().norm());
    }
    ov.t_lo = f.time_at(kf);
    ov.t_hi = f.time_at(kf + count - 1);
    return ov;
}

}  // namespace detail

/// Compact-open (Bebutov) distance between sampled functions: the unique
/// eps >= 0 with max_{|t| <= 1/eps} |f(t) - g(t)| = eps, found by bisection on
/// G(eps) = window_max(1/eps) - eps. The window is symmetric about 0 and
/// degrades to [0, L] for semi-axis data. When the available domain is shorter
/// than 1/eps at the root, the result is a lower bound for the true distance
/// and *lower_bound is set.
inline double bebutov_distance(const GridFunction& f, const GridFunction& g,
                               bool* lower_bound = nullptr) {
    const auto ov = detail::make_overlap(f, g);
    if (ov.t_lo > 1e-9 || ov.t_hi < -1e-9)
        throw GridMismatch("overlap must contain a window about t = 0");
    if (lower_bound) *lower_bound = false;

    double rho_sup = 0.0;
    for (double r : ov.rho) rho_sup = std::max(rho_sup, r);
    if (rho_sup == 0.0) return 0.0;

    // Largest |t| reachable inside the overlap; beyond it the window saturates.
    const double reach = std::max(std::abs(ov.t_lo), std::abs(ov.t_hi));
    const double domain_len = std::max(ov.t_hi - ov.t_lo, ov.h);

    const auto G = [&ov](double eps) {
        const double w = 1.0 / eps;
        return ov.window_max(-w, w) - eps;
    };

    double lo = 0.0, hi = std::max(rho_sup, 1.0 / domain_len);
    // G(hi) <= 0 because any window max is <= rho_sup <= hi.
    for (int iter = 0; iter < 200 && hi - lo > 1e-11; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (G(mid) > 0.0 ? lo : hi) = mid;
    }
    const double eps = 0.5 * (lo + hi);
    if (lower_bound && 1.0 / eps > reach + 1e-9) *lower_bound = true;
    return eps;
}

/// All grid-multiple shifts tau in (0, tau_max] with
/// sup_t |f(t + tau) - f(t)| < eps over the overlapped samples.
inline std::vector<double> almost_periods(const GridFunction& f, double eps, double tau_max) {
    if (eps <= 0.0) throw GridMismatch("eps must be positive");
    if (tau_max > 0.5 * f.length() + 1e-9)
        throw GridMismatch("tau_max exceeds half the domain length");
    std::vector<double> periods;
    const auto n = f.size();
    const double eps2 = eps * eps;
    const auto m_max = static_cast<std::size_t>(std::floor(tau_max / f.h() + 1e-9));
    for (std::size_t m = 1; m <= m_max && m < n; ++m) {
        bool ok = true;
        for (std::size_t k = 0; k + m < n; ++k) {
            if ((f[k + m] - f[k]).squaredNorm() >= eps2) {
                ok = false;
                break;
            }
        }
        if (ok) periods.push_back(static_cast<double>(m) * f.h());
    }
    return periods;
}

}  // namespace greenop
