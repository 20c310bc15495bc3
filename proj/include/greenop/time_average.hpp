#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "greenop/grid_function.hpp"

namespace greenop {

/// Time average of a function together with its oscillation decay table
/// omega(T) = sup_t |(1/T) int_t^{t+T} (f - mean)|, tabulated at the window
/// lengths handed to time_average (increasing order).
struct AverageProfile {
    Eigen::VectorXd mean;
    std::vector<std::pair<double, double>> omega;  // (window length, deviation)

    /// omega interpolated at window length T. Below the smallest tabulated
    /// window the first entry is returned (the table cannot resolve shorter
    /// scales). Above the largest window the table is only an observation,
    /// not a bound: throws OmegaTableTooCoarse unless clamp_above, in which
    /// case the last entry is returned.
    double omega_at(double T, bool clamp_above = false) const {
        if (omega.empty()) throw OmegaTableTooCoarse("empty oscillation table");
        if (T <= omega.front().first) return omega.front().second;
        if (T >= omega.back().first) {
            if (T > omega.back().first * (1.0 + 1e-12) && !clamp_above)
                throw OmegaTableTooCoarse("window length " + std::to_string(T) +
                                          " beyond tabulated range " +
                                          std::to_string(omega.back().first));
            return omega.back().second;
        }
        auto it = std::lower_bound(
            omega.begin(), omega.end(), T,
            [](const std::pair<double, double>& a, double b) { return a.first < b; });
        const auto [t1, w1] = *it;
        const auto [t0, w0] = *(it - 1);
        const double s = (T - t0) / (t1 - t0);
        return (1.0 - s) * w0 + s * w1;
    }
};

/// Sliding-window trapezoid averages of f. The mean is the average of the
/// window means of the largest window over all admissible start times; the
/// omega table records the worst windowed deviation from that mean for each
/// requested window length.
inline AverageProfile time_average(const GridFunction& f, const std::vector<double>& windows) {
    if (windows.empty()) throw WindowTooLong("no window lengths given");
    for (std::size_t i = 0; i + 1 < windows.size(); ++i)
        if (windows[i + 1] <= windows[i])
            throw GridMismatch("window lengths must be strictly increasing");
    if (windows.front() <= 0.0) throw GridMismatch("window lengths must be positive");
    if (windows.back() > f.length() + 1e-9)
        throw WindowTooLong("largest window exceeds the domain length");

    const auto n = f.size();
    const double h = f.h();
    const auto dim = static_cast<Eigen::Index>(f.dim());

    // prefix[k] = trapezoid integral of f over [t0, t0 + k h]
    std::vector<Eigen::VectorXd> prefix(n, Eigen::VectorXd::Zero(dim));
    for (std::size_t k = 1; k < n; ++k)
        prefix[k] = prefix[k - 1] + (0.5 * h) * (f[k - 1] + f[k]);

    const auto steps_of = [&](double T) {
        auto m = static_cast<std::size_t>(std::llround(T / h));
        m = std::max<std::size_t>(m, 1);
        if (m > n - 1) throw WindowTooLong("window longer than the sampled domain");
        return m;
    };

    AverageProfile prof;
    const auto M = steps_of(windows.back());
    const double TM = static_cast<double>(M) * h;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i + M < n; ++i) acc += prefix[i + M] - prefix[i];
    prof.mean = acc / (TM * static_cast<double>(n - M));

    for (double T : windows) {
        const auto m = steps_of(T);
        const double Tm = static_cast<double>(m) * h;
        double worst = 0.0;
        for (std::size_t i = 0; i + m < n; ++i)
            worst = std::max(worst, (prefix[i + m] - prefix[i] - Tm * prof.mean).norm());
        prof.omega.emplace_back(Tm, worst / Tm);
    }
    return prof;
}

}  // namespace greenop
