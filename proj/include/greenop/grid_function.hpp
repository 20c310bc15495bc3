#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "greenop/errors.hpp"

namespace greenop {

/// Uniformly sampled vector-valued function of time: sample k lives at
/// t0 + k*h. The concrete stand-in for bounded continuous functions on the
/// semi-axis (t0 = 0) or the whole axis (t0 = -T).
class GridFunction {
public:
    GridFunction() = default;

    GridFunction(double t0, double h, std::vector<Eigen::VectorXd> values)
        : t0_(t0), h_(h), values_(std::move(values)) {
        if (h_ <= 0.0) throw GridMismatch("grid step must be positive");
        if (values_.empty()) throw GridMismatch("grid function needs at least one sample");
        const auto n = values_.front().size();
        for (const auto& v : values_)
            if (v.size() != n) throw GridMismatch("inconsistent sample dimension");
    }

    /// Sample a callable t -> R^n on count points starting at t0.
    static GridFunction sample(double t0, double h, std::size_t count,
                               const std::function<Eigen::VectorXd(double)>& fn) {
        std::vector<Eigen::VectorXd> vals;
        vals.reserve(count);
        for (std::size_t k = 0; k < count; ++k) vals.push_back(fn(t0 + static_cast<double>(k) * h));
        return GridFunction(t0, h, std::move(vals));
    }

    /// Scalar convenience: samples t -> (fn(t)) as a 1-dimensional function.
    static GridFunction sample_scalar(double t0, double h, std::size_t count,
                                      const std::function<double(double)>& fn) {
        return sample(t0, h, count, [&fn](double t) {
            Eigen::VectorXd v(1);
            v(0) = fn(t);
            return v;
        });
    }

    /// Constant function on a grid covering [t0, t0 + len].
    static GridFunction constant(double t0, double h, double len, const Eigen::VectorXd& c) {
        const auto count = static_cast<std::size_t>(std::llround(len / h)) + 1;
        return sample(t0, h, count, [&c](double) { return c; });
    }

    double t0() const { return t0_; }
    double h() const { return h_; }
    double t_end() const { return t0_ + static_cast<double>(size() - 1) * h_; }
    double length() const { return t_end() - t0_; }
    std::size_t size() const { return values_.size(); }
    Eigen::Index dim() const { return values_.front().size(); }

    double time_at(std::size_t k) const { return t0_ + static_cast<double>(k) * h_; }
    const Eigen::VectorXd& operator[](std::size_t k) const { return values_[k]; }
    Eigen::VectorXd& operator[](std::size_t k) { return values_[k]; }
    const std::vector<Eigen::VectorXd>& values() const { return values_; }

    bool contains(double t) const {
        const double tol = tol_for(t);
        return t >= t0_ - tol && t <= t_end() + tol;
    }

    /// Nearest grid index for time t (t must be a grid point within tolerance).
    std::size_t index_of(double t) const {
        const double x = (t - t0_) / h_;
        const auto k = static_cast<long long>(std::llround(x));
        if (k < 0 || k >= static_cast<long long>(size()) ||
            std::abs(x - static_cast<double>(k)) > 1e-6)
            throw GridMismatch("time is not a grid point of this function");
        return static_cast<std::size_t>(k);
    }

    /// Value at arbitrary t inside the domain, linearly interpolated.
    Eigen::VectorXd value_at(double t) const {
        if (!contains(t)) throw GridMismatch("evaluation time outside the domain");
        const double x = std::clamp((t - t0_) / h_, 0.0, static_cast<double>(size() - 1));
        const auto k = static_cast<std::size_t>(std::min(
            static_cast<double>(size() - 2), std::floor(x)));
        const double w = x - static_cast<double>(k);
        if (size() == 1 || w <= 0.0) return values_[k];
        return (1.0 - w) * values_[k] + w * values_[k + 1];
    }

    /// Max over samples of the Euclidean norm.
    double sup_norm() const {
        double m = 0.0;
        for (const auto& v : values_) m = std::max(m, v.norm());
        return m;
    }

    /// Sub-grid of all samples with t in [a, b] (endpoints inclusive up to rounding).
    GridFunction restrict_to(double a, double b) const {
        const double tol = std::max(tol_for(a), tol_for(b));
        std::vector<Eigen::VectorXd> vals;
        double start = 0.0;
        bool started = false;
        for (std::size_t k = 0; k < size(); ++k) {
            const double t = time_at(k);
            if (t >= a - tol && t <= b + tol) {
                if (!started) {
                    start = t;
                    started = true;
                }
                vals.push_back(values_[k]);
            }
        }
        if (!started) throw EmptyOverlap("restriction window contains no samples");
        return GridFunction(start, h_, std::move(vals));
    }

    GridFunction map(const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& fn) const {
        std::vector<Eigen::VectorXd> vals;
        vals.reserve(size());
        for (std::size_t k = 0; k < size(); ++k) vals.push_back(fn(time_at(k), values_[k]));
        return GridFunction(t0_, h_, std::move(vals));
    }

    GridFunction operator+(const GridFunction& g) const { return zip(g, 1.0); }
    GridFunction operator-(const GridFunction& g) const { return zip(g, -1.0); }

    GridFunction scaled(double a) const {
        return map([a](double, const Eigen::VectorXd& v) { return (a * v).eval(); });
    }

    GridFunction shifted_by(const Eigen::VectorXd& c) const {
        return map([&c](double, const Eigen::VectorXd& v) { return (v + c).eval(); });
    }

    /// Both functions live on the same grid (step, phase, dimension)?
    void require_same_grid(const GridFunction& g) const {
        if (dim() != g.dim()) throw GridMismatch("dimension mismatch");
        if (std::abs(h_ - g.h_) > 1e-12 * std::max(h_, g.h_))
            throw GridMismatch("grid step mismatch");
        const double phase = (g.t0_ - t0_) / h_;
        if (std::abs(phase - std::llround(phase)) > 1e-6)
            throw GridMismatch("grid phase mismatch");
    }

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw NumericalFailure("cannot open '" + path + "' for writing");
        out << "t";
        for (Eigen::Index j = 0; j < dim(); ++j) out << ",x" << j;
        out << "\n";
        char buf[40];
        for (std::size_t k = 0; k < size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", time_at(k));
            out << buf;
            for (Eigen::Index j = 0; j < dim(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", values_[k](j));
                out << ',' << buf;
            }
            out << "\n";
        }
    }

    static GridFunction read_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw NumericalFailure("cannot open '" + path + "' for reading");
        std::string line;
        if (!std::getline(in, line)) throw GridMismatch("empty CSV: " + path);
        std::vector<double> times;
        std::vector<Eigen::VectorXd> vals;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string cell;
            std::vector<double> row;
            while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
            if (row.size() < 2) throw GridMismatch("CSV row needs t plus one component");
            times.push_back(row[0]);
            vals.emplace_back(Eigen::Map<Eigen::VectorXd>(row.data() + 1,
                                                          static_cast<Eigen::Index>(row.size() - 1)));
        }
        if (vals.size() < 2) throw GridMismatch("CSV needs at least two samples");
        return GridFunction(times.front(), times[1] - times.front(), std::move(vals));
    }

private:
    double tol_for(double t) const { return 1e-9 * std::max({1.0, std::abs(t), std::abs(t_end())}); }

    GridFunction zip(const GridFunction& g, double sign) const {
        require_same_grid(g);
        if (size() != g.size() || std::abs(t0_ - g.t0_) > 1e-9)
            throw GridMismatch("domain mismatch in grid arithmetic");
        std::vector<Eigen::VectorXd> vals;
        vals.reserve(size());
        for (std::size_t k = 0; k < size(); ++k) vals.push_back(values_[k] + sign * g.values_[k]);
        return GridFunction(t0_, h_, std::move(vals));
    }

    double t0_ = 0.0;
    double h_ = 1.0;
    std::vector<Eigen::VectorXd> values_;
};

/// h-translation: g(t) = f(t + tau) on the shrunk overlap domain. tau must be a
/// grid multiple; translating by an exact multiple is an index shift, so sample
/// values carry over bit-exactly.
inline GridFunction translate(const GridFunction& f, double tau) {
    const double x = tau / f.h();
    const auto m = static_cast<long long>(std::llround(x));
    if (std::abs(x - static_cast<double>(m)) > 1e-12 * std::max(1.0, std::abs(x)))
        throw NonCommensurateShift("shift is not an integer multiple of the grid step");
    const auto n = static_cast<long long>(f.size());
    const long long lo = std::max(0LL, m);
    const long long hi = std::min(n, n + m);
    if (lo >= hi) throw EmptyOverlap("translated domain is empty");
    std::vector<Eigen::VectorXd> vals;
    vals.reserve(static_cast<std::size_t>(hi - lo));
    for (long long k = lo; k < hi; ++k) vals.push_back(f[static_cast<std::size_t>(k)]);
    // New start time: the translated sample g(t) = f(t + tau) at t = t_k - tau.
    const double start = f.time_at(static_cast<std::size_t>(lo)) - static_cast<double>(m) * f.h();
    return GridFunction(start, f.h(), std::move(vals));
}

}  // namespace greenop
