#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>
#include <lapacke.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "greenop/errors.hpp"

namespace greenop {

/// Description of the linear part: either an explicit dense matrix or a named
/// finite-difference operator built on demand.
struct OperatorSpec {
    enum class Kind { dense_matrix, dirichlet_laplacian_1d };

    Kind kind = Kind::dense_matrix;
    Eigen::MatrixXd matrix;
    int points = 0;

    static OperatorSpec dense(Eigen::MatrixXd m) {
        OperatorSpec spec;
        spec.kind = Kind::dense_matrix;
        spec.matrix = std::move(m);
        return spec;
    }

    /// Second difference matrix of the Dirichlet Laplacian on (0, 1) with
    /// `points` interior nodes: (points+1)^2 * tridiag(1, -2, 1).
    static OperatorSpec dirichlet_laplacian(int points) {
        OperatorSpec spec;
        spec.kind = Kind::dirichlet_laplacian_1d;
        spec.points = points;
        return spec;
    }

    Eigen::MatrixXd build() const {
        if (kind == Kind::dense_matrix) {
            if (matrix.rows() == 0 || matrix.rows() != matrix.cols())
                throw GridMismatch("operator matrix must be square and non-empty");
            return matrix;
        }
        if (points < 1) throw GridMismatch("laplacian needs at least one interior point");
        const double scale = static_cast<double>(points + 1) * static_cast<double>(points + 1);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(points, points);
        for (int i = 0; i < points; ++i) {
            a(i, i) = -2.0 * scale;
            if (i > 0) a(i, i - 1) = scale;
            if (i + 1 < points) a(i, i + 1) = scale;
        }
        return a;
    }
};

/// Spectral splitting of a hyperbolic matrix A into stable/unstable invariant
/// subspaces, A = V * blockdiag(B_minus, B_plus) * Vinv with Re sigma(B_minus) < 0
/// and Re sigma(B_plus) > 0, plus the associated spectral projections and
/// exponential dichotomy constants (N, nu).
class HyperbolicSplitting {
  public:
    Eigen::MatrixXd A;
    Eigen::MatrixXd P_minus;  // projection onto the stable subspace
    Eigen::MatrixXd P_plus;   // complementary projection
    double gap = 0.0;         // min |Re lambda| over the spectrum
    double N = 1.0;           // dichotomy constant (working value, safety-inflated)
    double nu = 0.0;          // dichotomy rate, 0 < nu < gap

    Eigen::Index stable_dim = 0;
    Eigen::MatrixXd V, Vinv;        // block-diagonalizing change of basis
    Eigen::MatrixXd B_minus;        // stable block (stable_dim x stable_dim)
    Eigen::MatrixXd B_plus;         // unstable block

    Eigen::Index dim() const { return A.rows(); }

    /// e^{At} P_minus for t >= 0, evaluated through the stable block only so
    /// no growing exponential is ever formed.
    Eigen::MatrixXd stable_exp(double t) const {
        const auto n = dim();
        const auto k = stable_dim;
        if (k == 0) return Eigen::MatrixXd::Zero(n, n);
        const Eigen::MatrixXd ek = (B_minus * t).exp();
        return V.leftCols(k) * ek * Vinv.topRows(k);
    }

    /// e^{At} P_plus for t <= 0, evaluated through the unstable block only.
    Eigen::MatrixXd unstable_exp(double t) const {
        const auto n = dim();
        const auto k = stable_dim;
        if (k == n) return Eigen::MatrixXd::Zero(n, n);
        const Eigen::MatrixXd ek = (B_plus * t).exp();
        return V.rightCols(n - k) * ek * Vinv.bottomRows(n - k);
    }

    /// Green's function of d/dt - A on the line:
    /// G(t) = e^{At} P_minus for t >= 0 and -e^{At} P_plus for t < 0.
    Eigen::MatrixXd green(double t) const {
        return t >= 0.0 ? stable_exp(t) : Eigen::MatrixXd(-unstable_exp(t));
    }
};

inline Eigen::MatrixXd green_eval(const HyperbolicSplitting& s, double t) { return s.green(t); }

namespace detail {

inline lapack_logical stable_half_plane(const double* re, const double* /*im*/) {
    return *re < 0.0 ? 1 : 0;
}

// Residual-based sanity check of a computed splitting; returns the worst of
// the projection algebra and block-diagonalization defects, scale-relative.
inline double splitting_defect(const HyperbolicSplitting& s) {
    const auto n = s.dim();
    const double scale = std::max(1.0, s.A.norm());
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
    B.topLeftCorner(s.stable_dim, s.stable_dim) = s.B_minus;
    B.bottomRightCorner(n - s.stable_dim, n - s.stable_dim) = s.B_plus;
    double worst = (s.V * B * s.Vinv - s.A).norm() / scale;
    worst = std::max(worst, (s.V * s.Vinv - Eigen::MatrixXd::Identity(n, n)).norm());
    worst = std::max(worst, (s.P_minus * s.P_minus - s.P_minus).norm());
    worst = std::max(worst, (s.A * s.P_minus - s.P_minus * s.A).norm() / scale);
    return worst;
}

// Splitting via ordered real Schur: stable eigenvalues sorted first, then the
// coupling block removed with a Sylvester solve. Returns false if LAPACK
// could not produce the factorization.
inline bool split_via_schur(const Eigen::MatrixXd& A, double gap_tolerance,
                            HyperbolicSplitting& out) {
    const auto n = static_cast<lapack_int>(A.rows());
    Eigen::MatrixXd T = A;  // overwritten by the quasi-triangular factor
    Eigen::MatrixXd Z(n, n);
    Eigen::VectorXd wr(n), wi(n);
    lapack_int sdim = 0;
    const lapack_int info =
        LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'S', &stable_half_plane, n, T.data(), n, &sdim,
                      wr.data(), wi.data(), Z.data(), n);
    if (info != 0) return false;

    double gap = std::numeric_limits<double>::infinity();
    for (lapack_int i = 0; i < n; ++i) gap = std::min(gap, std::abs(wr(i)));
    if (gap < gap_tolerance)
        throw NotHyperbolic("eigenvalue with |Re lambda| = " + fmt_num(gap) +
                            " inside the tolerance band " + fmt_num(gap_tolerance));

    const auto k = static_cast<Eigen::Index>(sdim);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(k, n - k);
    if (k > 0 && k < n) {
        // T11 R - R T22 = -T12 decouples the quasi-triangular blocks.
        Eigen::MatrixXd C = -T.topRightCorner(k, n - k);
        double scale = 1.0;
        const lapack_int sinfo = LAPACKE_dtrsyl(
            LAPACK_COL_MAJOR, 'N', 'N', -1, static_cast<lapack_int>(k),
            static_cast<lapack_int>(n - k), T.data(), n, T.data() + k * (n + 1), n, C.data(),
            static_cast<lapack_int>(k), &scale);
        if (sinfo != 0 || scale == 0.0) return false;
        R = C / scale;
    }

    Eigen::MatrixXd W = Eigen::MatrixXd::Identity(n, n);
    W.topRightCorner(k, n - k) = R;
    Eigen::MatrixXd Winv = Eigen::MatrixXd::Identity(n, n);
    Winv.topRightCorner(k, n - k) = -R;

    out.A = A;
    out.gap = gap;
    out.stable_dim = k;
    out.V = Z * W;
    out.Vinv = Winv * Z.transpose();
    out.B_minus = T.topLeftCorner(k, k);
    out.B_plus = T.bottomRightCorner(n - k, n - k);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    D.topLeftCorner(k, k).setIdentity();
    out.P_minus = out.V * D * out.Vinv;
    out.P_plus = Eigen::MatrixXd::Identity(n, n) - out.P_minus;
    return true;
}

// Fallback: Newton iteration for the matrix sign function with determinant
// scaling, then invariant bases from rank-revealing QR of the projections.
inline bool split_via_sign(const Eigen::MatrixXd& A, double gap_tolerance,
                           HyperbolicSplitting& out) {
    const auto n = A.rows();

    const Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) gap = std::min(gap, std::abs(es.eigenvalues()(i).real()));
    if (gap < gap_tolerance)
        throw NotHyperbolic("eigenvalue with |Re lambda| = " + fmt_num(gap) +
                            " inside the tolerance band " + fmt_num(gap_tolerance));

    Eigen::MatrixXd X = A;
    bool converged = false;
    for (int iter = 0; iter < 100; ++iter) {
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(X);
        const double det = std::abs(lu.determinant());
        if (!(det > 0.0) || !std::isfinite(det)) return false;
        const double c = std::pow(det, 1.0 / static_cast<double>(n));
        const Eigen::MatrixXd Xinv = lu.inverse();
        Eigen::MatrixXd next = 0.5 * (X / c + c * Xinv);
        const double change = (next - X).norm();
        X = std::move(next);
        if (change <= 1e-13 * std::max(1.0, X.norm())) {
            converged = true;
            break;
        }
    }
    if (!converged) return false;

    out.A = A;
    out.gap = gap;
    out.P_minus = 0.5 * (Eigen::MatrixXd::Identity(n, n) - X);
    out.P_plus = 0.5 * (Eigen::MatrixXd::Identity(n, n) + X);
    const auto k = static_cast<Eigen::Index>(std::llround(out.P_minus.trace()));
    out.stable_dim = k;

    Eigen::MatrixXd V(n, n);
    if (k > 0) {
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(out.P_minus);
        V.leftCols(k) = Eigen::MatrixXd(qr.householderQ()).leftCols(k);
    }
    if (k < n) {
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(out.P_plus);
        V.rightCols(n - k) = Eigen::MatrixXd(qr.householderQ()).leftCols(n - k);
    }
    out.V = V;
    const Eigen::PartialPivLU<Eigen::MatrixXd> vlu(V);
    out.Vinv = vlu.inverse();
    const Eigen::MatrixXd B = out.Vinv * A * V;
    out.B_minus = B.topLeftCorner(k, k);
    out.B_plus = B.bottomRightCorner(n - k, n - k);
    return true;
}

}  // namespace detail

std::pair<double, double> estimate_dichotomy(HyperbolicSplitting& s, double nu_fraction = 0.9,
                                             double horizon = -1.0, int samples = 4000);

/// Computes the hyperbolic splitting of the operator. Throws NotHyperbolic
/// when an eigenvalue's real part lies within gap_tolerance of the imaginary
/// axis, NumericalFailure when no sufficiently accurate factorization can be
/// produced. Dichotomy constants are filled with nu = nu_fraction * gap and a
/// sampled-envelope estimate of N.
inline HyperbolicSplitting split(const OperatorSpec& spec, double gap_tolerance = 1e-8,
                                 double nu_fraction = 0.9) {
    const Eigen::MatrixXd A = spec.build();
    HyperbolicSplitting s;
    bool ok = detail::split_via_schur(A, gap_tolerance, s);
    if (ok && detail::splitting_defect(s) > 1e-9) ok = false;
    if (!ok) {
        HyperbolicSplitting alt;
        if (!detail::split_via_sign(A, gap_tolerance, alt))
            throw NumericalFailure("could not factor the operator into stable/unstable blocks");
        if (detail::splitting_defect(alt) > 1e-9)
            throw NumericalFailure("spectral splitting failed its residual check");
        s = alt;
    }
    estimate_dichotomy(s, nu_fraction);
    return s;
}

/// Estimates the dichotomy constant N by sampling the decay envelopes
/// max(|e^{At} P_minus| e^{nu t}, |e^{-At} P_plus| e^{nu t}) on [0, horizon]
/// (default 50/gap), refining the sampled argmax by golden-section search,
/// flooring at 1 and inflating by a 5% safety factor. Updates s.N, s.nu and
/// returns {N, nu}.
inline std::pair<double, double> estimate_dichotomy(HyperbolicSplitting& s, double nu_fraction,
                                                    double horizon, int samples) {
    if (!(nu_fraction > 0.0 && nu_fraction < 1.0))
        throw GridMismatch("nu_fraction must lie in (0, 1)");
    const double nu = nu_fraction * s.gap;
    if (horizon <= 0.0) horizon = 50.0 / s.gap;
    samples = std::max(samples, 16);

    const auto n = s.dim();
    const auto k = s.stable_dim;

    const auto two_norm = [](const Eigen::MatrixXd& m) {
        return m.jacobiSvd().singularValues()(0);
    };
    // envelope of one half: |V diag(e^{Bt}, 0) Vinv| e^{nu t}
    const auto make_env = [&](const Eigen::MatrixXd& B, const Eigen::MatrixXd& cols,
                              const Eigen::MatrixXd& rows) {
        return [&, B, cols, rows](double t) {
            return two_norm(Eigen::MatrixXd(cols * (B * t).exp() * rows)) * std::exp(nu * t);
        };
    };

    double best = 0.0;
    const double dt = horizon / samples;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);

    const auto scan = [&](const Eigen::MatrixXd& B, const Eigen::MatrixXd& cols,
                          const Eigen::MatrixXd& rows) {
        const auto env = make_env(B, cols, rows);
        const Eigen::MatrixXd step = (B * dt).exp();
        Eigen::MatrixXd power = Eigen::MatrixXd::Identity(B.rows(), B.cols());
        double peak = 0.0, t_peak = 0.0;
        for (int j = 0; j <= samples; ++j) {
            const double t = j * dt;
            const double val = two_norm(Eigen::MatrixXd(cols * power * rows)) * std::exp(nu * t);
            if (val > peak) {
                peak = val;
                t_peak = t;
            }
            if (j < samples) power = step * power;
        }
        // golden-section polish around the sampled argmax
        double a = std::max(0.0, t_peak - dt), b = std::min(horizon, t_peak + dt);
        double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
        double f1 = env(x1), f2 = env(x2);
        for (int it = 0; it < 40 && b - a > 1e-10 * horizon; ++it) {
            if (f1 < f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + gr * (b - a);
                f2 = env(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - gr * (b - a);
                f1 = env(x1);
            }
        }
        best = std::max({best, peak, f1, f2});
    };

    if (k > 0)  // stable: e^{At} P_minus at t >= 0
        scan(s.B_minus, s.V.leftCols(k), s.Vinv.topRows(k));
    if (k < n)  // unstable: e^{-At} P_plus at t >= 0, i.e. block -B_plus
        scan(Eigen::MatrixXd(-s.B_plus), s.V.rightCols(n - k), s.Vinv.bottomRows(n - k));

    s.nu = nu;
    s.N = 1.05 * std::max(1.0, best);
    return {s.N, s.nu};
}

}  // namespace greenop
