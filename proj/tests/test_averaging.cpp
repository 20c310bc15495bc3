#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "greenop/averaging.hpp"

using namespace greenop;

TEST_CASE("rescale_forcing compresses the slow time axis") {
    const auto f = GridFunction::sample_scalar(0.0, 0.01, 10001, [](double t) { return std::sin(2.0 * t); });

    SECTION("eps = 1 with the native step is an index copy") {
        const auto g = rescale_forcing(f, 1.0, 40.0, 0.01);
        CHECK(g.h() == 0.01);
        for (std::size_t k = 0; k < g.size(); ++k) CHECK(g[k](0) == f[k](0));  // bit-exact
    }

    SECTION("eps = 0.5 doubles the observed frequency") {
        const auto g = rescale_forcing(f, 0.5, 40.0);
        CHECK(g.h() == Catch::Approx(0.005));  // default step: eps * slow step
        double err = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k)
            err = std::max(err, std::abs(g[k](0) - std::sin(4.0 * g.time_at(k))));
        CHECK(err <= 1e-12);  // samples land exactly on slow grid points
    }

    SECTION("slow record must cover T_fast / eps") {
        CHECK_THROWS_AS(rescale_forcing(f, 0.1, 20.0), DomainTooShort);   // needs [0, 200]
        CHECK_THROWS_AS(rescale_forcing(f, -0.5, 10.0), DomainTooShort);  // eps > 0
    }
}

TEST_CASE("stationary solution of the averaged equation") {
    Eigen::MatrixXd A(2, 2);
    A << -1, 0, 0, 2;
    const auto s = split(OperatorSpec::dense(A));

    SECTION("linear: solves A x = -f_bar") {
        const Eigen::VectorXd x = stationary_solution(s, Eigen::VectorXd::Ones(2));
        CHECK(x(0) == Catch::Approx(1.0).margin(1e-12));
        CHECK(x(1) == Catch::Approx(-0.5).margin(1e-12));
    }

    SECTION("semi-linear: agrees with a hand-rolled picard iteration") {
        const auto sc = split(OperatorSpec::dense(-Eigen::MatrixXd::Identity(1, 1)));
        const Eigen::VectorXd x = stationary_solution(
            sc, Eigen::VectorXd::Ones(1),
            [](const Eigen::VectorXd& v) { return Eigen::VectorXd(0.1 * v.array().sin()); });
        double y = 0.0;  // oracle: y = 1 + 0.1 sin y by plain iteration
        for (int i = 0; i < 200; ++i) y = 1.0 + 0.1 * std::sin(y);
        CHECK(x(0) == Catch::Approx(y).margin(1e-10));
    }

    SECTION("expanding averaged field is rejected") {
        const auto sc = split(OperatorSpec::dense(-Eigen::MatrixXd::Identity(1, 1)));
        CHECK_THROWS_AS(
            stationary_solution(
                sc, Eigen::VectorXd::Ones(1),
                [](const Eigen::VectorXd& v) { return Eigen::VectorXd(3.0 * v.array().sin()); }),
            StationaryContractionViolated);
    }
}

TEST_CASE("oscillation bound terms") {
    AverageProfile omega;
    omega.mean = Eigen::VectorXd::Zero(1);

    SECTION("zero oscillation table gives zero terms") {
        omega.omega = {{1.0, 0.0}, {10.0, 0.0}, {100.0, 0.0}};
        const auto b = bound_terms(omega, 1.0, 0.9, 0.05);
        CHECK(b.t_term == 0.0);
        CHECK(b.int_term == 0.0);
        CHECK(b.tail_term == 0.0);
    }

    SECTION("2/T table: strict decrease along eps halvings, empirical sup dominated") {
        omega.omega.clear();
        for (double T : {0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0})
            omega.omega.emplace_back(T, 2.0 / T);
        const double nu = 0.9;
        BoundTerms prev{};
        bool first = true;
        for (const double eps : {0.1, 0.05, 0.025, 0.0125}) {
            const auto b = bound_terms(omega, 1.0, nu, eps);
            CHECK(b.t_term > 0.0);
            if (!first) {
                CHECK(b.t_term < prev.t_term);
                CHECK(b.int_term < prev.int_term);
                CHECK(b.tail_term < prev.tail_term);
            }
            // measured sup of e^{-nu t} t omega(t/eps) never beats the bound
            CHECK(empirical_oscillation_sup(omega, nu, eps) <= b.t_term * (1.0 + 1e-12));
            prev = b;
            first = false;
        }
    }

    SECTION("argument beyond the table is refused") {
        omega.omega = {{1.0, 2.0}, {2.0, 1.0}};
        // 1/sqrt(eps) = 10 exceeds the largest tabulated window
        CHECK_THROWS_AS(bound_terms(omega, 1.0, 0.9, 0.01), OmegaTableTooCoarse);
    }
}

TEST_CASE("averaging sweep: validation, monotone deviation, bound column") {
    AveragingProblem p;
    p.op = OperatorSpec::dense(-Eigen::MatrixXd::Identity(1, 1));
    p.f = GridFunction::sample_scalar(0.0, 0.01, 60001, [](double t) { return std::sin(t); });
    p.f_bar = Eigen::VectorXd::Zero(1);
    p.omega = time_average(p.f, {1.0, 2.0, 5.0, 10.0, 20.0, 50.0});

    SolveConfig cfg;
    cfg.h = 0.01;
    cfg.T = 30.0;

    SECTION("eps_list must be strictly decreasing and positive") {
        CHECK_THROWS_AS(averaging_sweep(p, {}, cfg), GridMismatch);
        CHECK_THROWS_AS(averaging_sweep(p, {0.1, 0.2}, cfg), GridMismatch);
        CHECK_THROWS_AS(averaging_sweep(p, {0.1, -0.05}, cfg), GridMismatch);
    }

    SECTION("nonlinearity must vanish at the origin") {
        AveragingProblem bad = p;
        LipschitzField F;
        F.eval = [](double, const Eigen::VectorXd& x) {
            return Eigen::VectorXd(0.1 * x.array().cos());  // F(t, 0) != 0
        };
        F.L = 0.1;
        bad.F = F;
        CHECK_THROWS_AS(averaging_sweep(bad, {0.2, 0.1}, cfg), GridMismatch);
    }

    SECTION("deviations shrink and stay below the computed bound") {
        const auto rep = averaging_sweep(p, {0.2, 0.1, 0.05}, cfg);
        REQUIRE(rep.rows.size() == 3);
        CHECK(rep.psi_bar(0) == Catch::Approx(0.0).margin(1e-12));
        for (std::size_t i = 0; i < rep.rows.size(); ++i) {
            const auto& row = rep.rows[i];
            // oracle: response amplitude of x' = -x + sin(t/eps) past the burn-in
            const double amp = row.eps / std::sqrt(1.0 + row.eps * row.eps);
            CHECK(row.sup_dev == Catch::Approx(amp).epsilon(0.05));
            REQUIRE(row.bound.has_value());
            CHECK(*row.bound >= row.sup_dev);
            CHECK(row.sup_dev_full >= row.sup_dev);
            if (i > 0) CHECK(row.sup_dev < rep.rows[i - 1].sup_dev);
        }
        CHECK(rep.slope == Catch::Approx(1.0).margin(0.15));
        CHECK(rep.t_min == Catch::Approx(5.0 / 0.9).epsilon(0.01));
    }
}

TEST_CASE("slow-form and rescaled solves agree on the common window") {
    // the same problem solved in slow time (operator eps*A, forcing eps*f)
    // and in fast time via solve_rescaled must match after the change of
    // variables psi(s) = x(s / eps)
    const double eps = 0.2;
    const auto f_slow = GridFunction::sample_scalar(0.0, 0.01, 17501, [](double t) { return std::sin(t); });

    AveragingProblem p;
    p.op = OperatorSpec::dense(-Eigen::MatrixXd::Identity(1, 1));
    p.f = f_slow;
    p.f_bar = Eigen::VectorXd::Zero(1);
    p.omega = time_average(p.f, {1.0, 10.0});

    SolveConfig cfg_fast;
    cfg_fast.h = 0.01;
    cfg_fast.T = 35.0;
    const auto psi = solve_rescaled(p, eps, cfg_fast);

    const auto s_slow = split(OperatorSpec::dense(-eps * Eigen::MatrixXd::Identity(1, 1)));
    SolveConfig cfg_slow;
    cfg_slow.h = 0.01;
    cfg_slow.T = f_slow.t_end();
    const auto x = green_apply_semiaxis(s_slow, f_slow.scaled(eps), cfg_slow);

    double worst = 0.0;
    for (double t = 0.0; t <= psi.t_end(); t += 0.37) {
        const double tau = t / eps;
        if (tau > x.t_end()) break;
        worst = std::max(worst, std::abs(psi.value_at(t)(0) - x.value_at(tau)(0)));
    }
    CHECK(worst <= 1e-3);
}

TEST_CASE("report csv layout") {
    AveragingProblem p;
    p.op = OperatorSpec::dense(-Eigen::MatrixXd::Identity(1, 1));
    p.f = GridFunction::sample_scalar(0.0, 0.01, 30001, [](double t) { return std::sin(t); });
    p.f_bar = Eigen::VectorXd::Zero(1);
    p.omega = time_average(p.f, {1.0, 5.0, 20.0});
    SolveConfig cfg;
    cfg.h = 0.01;
    cfg.T = 30.0;
    const auto rep = averaging_sweep(p, {0.2, 0.1}, cfg);

    const std::string path = (std::filesystem::temp_directory_path() / "greenop_rep.csv").string();
    rep.write_csv(path);
    std::ifstream in(path);
    std::string header, row1, row2;
    REQUIRE(std::getline(in, header));
    REQUIRE(std::getline(in, row1));
    REQUIRE(std::getline(in, row2));
    CHECK(header == "eps,sup_dev,bound,slope_cumulative");
    CHECK(std::count(row1.begin(), row1.end(), ',') == 3);
    CHECK(row1.back() == ',');            // no slope on the first row
    CHECK(row2.back() != ',');            // cumulative slope present afterwards
    std::remove(path.c_str());
}
