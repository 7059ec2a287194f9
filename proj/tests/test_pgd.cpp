#include <doctest.h>

#include <cmath>

#include "micromacro/pgd.hpp"
#include "micromacro/rng.hpp"

using namespace micromacro;
using namespace micromacro::pgd;

namespace {

Eigen::MatrixXd sample_rhs(const ProductGrid& grid,
                           const std::function<double(double, double)>& f)
{
    Eigen::MatrixXd out(grid.nx, grid.ny);
    for (int i = 0; i < grid.nx; ++i)
        for (int j = 0; j < grid.ny; ++j)
            out(i, j) = f(grid.x(i), grid.y(j));
    return out;
}

double l2_norm(const Eigen::MatrixXd& g, const ProductGrid& grid)
{
    return std::sqrt(grid.hx() * grid.hy() * g.squaredNorm());
}

// Dirichlet energy 1/2 a(g,g) - (f,g) of a grid function
double dirichlet_energy(const Eigen::MatrixXd& g, const Eigen::MatrixXd& f,
                        const ProductGrid& grid)
{
    const Eigen::MatrixXd lap = apply_laplacian(g, grid);
    return grid.hx() * grid.hy() *
           (0.5 * (g.array() * lap.array()).sum() - (f.array() * g.array()).sum());
}

} // namespace

TEST_CASE("H^-1 norm: zero, eigenfunction identity and exact linearity")
{
    const ProductGrid grid{128, 128};
    CHECK(h_minus1_norm(Eigen::MatrixXd::Zero(grid.nx, grid.ny), grid) == 0.0);

    // f = 2 pi^2 sin(pi x) sin(pi y): |f|_{H^-1} = |f|_{L^2} / sqrt(2 pi^2)
    const auto f = sample_rhs(grid, [](double x, double y) {
        return 2.0 * M_PI * M_PI * std::sin(M_PI * x) * std::sin(M_PI * y);
    });
    const double lhs = h_minus1_norm(f, grid);
    const double rhs = l2_norm(f, grid) / std::sqrt(2.0 * M_PI * M_PI);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-3));

    CHECK(h_minus1_norm(2.0 * f, grid) == 2.0 * h_minus1_norm(f, grid));
}

TEST_CASE("full-grid Poisson oracle solves the eigenproblem")
{
    const ProductGrid grid{64, 64};
    const auto e1 = sample_rhs(
        grid, [](double x, double y) { return std::sin(M_PI * x) * std::sin(M_PI * y); });
    const Eigen::MatrixXd w = poisson_solve_full(e1, grid);
    // -lap w = e1 and e1 is an eigenfunction of the 5-point stencil
    const double mu = (2.0 - 2.0 * std::cos(M_PI * grid.hx())) / (grid.hx() * grid.hx()) +
                      (2.0 - 2.0 * std::cos(M_PI * grid.hy())) / (grid.hy() * grid.hy());
    CHECK((w - e1 / mu).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((apply_laplacian(w, grid) - e1).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rank-1 iteration: eigenfunction, zero rhs and local optimality")
{
    const ProductGrid grid{64, 64};
    SUBCASE("separable rhs returns the sine pair")
    {
        const auto f = sample_rhs(grid, [](double x, double y) {
            return 2.0 * M_PI * M_PI * std::sin(M_PI * x) * std::sin(M_PI * y);
        });
        const AlsResult als = pgd_iteration(f, grid);
        CHECK(als.converged);
        CHECK(als.euler_residual < 1e-9);
        // the r profile is the first sine mode up to normalization
        Eigen::VectorXd sine(grid.nx);
        for (int i = 0; i < grid.nx; ++i)
            sine(i) = std::sin(M_PI * grid.x(i));
        sine /= std::sqrt(grid.hx()) * sine.norm();
        const double sign = als.r(grid.nx / 2) > 0 ? 1.0 : -1.0;
        CHECK((sign * als.r - sine).cwiseAbs().maxCoeff() < 1e-6);
        // unit discrete L2 normalization of r
        CHECK(std::sqrt(grid.hx()) * als.r.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("zero rhs is flagged")
    {
        const AlsResult als = pgd_iteration(Eigen::MatrixXd::Zero(grid.nx, grid.ny), grid);
        CHECK(als.zero_rhs);
        CHECK(als.r.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("no random rank-1 competitor beats the Euler pair")
    {
        const auto f = sample_rhs(grid, [](double x, double y) {
            return std::exp(-3.0 * (x - 0.3) * (x - 0.3)) * (y + 0.2) +
                   std::sin(3.0 * x * y);
        });
        const AlsResult als = pgd_iteration(f, grid);
        const double energy = dirichlet_energy(als.r * als.s.transpose(), f, grid);
        const rng::StreamKey key{8080, rng::kDomainAux, 0, 0};
        for (std::uint32_t trial = 0; trial < 50; ++trial) {
            Eigen::VectorXd rho(grid.nx), sigma(grid.ny);
            for (int i = 0; i < grid.nx; ++i)
                rho(i) = rng::normal_pair(key, trial, static_cast<std::uint32_t>(i)).first;
            for (int j = 0; j < grid.ny; ++j)
                sigma(j) =
                    rng::normal_pair(key, trial, static_cast<std::uint32_t>(1000 + j)).second;
            // optimal scaling of the competitor pair, then compare energies
            const Eigen::MatrixXd cand = rho * sigma.transpose();
            const double a = (cand.array() * apply_laplacian(cand, grid).array()).sum();
            const double b = (f.array() * cand.array()).sum();
            if (a <= 0.0)
                continue;
            const double best_energy =
                grid.hx() * grid.hy() * (-0.5 * b * b / a);
            CHECK(energy <= best_energy + 1e-12);
        }
    }
}

TEST_CASE("greedy solve: separable and constant right-hand sides")
{
    SUBCASE("separable rhs needs one term")
    {
        const ProductGrid grid{128, 128};
        const auto f = sample_rhs(grid, [](double x, double y) {
            return 2.0 * M_PI * M_PI * std::sin(M_PI * x) * std::sin(M_PI * y);
        });
        const PgdSolution sol = pgd_solve(f, grid, 1e-8, 10);
        CHECK(sol.converged);
        CHECK(sol.terms.size() == 1);
        CHECK(sol.residual_history.back() < 1e-8);
        // against the continuous solution: only the 5-point discretization error
        const auto exact = sample_rhs(
            grid, [](double x, double y) { return std::sin(M_PI * x) * std::sin(M_PI * y); });
        CHECK(l2_norm(reconstruct(sol) - exact, grid) < 1e-3);
    }
    SUBCASE("constant rhs matches the full-grid oracle")
    {
        const ProductGrid grid{64, 64};
        const Eigen::MatrixXd f = Eigen::MatrixXd::Ones(grid.nx, grid.ny);
        const PgdSolution sol = pgd_solve(f, grid, 1e-8, 60);
        CHECK(sol.converged);
        const Eigen::MatrixXd oracle = poisson_solve_full(f, grid);
        CHECK(l2_norm(reconstruct(sol) - oracle, grid) < 1e-6);
        for (std::size_t k = 1; k < sol.residual_history.size(); ++k)
            CHECK(sol.residual_history[k] < sol.residual_history[k - 1]);
    }
    SUBCASE("term cap returns a flagged partial solution")
    {
        const ProductGrid grid{32, 32};
        const Eigen::MatrixXd f = Eigen::MatrixXd::Ones(grid.nx, grid.ny);
        const PgdSolution sol = pgd_solve(f, grid, 1e-12, 2);
        CHECK_FALSE(sol.converged);
        CHECK(sol.terms.size() == 2);
    }
}

TEST_CASE("greedy increments strictly decrease the Dirichlet energy")
{
    const ProductGrid grid{48, 48};
    const auto f =
        sample_rhs(grid, [](double x, double y) { return 1.0 / (1.0 + x + y); });
    const PgdSolution sol = pgd_solve(f, grid, 1e-10, 15);
    Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(grid.nx, grid.ny);
    double prev = 0.0;
    for (std::size_t k = 0; k < sol.terms.size(); ++k) {
        partial += sol.terms[k].r * sol.terms[k].s.transpose();
        const double energy = dirichlet_energy(partial, f, grid);
        CHECK(energy < prev - 1e-15);
        prev = energy;
    }
}

TEST_CASE("convergence rate report")
{
    SUBCASE("separable rhs hits the floor at one term: fit skipped")
    {
        const ProductGrid grid{64, 64};
        const auto f = sample_rhs(grid, [](double x, double y) {
            return 2.0 * M_PI * M_PI * std::sin(M_PI * x) * std::sin(M_PI * y);
        });
        const PgdSolution sol = pgd_solve(f, grid, 1e-8, 10);
        const auto report = convergence_rate_report(sol, poisson_solve_full(f, grid), grid);
        CHECK_FALSE(report.fitted);
    }
    SUBCASE("smooth non-separable rhs decays at least like n^{-0.3}")
    {
        const ProductGrid grid{48, 48};
        const auto f =
            sample_rhs(grid, [](double x, double y) { return 1.0 / (1.0 + x + y); });
        const PgdSolution sol = pgd_solve(f, grid, 1e-14, 12);
        const auto report = convergence_rate_report(sol, poisson_solve_full(f, grid), grid);
        CHECK(report.fitted);
        CHECK(report.slope <= -0.3);
        for (std::size_t k = 1; k < report.errors.size(); ++k)
            CHECK(report.errors[k] <= report.errors[k - 1] * (1.0 + 1e-12));
    }
}

TEST_CASE("grid validation")
{
    CHECK_THROWS_AS(ProductGrid({1, 8}).validate(), ConfigError);
    const ProductGrid grid{8, 8};
    CHECK_THROWS_AS(pgd_solve(Eigen::MatrixXd::Ones(4, 4), grid, 1e-8, 5), ConfigError);
    CHECK_THROWS_AS(pgd_solve(Eigen::MatrixXd::Ones(8, 8), grid, -1.0, 5), ConfigError);
}
