#include "micromacro/pgd.hpp"

#include <cmath>

namespace micromacro::pgd {

namespace {

// tridiag(-1, 2, -1)/h^2 applied to a vector
Eigen::VectorXd apply_lap_1d(const Eigen::VectorXd& v, double h)
{
    const int n = static_cast<int>(v.size());
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) {
        double acc = 2.0 * v[i];
        if (i > 0)
            acc -= v[i - 1];
        if (i + 1 < n)
            acc -= v[i + 1];
        out[i] = acc / (h * h);
    }
    return out;
}

// solves [a Lx + c I] u = rhs, tridiagonal
Eigen::VectorXd solve_shifted_lap_1d(double a, double c, const Eigen::VectorXd& rhs, double h)
{
    const int n = static_cast<int>(rhs.size());
    const double diag = 2.0 * a / (h * h) + c;
    const double off = -a / (h * h);
    std::vector<double> lower(n - 1, off), d(n, diag), upper(n - 1, off),
        b(rhs.data(), rhs.data() + n);
    const auto sol = solve_tridiagonal(lower, d, upper, b);
    return Eigen::Map<const Eigen::VectorXd>(sol.data(), n);
}

// orthonormal discrete sine basis and Dirichlet Laplacian eigenvalues
void sine_basis(int n, double h, Eigen::MatrixXd& basis, Eigen::VectorXd& eigenvalues)
{
    basis.resize(n, n);
    eigenvalues.resize(n);
    const double norm = std::sqrt(2.0 * h);
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < n; ++i)
            basis(i, k) = norm * std::sin((i + 1) * (k + 1) * M_PI * h);
        eigenvalues(k) = (2.0 - 2.0 * std::cos((k + 1) * M_PI * h)) / (h * h);
    }
}

double rank1_energy(const Eigen::MatrixXd& f, const Eigen::VectorXd& r,
                    const Eigen::VectorXd& s, double hx, double hy)
{
    const double rr = r.squaredNorm();
    const double ss = s.squaredNorm();
    const double rLr = r.dot(apply_lap_1d(r, hx));
    const double sLs = s.dot(apply_lap_1d(s, hy));
    const double load = r.dot(f * s);
    return 0.5 * (rLr * ss + rr * sLs) - load;
}

} // namespace

AlsResult pgd_iteration(const Eigen::MatrixXd& f_residual, const ProductGrid& grid,
                        double als_tol, int als_max)
{
    grid.validate();
    if (f_residual.rows() != grid.nx || f_residual.cols() != grid.ny)
        throw ConfigError("pgd_iteration: residual shape does not match the grid");
    if (!f_residual.allFinite())
        throw ConfigError("pgd_iteration: residual has non-finite entries");

    AlsResult out;
    out.r = Eigen::VectorXd::Zero(grid.nx);
    out.s = Eigen::VectorXd::Zero(grid.ny);
    if (f_residual.cwiseAbs().maxCoeff() == 0.0) {
        out.zero_rhs = true;
        out.converged = true;
        return out;
    }

    const double hx = grid.hx(), hy = grid.hy();
    // one power-iteration step toward the dominant right singular direction
    Eigen::VectorXd s = f_residual.transpose() * Eigen::VectorXd::Ones(grid.nx);
    if (s.cwiseAbs().maxCoeff() == 0.0)
        s = Eigen::VectorXd::Ones(grid.ny);
    s /= std::sqrt(hy) * s.norm();

    // larger relative residual of the two 1D Euler equations
    auto euler_residual = [&](const Eigen::VectorXd& rr_, const Eigen::VectorXd& ss_) {
        const double ss = ss_.squaredNorm();
        const double sLs = ss_.dot(apply_lap_1d(ss_, hy));
        const Eigen::VectorXd res_r =
            ss * apply_lap_1d(rr_, hx) + sLs * rr_ - f_residual * ss_;
        const double rr = rr_.squaredNorm();
        const double rLr = rr_.dot(apply_lap_1d(rr_, hx));
        const Eigen::VectorXd res_s =
            rr * apply_lap_1d(ss_, hy) + rLr * ss_ - f_residual.transpose() * rr_;
        const double scale_r = std::max(1e-300, (f_residual * ss_).norm());
        const double scale_s = std::max(1e-300, (f_residual.transpose() * rr_).norm());
        return std::max(res_r.norm() / scale_r, res_s.norm() / scale_s);
    };

    Eigen::VectorXd r;
    double energy_prev = 0.0;
    for (int sweep = 0; sweep < als_max; ++sweep) {
        // hold s, solve for r
        const double ss = hy * s.squaredNorm();
        const double sLs = hy * s.dot(apply_lap_1d(s, hy));
        r = solve_shifted_lap_1d(ss, sLs, hy * (f_residual * s), hx);
        // hold r, solve for s
        const double rr = hx * r.squaredNorm();
        const double rLr = hx * r.dot(apply_lap_1d(r, hx));
        s = solve_shifted_lap_1d(rr, rLr, hx * (f_residual.transpose() * r), hy);

        const double energy = hx * hy * rank1_energy(f_residual, r, s, hx, hy);
        out.sweeps = sweep + 1;
        out.euler_residual = euler_residual(r, s);
        if (sweep > 0 &&
            std::abs(energy - energy_prev) <= als_tol * std::max(1.0, std::abs(energy)) &&
            out.euler_residual <= 10.0 * als_tol) {
            out.converged = true;
            break;
        }
        energy_prev = energy;
    }

    // normalization convention: r carries unit discrete L2 norm
    const double rnorm = std::sqrt(hx) * r.norm();
    if (rnorm > 0.0) {
        r /= rnorm;
        s *= rnorm;
    }
    out.r = r;
    out.s = s;
    return out;
}

PgdSolution pgd_solve(const Eigen::MatrixXd& f, const ProductGrid& grid, double eps_tol,
                      int n_max)
{
    grid.validate();
    if (!(eps_tol > 0.0))
        throw ConfigError("pgd_solve: eps_tol must be > 0");
    if (n_max < 1)
        throw ConfigError("pgd_solve: n_max must be >= 1");

    PgdSolution solution;
    Eigen::MatrixXd residual = f;
    if (h_minus1_norm(residual, grid) < eps_tol) {
        solution.converged = true;
        return solution;
    }
    for (int n = 0; n < n_max; ++n) {
        const AlsResult als = pgd_iteration(residual, grid);
        if (als.zero_rhs)
            break;
        if (!als.converged)
            solution.als_warning = true;
        solution.terms.push_back({als.r, als.s});
        residual -= apply_lap_1d(als.r, grid.hx()) * als.s.transpose() +
                    als.r * apply_lap_1d(als.s, grid.hy()).transpose();
        const double res_norm = h_minus1_norm(residual, grid);
        solution.residual_history.push_back(res_norm);
        if (res_norm < eps_tol) {
            solution.converged = true;
            break;
        }
    }
    return solution;
}

Eigen::MatrixXd poisson_solve_full(const Eigen::MatrixXd& f, const ProductGrid& grid)
{
    grid.validate();
    if (f.rows() != grid.nx || f.cols() != grid.ny)
        throw ConfigError("poisson_solve_full: shape mismatch");
    Eigen::MatrixXd sx, sy;
    Eigen::VectorXd mu, nu;
    sine_basis(grid.nx, grid.hx(), sx, mu);
    sine_basis(grid.ny, grid.hy(), sy, nu);
    Eigen::MatrixXd coeffs = sx.transpose() * f * sy;
    for (int i = 0; i < grid.nx; ++i)
        for (int j = 0; j < grid.ny; ++j)
            coeffs(i, j) /= mu(i) + nu(j);
    return sx * coeffs * sy.transpose();
}

double h_minus1_norm(const Eigen::MatrixXd& f, const ProductGrid& grid)
{
    if (f.cwiseAbs().maxCoeff() == 0.0)
        return 0.0;
    const Eigen::MatrixXd w = poisson_solve_full(f, grid);
    const double pairing = grid.hx() * grid.hy() * (f.array() * w.array()).sum();
    return std::sqrt(std::max(0.0, pairing));
}

Eigen::MatrixXd apply_laplacian(const Eigen::MatrixXd& g, const ProductGrid& grid)
{
    grid.validate();
    Eigen::MatrixXd out(grid.nx, grid.ny);
    const double ihx2 = 1.0 / (grid.hx() * grid.hx());
    const double ihy2 = 1.0 / (grid.hy() * grid.hy());
    for (int i = 0; i < grid.nx; ++i)
        for (int j = 0; j < grid.ny; ++j) {
            double acc = 2.0 * (ihx2 + ihy2) * g(i, j);
            if (i > 0)
                acc -= ihx2 * g(i - 1, j);
            if (i + 1 < grid.nx)
                acc -= ihx2 * g(i + 1, j);
            if (j > 0)
                acc -= ihy2 * g(i, j - 1);
            if (j + 1 < grid.ny)
                acc -= ihy2 * g(i, j + 1);
            out(i, j) = acc;
        }
    return out;
}

Eigen::MatrixXd reconstruct(const PgdSolution& solution, int n)
{
    if (solution.terms.empty())
        throw ConfigError("reconstruct: empty solution");
    const int count = n < 0 ? static_cast<int>(solution.terms.size())
                            : std::min<int>(n, solution.terms.size());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(solution.terms[0].r.size(),
                                              solution.terms[0].s.size());
    for (int k = 0; k < count; ++k)
        g += solution.terms[k].r * solution.terms[k].s.transpose();
    return g;
}

RateReport convergence_rate_report(const PgdSolution& solution,
                                   const Eigen::MatrixXd& reference, const ProductGrid& grid)
{
    RateReport report;
    if (solution.terms.empty())
        return report;
    Eigen::MatrixXd partial =
        Eigen::MatrixXd::Zero(reference.rows(), reference.cols());
    const double ref_energy = std::sqrt(
        grid.hx() * grid.hy() *
        (reference.array() * apply_laplacian(reference, grid).array()).sum());
    for (const auto& term : solution.terms) {
        partial += term.r * term.s.transpose();
        const Eigen::MatrixXd diff = partial - reference;
        const double err = std::sqrt(std::max(
            0.0,
            grid.hx() * grid.hy() * (diff.array() * apply_laplacian(diff, grid).array()).sum()));
        report.errors.push_back(err);
    }
    const double floor = 1e-10 * std::max(1.0, ref_energy);
    bool hit_floor = false;
    std::vector<double> ns, errs;
    for (std::size_t k = 0; k < report.errors.size(); ++k) {
        if (report.errors[k] <= floor) {
            hit_floor = true;
            break;
        }
        ns.push_back(static_cast<double>(k + 1));
        errs.push_back(report.errors[k]);
    }
    if (ns.size() >= 8 && !hit_floor) {
        report.slope = fit_loglog(ns, errs).slope;
        report.fitted = true;
    }
    return report;
}

} // namespace micromacro::pgd
