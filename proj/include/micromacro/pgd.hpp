#pragma once

#include <Eigen/Dense>
#include <vector>

#include "micromacro/common.hpp"

namespace micromacro::pgd {

/// Tensor-product grid on (0,1)^2 with homogeneous Dirichlet boundary:
/// nx x ny interior nodes, second-order centered differences per direction.
struct ProductGrid {
    int nx = 64;
    int ny = 64;

    double hx() const { return 1.0 / (nx + 1); }
    double hy() const { return 1.0 / (ny + 1); }
    double x(int i) const { return (i + 1) * hx(); }
    double y(int j) const { return (j + 1) * hy(); }
    void validate() const
    {
        if (nx < 2 || ny < 2)
            throw ConfigError("product grid needs nx, ny >= 2");
    }
};

/// Rank-1 term r (x) s; r carries unit discrete L2 norm, the scale lives in s.
struct PgdTerm {
    Eigen::VectorXd r;
    Eigen::VectorXd s;
};

struct PgdSolution {
    std::vector<PgdTerm> terms;
    std::vector<double> residual_history; ///< H^-1 residual after each term
    bool converged = false;               ///< reached eps_tol before n_max
    bool als_warning = false;             ///< some ALS sweep hit its iteration cap
};

struct AlsResult {
    Eigen::VectorXd r;
    Eigen::VectorXd s;
    bool converged = false;
    bool zero_rhs = false;
    int sweeps = 0;
    double euler_residual = 0.0; ///< relative residual of the two 1D systems
};

/// Best rank-1 correction for the current residual: alternating 1D solves of
/// the Euler system of  min 1/2 |grad(r x s)|^2 - (f, r x s),
///   [ (s,s) Lx + (s,Ly s) I ] r = F s   and symmetrically in s,
/// each a tridiagonal solve, iterated until the rank-1 energy stalls.
AlsResult pgd_iteration(const Eigen::MatrixXd& f_residual, const ProductGrid& grid,
                        double als_tol = 1e-10, int als_max = 200);

/// Greedy sum of rank-1 terms: iterate pgd_iteration on the running residual
/// f_n = f + lap(sum_k r_k x s_k) until |f_n|_{H^-1} < eps_tol or n_max terms.
PgdSolution pgd_solve(const Eigen::MatrixXd& f, const ProductGrid& grid, double eps_tol,
                      int n_max);

/// H^-1 norm of a grid function: solve the full-grid Poisson problem
/// -lap w = f (fast diagonalization in the discrete sine basis) and return
/// sqrt(hx hy sum f w).
double h_minus1_norm(const Eigen::MatrixXd& f, const ProductGrid& grid);

/// Direct full-grid Poisson solve, used as the oracle and by h_minus1_norm.
Eigen::MatrixXd poisson_solve_full(const Eigen::MatrixXd& f, const ProductGrid& grid);

/// 5-point discrete -lap of a grid function (homogeneous boundary).
Eigen::MatrixXd apply_laplacian(const Eigen::MatrixXd& g, const ProductGrid& grid);

/// Partial sum of the first n terms (all when n < 0).
Eigen::MatrixXd reconstruct(const PgdSolution& solution, int n = -1);

/// Energy-norm error |g_n - reference|_A per term count, fitted log-log.
struct RateReport {
    std::vector<double> errors;
    double slope = 0.0;
    bool fitted = false; ///< false when < 8 terms or the error floor was hit
};

RateReport convergence_rate_report(const PgdSolution& solution,
                                   const Eigen::MatrixXd& reference, const ProductGrid& grid);

} // namespace micromacro::pgd
