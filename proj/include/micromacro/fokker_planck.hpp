#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <vector>

#include "micromacro/common.hpp"
#include "micromacro/dumbbell_kinetics.hpp"

namespace micromacro::fokker {

using dumbbell::ForceModel;

/// Uniform Cartesian grid on [-L, L]^2 with n x n cells. For FENE springs
/// only cells whose centers satisfy |X| < sqrt(b) (1 - 1e-6) are active; the
/// staircase boundary carries zero flux.
struct GridSpec {
    int n = 128;
    double half_width = 6.0;

    double spacing() const { return 2.0 * half_width / n; }
    double cell_area() const { return spacing() * spacing(); }
    double center(int i) const { return -half_width + (i + 0.5) * spacing(); }
};

/// Discretized configuration-space density. Values on inactive (masked)
/// cells are identically zero.
class DensityGrid {
public:
    DensityGrid(const GridSpec& spec, const ForceModel& model);

    const GridSpec& spec() const { return spec_; }
    int n() const { return spec_.n; }
    double cell_area() const { return spec_.cell_area(); }
    bool active(int i, int j) const { return mask_[index(i, j)] != 0; }
    double value(int i, int j) const { return values_[index(i, j)]; }
    double& value(int i, int j) { return values_[index(i, j)]; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    Eigen::Vector2d center(int i, int j) const
    {
        return {spec_.center(i), spec_.center(j)};
    }
    std::size_t index(int i, int j) const
    {
        return static_cast<std::size_t>(j) * spec_.n + i;
    }

    double mass() const;
    void normalize(); ///< scales so that sum(values)*cell_area == 1
    /// Second-moment matrix of the density (grid quadrature).
    Eigen::Matrix2d second_moment() const;

    /// Snapshot with columns x,y,value over active cells.
    void write_csv(std::ostream& os) const;

private:
    GridSpec spec_;
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
};

/// Finite-volume discretization of
///   d(psi)/dt = div_X((-kappa X + (1/2We) grad Pi) psi) + (1/2We) lap psi
/// with zero-flux boundaries. Face fluxes use exponentially fitted
/// (Scharfetter-Gummel) coefficients driven by potential differences, so the
/// discrete equilibrium exp(-Pi + We X^T kappa_s X) is preserved exactly for
/// symmetric kappa and positivity holds for dt below the stability bound.
class FokkerPlanckOperator {
public:
    FokkerPlanckOperator(const ForceModel& model, const Eigen::Matrix2d& kappa, double we,
                         const GridSpec& spec);

    const ForceModel& model() const { return model_; }
    const GridSpec& grid() const { return spec_; }
    double max_stable_dt() const { return max_stable_dt_; }

    /// One explicit step; conserves mass to round-off and preserves
    /// positivity. Throws ConfigError when dt exceeds the stability bound.
    void step(DensityGrid& psi, double dt) const;

    /// Relative L1 change per unit time of the last step() call.
    double last_residual() const { return last_residual_; }

private:
    ForceModel model_;
    Eigen::Matrix2d kappa_;
    double we_;
    GridSpec spec_;
    double max_stable_dt_ = 0.0;
    // Face coefficient pairs (take-from-left, take-from-right), scaled by
    // D/h^2; x-faces between (i,j),(i+1,j), then y-faces.
    struct Face {
        std::uint32_t left, right;
        double from_left, from_right;
    };
    std::vector<Face> faces_;
    mutable double last_residual_ = 0.0;
};

/// Convenience wrapper building the operator for a single step.
void fp_step(DensityGrid& psi, const ForceModel& model, const Eigen::Matrix2d& kappa,
             double we, double dt);

struct StationaryResult {
    DensityGrid psi;
    bool analytic = false; ///< closed form used (kappa zero or symmetric)
    double residual = 0.0; ///< final relative change per unit time (marching)
    long steps = 0;
};

struct StationaryOptions {
    double residual_tol = 1e-10;
    long max_steps = 50'000'000;
    double dt_safety = 0.9; ///< fraction of the stability bound used
};

/// Stationary state of the configuration density. Closed-form for kappa zero
/// or symmetric (Hookean additionally needs eigenvalues of kappa below
/// 1/(2We), otherwise a NumericalError is raised); general kappa is
/// time-marched to the residual tolerance.
StationaryResult stationary_density(const ForceModel& model, const Eigen::Matrix2d& kappa,
                                    double we, const GridSpec& spec,
                                    const StationaryOptions& options = {});

/// H(psi | psi_inf) = sum psi ln(psi/psi_inf) * area, with 0 ln 0 = 0.
/// Throws NumericalError where psi > 0 on a cell with psi_inf = 0.
double relative_entropy(const DensityGrid& psi, const DensityGrid& psi_inf);

/// Fisher information sum |grad ln(psi/psi_inf)|^2 psi * area, centered
/// differences of the log-ratio (one-sided at mask/support edges).
double fisher_information(const DensityGrid& psi, const DensityGrid& psi_inf);

/// L1 distance sum |psi - psi_inf| * area.
double l1_distance(const DensityGrid& psi, const DensityGrid& psi_inf);

struct EntropyReport {
    double relative_entropy = 0.0;
    double fisher_information = 0.0;
    double l1_distance = 0.0;
};

EntropyReport entropy_report(const DensityGrid& psi, const DensityGrid& psi_inf);

/// Bakry-Emery convexity constant of the spring potential: the infimum over
/// sample points of the smallest Hessian eigenvalue. Exactly 1 for Hookean;
/// the FENE Hessian is I/(1-u) + (2/b) X(x)X /(1-u)^2, minimized at X = 0.
double lsi_constant_bakry_emery(const ForceModel& model, int radial_samples = 100,
                                int angular_samples = 100);

/// Holley-Stroock perturbation bound rho * exp(-osc).
double holley_stroock_bound(double rho, double perturbation_osc);

/// tau = (eps/We) (integral of X (x) F(X) psi dX - I), masked cells excluded.
Eigen::Matrix2d stress_from_density(const DensityGrid& psi, const ForceModel& model,
                                    double eps, double we);

/// Checks the stationary log-density gradient bound for the FENE model at
/// We = 1: max over well-resolved cells of |grad ln(psi_inf e^Pi) - 2 k_s X|
/// against 2 sqrt(b) |[k,k^T]| / (1 - 2|k_s|) (spectral norms). Requires
/// |k_s| < 1/2.
struct GradientBoundReport {
    double max_deviation = 0.0;
    double bound = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

GradientBoundReport stationary_gradient_bound_check(const DensityGrid& psi_inf, double b,
                                                    const Eigen::Matrix2d& kappa,
                                                    double tolerance = 5e-2,
                                                    double interior_fraction = 0.9);

} // namespace micromacro::fokker
