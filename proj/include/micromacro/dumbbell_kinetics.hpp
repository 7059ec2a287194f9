#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "micromacro/common.hpp"
#include "micromacro/rng.hpp"

namespace micromacro::dumbbell {

/// Nondimensional groups of the coupled polymer/solvent system plus the
/// timestep used by the stochastic integrators.
struct FlowParams {
    double reynolds = 1.0;
    double weissenberg = 1.0;
    double epsilon = 0.5; ///< polymer fraction of the total viscosity, in (0,1)
    double dt = 1e-3;

    void validate() const;
};

enum class SpringType { Hookean, Fene };

/// Entropic spring law. The FENE spring confines the end-to-end vector to the
/// open ball of radius sqrt(b).
struct ForceModel {
    SpringType type = SpringType::Hookean;
    double b = 0.0;

    static ForceModel hookean() { return {SpringType::Hookean, 0.0}; }
    static ForceModel fene(double b);

    bool is_fene() const { return type == SpringType::Fene; }
    /// Largest admissible |x|^2 (infinite for Hookean).
    double max_sq_norm() const;
};

/// Spring force F(x): x for Hookean, x / (1 - |x|^2/b) for FENE.
/// Throws NumericalError when a FENE configuration reaches |x| >= sqrt(b).
Eigen::VectorXd spring_force(const ForceModel& model, const Eigen::VectorXd& x);

/// Spring potential with F = grad(potential).
double spring_potential(const ForceModel& model, const Eigen::VectorXd& x);

/// One equilibrium draw from Z^-1 exp(-Pi) for the given stream address.
void equilibrium_draw(const ForceModel& model, const rng::StreamKey& key, int dim,
                      double* out);

/// Source of Gaussian increments for the Euler-Maruyama update. Increments
/// are addressed, never stored, so rejected FENE proposals can redraw by
/// bumping `attempt` and parallel schedules cannot change the stream.
class IncrementSource {
public:
    virtual ~IncrementSource() = default;
    /// Writes `dim` standard normal variates for the given address.
    virtual void normals(std::uint32_t cell, std::uint32_t replica, std::uint32_t step,
                         std::uint32_t attempt, int dim, double* out) const = 0;
};

/// Increments independent across cells, replicas and steps.
class IndependentIncrements final : public IncrementSource {
public:
    explicit IndependentIncrements(std::uint64_t seed) : seed_(seed) {}
    void normals(std::uint32_t cell, std::uint32_t replica, std::uint32_t step,
                 std::uint32_t attempt, int dim, double* out) const override;

private:
    std::uint64_t seed_;
};

/// Deterministic zero increments; drift-only stepping for tests.
class ZeroIncrements final : public IncrementSource {
public:
    void normals(std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t, int dim,
                 double* out) const override
    {
        for (int k = 0; k < dim; ++k)
            out[k] = 0.0;
    }
};

/// Monte Carlo configuration state: `replicas` end-to-end vectors per spatial
/// cell, stored contiguously as [cell][replica][component].
class DumbbellEnsemble {
public:
    DumbbellEnsemble(int dim, int cells, int replicas, std::uint64_t rng_root);

    /// Ensemble drawn from the equilibrium law Z^-1 exp(-Pi). Gaussian for
    /// Hookean springs; rejection sampling inside the ball for FENE.
    static DumbbellEnsemble equilibrium(int dim, int cells, int replicas,
                                        const ForceModel& model, std::uint64_t rng_root);

    int dim() const { return dim_; }
    int cells() const { return cells_; }
    int replicas() const { return replicas_; }
    std::uint64_t rng_root() const { return rng_root_; }

    double* cell_data(int cell) { return data_.data() + static_cast<std::size_t>(cell) * replicas_ * dim_; }
    const double* cell_data(int cell) const
    {
        return data_.data() + static_cast<std::size_t>(cell) * replicas_ * dim_;
    }
    double component(int cell, int replica, int k) const
    {
        return cell_data(cell)[static_cast<std::size_t>(replica) * dim_ + k];
    }
    double& component(int cell, int replica, int k)
    {
        return cell_data(cell)[static_cast<std::size_t>(replica) * dim_ + k];
    }

    /// Largest |X| over the whole ensemble.
    double max_norm() const;

    /// Snapshot with columns cell,replica,x,y[,z].
    void write_csv(std::ostream& os) const;

private:
    int dim_;
    int cells_;
    int replicas_;
    std::uint64_t rng_root_;
    std::vector<double> data_;
};

struct EvolveOptions {
    int max_redraws = 100;          ///< FENE proposal redraws before failing
    double boundary_margin = 1e-12; ///< proposals must stay in |x| < sqrt(b)*(1-margin)
    bool enforce_dt_guard = true;   ///< require dt <= weissenberg/10 for FENE
};

/// One Euler-Maruyama step of every replica under a single velocity gradient:
///   X <- X + (kappa X - F(X)/(2 We)) dt + sqrt(dt/We) xi.
/// FENE proposals leaving the ball redraw their Gaussian increment, up to
/// options.max_redraws, after which a NumericalError names the cell/replica.
void evolve_ensemble(DumbbellEnsemble& ens, const ForceModel& model,
                     const Eigen::MatrixXd& kappa, const FlowParams& params,
                     const IncrementSource& increments, std::uint32_t step,
                     const EvolveOptions& options = {});

/// Same update with one velocity gradient per cell (coupled solvers).
void evolve_ensemble_per_cell(DumbbellEnsemble& ens, const ForceModel& model,
                              const std::vector<Eigen::MatrixXd>& kappa_per_cell,
                              const FlowParams& params, const IncrementSource& increments,
                              std::uint32_t step, const EvolveOptions& options = {});

/// Symmetric d x d polymeric stress, nondimensional Kramers form.
using StressTensor = Eigen::MatrixXd;

/// Kramers stress per cell: tau = (eps/We) ((1/K) sum_k X_k (x) F(X_k) - I).
/// The replica sum runs in fixed ascending order (chunked) so results are
/// bit-identical for any thread count.
std::vector<StressTensor> kramers_stress(const DumbbellEnsemble& ens, const ForceModel& model,
                                         const FlowParams& params);

/// Second-moment matrix (1/K) sum_k X_k (x) X_k per cell, fixed-order sum.
std::vector<Eigen::MatrixXd> second_moment(const DumbbellEnsemble& ens);

} // namespace micromacro::dumbbell
