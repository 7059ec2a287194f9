#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "micromacro/common.hpp"
#include "micromacro/dumbbell_kinetics.hpp"

namespace micromacro::constitutive {

using dumbbell::FlowParams;

/// Symmetric positive-definite conformation tensor A = E(X (x) X).
struct ConformationTensor {
    Eigen::MatrixXd entries;

    ConformationTensor() = default;
    explicit ConformationTensor(Eigen::MatrixXd a) : entries(std::move(a)) {}
    static ConformationTensor identity(int d)
    {
        return ConformationTensor(Eigen::MatrixXd::Identity(d, d));
    }

    int dim() const { return static_cast<int>(entries.rows()); }
    double min_eigenvalue() const;
    /// Throws NumericalError unless symmetric to 1e-12 and positive definite
    /// (and tr A < b when a finite extensibility is supplied).
    void validate(double b = 0.0) const;
};

/// Velocity gradient with its symmetric/skew decomposition.
struct VelocityGradient {
    Eigen::MatrixXd entries;

    VelocityGradient() = default;
    explicit VelocityGradient(Eigen::MatrixXd k) : entries(std::move(k)) {}
    static VelocityGradient zero(int d) { return VelocityGradient(Eigen::MatrixXd::Zero(d, d)); }
    static VelocityGradient simple_shear(double rate)
    {
        Eigen::MatrixXd k = Eigen::MatrixXd::Zero(2, 2);
        k(0, 1) = rate;
        return VelocityGradient(k);
    }

    Eigen::MatrixXd symmetric_part() const { return 0.5 * (entries + entries.transpose()); }
    Eigen::MatrixXd skew_part() const { return 0.5 * (entries - entries.transpose()); }
    /// Commutation bracket [k, k^T] = k k^T - k^T k.
    Eigen::MatrixXd commutator() const
    {
        return entries * entries.transpose() - entries.transpose() * entries;
    }
};

/// d/dt A for the Oldroyd-B model: kappa A + A kappa^T - (A - I)/We.
Eigen::MatrixXd oldroyd_b_rhs(const ConformationTensor& a, const VelocityGradient& kappa,
                              double we);

/// d/dt A for the FENE-P closure:
/// kappa A + A kappa^T - (1/We) A/(1 - trA/b) + I/We. Requires tr A < b.
Eigen::MatrixXd fene_p_rhs(const ConformationTensor& a, const VelocityGradient& kappa,
                           double we, double b);

/// d/dt A with the corotational derivative: W A + A W^T - (A - I)/We,
/// W the skew part of kappa.
Eigen::MatrixXd corotational_rhs(const ConformationTensor& a, const VelocityGradient& kappa,
                                 double we);

/// tau = (eps/We) (A - I).
Eigen::MatrixXd stress_from_conformation(const ConformationTensor& a, double eps, double we);

/// A = (We/eps) tau + I.
ConformationTensor conformation_from_stress(const Eigen::MatrixXd& tau, double eps, double we);

enum class MacroModel { OldroydB, FeneP, Corotational };

/// One semi-implicit step: deformation terms explicit, relaxation implicit
/// (for FENE-P the nonlinear trace factor is resolved by a scalar Newton
/// solve). Preserves symmetry exactly; may return a non-SPD tensor for large
/// dt, which callers handle by step halving.
Eigen::MatrixXd semi_implicit_step(MacroModel model, const Eigen::MatrixXd& a,
                                   const Eigen::MatrixXd& kappa, double we, double b, double dt);

struct Trajectory {
    std::vector<double> times;
    std::vector<ConformationTensor> tensors;
};

/// Integrates the homogeneous-flow constitutive ODE on [0, T] under a
/// prescribed kappa(t). Every reported tensor is SPD; a step producing an
/// indefinite tensor is retried with halved dt up to 20 times before a
/// NumericalError is raised. Requires dt < We.
Trajectory integrate_homogeneous(MacroModel model,
                                 const std::function<Eigen::MatrixXd(double)>& kappa_of_t,
                                 const ConformationTensor& a0, const FlowParams& params,
                                 double b, double t_end, int store_every = 1);

/// Free energy and its dissipation functional, both nonnegative.
struct FreeEnergyRecord {
    double kinetic = 0.0;
    double entropic = 0.0;
    double total = 0.0;
    double dissipation = 0.0;
};

/// F = (Re/2)|u|^2 + (eps/2We) sum_c w_c tr(A_c - ln A_c - I), with the
/// dissipation (eps/2We^2) sum_c w_c tr(A_c + A_c^-1 - 2I).
FreeEnergyRecord oldroyd_b_free_energy(double u_l2_sq,
                                       const std::vector<ConformationTensor>& field,
                                       const std::vector<double>& measures,
                                       const FlowParams& params);

/// FENE-P analogue. The additive constant (b+d) ln(b/(b+d)) makes the
/// entropic part vanish exactly at the equilibrium tensor b/(b+d) I.
FreeEnergyRecord fene_p_free_energy(const std::vector<ConformationTensor>& field,
                                    const std::vector<double>& measures,
                                    const FlowParams& params, double b, double u_l2_sq = 0.0);

/// The non-dissipative energy (Re/2)|u|^2 + (eps/2We) sum_c w_c tr A_c,
/// kept as a diagnostic: it need not decrease along relaxations.
double energy_functional(const std::vector<ConformationTensor>& field,
                         const std::vector<double>& measures, double u_l2_sq,
                         const FlowParams& params);

/// tr(ln A) by symmetric eigendecomposition, eigenvalues floored at 1e-14.
double trace_log(const Eigen::MatrixXd& a);

} // namespace micromacro::constitutive
