#include "micromacro/macro_models.hpp"

#include <cmath>

namespace micromacro::constitutive {

namespace {
constexpr double kSymTol = 1e-12;
constexpr double kLogEigenFloor = 1e-14;
} // namespace

double ConformationTensor::min_eigenvalue() const
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(entries, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void ConformationTensor::validate(double b) const
{
    if (entries.rows() != entries.cols() || entries.rows() < 2 || entries.rows() > 3)
        throw NumericalError("conformation tensor must be 2x2 or 3x3");
    const double asym = (entries - entries.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymTol)
        throw NumericalError("conformation tensor asymmetric by " + format_double(asym));
    if (!(min_eigenvalue() > 0.0))
        throw NumericalError("conformation tensor is not positive definite");
    if (b > 0.0 && !(entries.trace() < b))
        throw NumericalError("FENE-P closure requires tr A < b, got tr A = " +
                             format_double(entries.trace()));
}

Eigen::MatrixXd oldroyd_b_rhs(const ConformationTensor& a, const VelocityGradient& kappa,
                              double we)
{
    a.validate();
    const Eigen::MatrixXd& A = a.entries;
    const Eigen::MatrixXd& K = kappa.entries;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    return K * A + A * K.transpose() - (A - eye) / we;
}

Eigen::MatrixXd fene_p_rhs(const ConformationTensor& a, const VelocityGradient& kappa,
                           double we, double b)
{
    a.validate();
    const Eigen::MatrixXd& A = a.entries;
    const double tr = A.trace();
    if (!(tr < b))
        throw NumericalError("FENE-P right-hand side requires tr A < b, got tr A = " +
                             format_double(tr));
    const Eigen::MatrixXd& K = kappa.entries;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    return K * A + A * K.transpose() - A / (we * (1.0 - tr / b)) + eye / we;
}

Eigen::MatrixXd corotational_rhs(const ConformationTensor& a, const VelocityGradient& kappa,
                                 double we)
{
    a.validate();
    const Eigen::MatrixXd& A = a.entries;
    const Eigen::MatrixXd W = kappa.skew_part();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    return W * A + A * W.transpose() - (A - eye) / we;
}

Eigen::MatrixXd stress_from_conformation(const ConformationTensor& a, double eps, double we)
{
    a.validate();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(a.dim(), a.dim());
    return (eps / we) * (a.entries - eye);
}

ConformationTensor conformation_from_stress(const Eigen::MatrixXd& tau, double eps, double we)
{
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(tau.rows(), tau.cols());
    return ConformationTensor((we / eps) * tau + eye);
}

namespace {

// Implicit trace update for FENE-P: find T' in (0, b) with
//   T' (1 + (dt/We) / (1 - T'/b)) = rhs.
// phi is strictly increasing, so a bracketed Newton iteration is safe.
double solve_fene_p_trace(double rhs, double b, double dt_over_we)
{
    if (!(rhs > 0.0))
        throw NumericalError("FENE-P implicit trace equation has no positive root");
    auto phi = [&](double t) { return t + dt_over_we * t / (1.0 - t / b) - rhs; };
    double lo = 0.0;
    double hi = b * (1.0 - 1e-14);
    if (phi(hi) < 0.0)
        throw NumericalError("FENE-P implicit trace equation: root at the extensibility limit");
    double t = std::min(rhs / (1.0 + dt_over_we), 0.5 * hi);
    for (int it = 0; it < 100; ++it) {
        const double f = phi(t);
        if (std::abs(f) < 1e-14 * (1.0 + rhs))
            return t;
        if (f > 0.0)
            hi = t;
        else
            lo = t;
        const double om = 1.0 - t / b;
        const double deriv = 1.0 + dt_over_we / (om * om);
        double next = t - f / deriv;
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        t = next;
    }
    return t;
}

} // namespace

Eigen::MatrixXd semi_implicit_step(MacroModel model, const Eigen::MatrixXd& a,
                                   const Eigen::MatrixXd& kappa, double we, double b, double dt)
{
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    const double mu = dt / we;
    Eigen::MatrixXd deformation;
    if (model == MacroModel::Corotational) {
        const Eigen::MatrixXd w = 0.5 * (kappa - kappa.transpose());
        deformation = w * a + a * w.transpose();
    } else {
        deformation = kappa * a + a * kappa.transpose();
    }
    const Eigen::MatrixXd numerator = a + dt * deformation + mu * eye;
    if (model == MacroModel::FeneP) {
        const double rhs = numerator.trace();
        const double tr_next = solve_fene_p_trace(rhs, b, mu);
        const double factor = 1.0 + mu / (1.0 - tr_next / b);
        return numerator / factor;
    }
    return numerator / (1.0 + mu);
}

Trajectory integrate_homogeneous(MacroModel model,
                                 const std::function<Eigen::MatrixXd(double)>& kappa_of_t,
                                 const ConformationTensor& a0, const FlowParams& params,
                                 double b, double t_end, int store_every)
{
    params.validate();
    if (!(params.dt < params.weissenberg))
        throw ConfigError("homogeneous integrator requires dt < weissenberg");
    if (model == MacroModel::FeneP)
        a0.validate(b);
    else
        a0.validate();

    Trajectory traj;
    Eigen::MatrixXd a = a0.entries;
    double t = 0.0;
    traj.times.push_back(t);
    traj.tensors.emplace_back(a);
    const int steps = static_cast<int>(std::llround(t_end / params.dt));
    for (int n = 0; n < steps; ++n) {
        const Eigen::MatrixXd kappa = kappa_of_t(t);
        Eigen::MatrixXd next;
        double sub_dt = params.dt;
        int halvings = 0;
        // A full step may lose definiteness; retry with halved substeps.
        for (;;) {
            Eigen::MatrixXd trial = a;
            bool ok = true;
            const int substeps = 1 << halvings;
            for (int s = 0; s < substeps && ok; ++s) {
                trial = semi_implicit_step(model, trial, kappa, params.weissenberg, b, sub_dt);
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(trial,
                                                                  Eigen::EigenvaluesOnly);
                ok = es.eigenvalues().minCoeff() > 0.0 &&
                     (model != MacroModel::FeneP || trial.trace() < b);
            }
            if (ok) {
                next = trial;
                break;
            }
            if (++halvings > 20)
                throw NumericalError("homogeneous integrator lost positive definiteness at t = " +
                                     format_double(t));
            sub_dt = params.dt / (1 << halvings);
        }
        a = next;
        t += params.dt;
        if ((n + 1) % store_every == 0 || n + 1 == steps) {
            traj.times.push_back(t);
            traj.tensors.emplace_back(a);
        }
    }
    return traj;
}

double trace_log(const Eigen::MatrixXd& a)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    double sum = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        sum += std::log(std::max(es.eigenvalues()[i], kLogEigenFloor));
    return sum;
}

FreeEnergyRecord oldroyd_b_free_energy(double u_l2_sq,
                                       const std::vector<ConformationTensor>& field,
                                       const std::vector<double>& measures,
                                       const FlowParams& params)
{
    params.validate();
    if (field.size() != measures.size())
        throw ConfigError("free energy: one measure per tensor required");
    FreeEnergyRecord rec;
    rec.kinetic = 0.5 * params.reynolds * u_l2_sq;
    const double we = params.weissenberg;
    for (std::size_t c = 0; c < field.size(); ++c) {
        field[c].validate();
        const Eigen::MatrixXd& A = field[c].entries;
        const int d = field[c].dim();
        rec.entropic += measures[c] * (A.trace() - trace_log(A) - d);
        rec.dissipation += measures[c] * (A.trace() + A.inverse().trace() - 2.0 * d);
    }
    rec.entropic *= params.epsilon / (2.0 * we);
    rec.dissipation *= params.epsilon / (2.0 * we * we);
    rec.total = rec.kinetic + rec.entropic;
    return rec;
}

FreeEnergyRecord fene_p_free_energy(const std::vector<ConformationTensor>& field,
                                    const std::vector<double>& measures,
                                    const FlowParams& params, double b, double u_l2_sq)
{
    params.validate();
    if (field.size() != measures.size())
        throw ConfigError("free energy: one measure per tensor required");
    FreeEnergyRecord rec;
    rec.kinetic = 0.5 * params.reynolds * u_l2_sq;
    const double we = params.weissenberg;
    for (std::size_t c = 0; c < field.size(); ++c) {
        field[c].validate(b);
        const Eigen::MatrixXd& A = field[c].entries;
        const int d = field[c].dim();
        const double om = 1.0 - A.trace() / b;
        const double constant = (b + d) * std::log(b / (b + d));
        rec.entropic += measures[c] * (-trace_log(A) - b * std::log(om) + constant);
        const double tr_inv = A.inverse().trace();
        rec.dissipation += measures[c] * (A.trace() / (om * om) - 2.0 * d / om + tr_inv);
    }
    rec.entropic *= params.epsilon / (2.0 * we);
    rec.dissipation *= params.epsilon / (2.0 * we * we);
    rec.total = rec.kinetic + rec.entropic;
    return rec;
}

double energy_functional(const std::vector<ConformationTensor>& field,
                         const std::vector<double>& measures, double u_l2_sq,
                         const FlowParams& params)
{
    params.validate();
    if (field.size() != measures.size())
        throw ConfigError("energy functional: one measure per tensor required");
    double spring = 0.0;
    for (std::size_t c = 0; c < field.size(); ++c)
        spring += measures[c] * field[c].entries.trace();
    return 0.5 * params.reynolds * u_l2_sq +
           params.epsilon / (2.0 * params.weissenberg) * spring;
}

} // namespace micromacro::constitutive
