#include "micromacro/fokker_planck.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace micromacro::fokker {

namespace {

constexpr double kMaskShrink = 1e-6; // FENE cells active for |X| < sqrt(b)(1 - shrink)

double potential(const ForceModel& model, double x, double y)
{
    const double sq = x * x + y * y;
    if (!model.is_fene())
        return 0.5 * sq;
    return -0.5 * model.b * std::log(1.0 - sq / model.b);
}

/// B(x) = x / (e^x - 1), the exponential-fitting weight.
double bernoulli(double x)
{
    if (std::abs(x) < 1e-10)
        return 1.0 - 0.5 * x;
    if (x > 0.0) {
        const double e = std::exp(-x);
        return x * e / (1.0 - e);
    }
    return -x / (1.0 - std::exp(x));
}

double spectral_norm_sym(const Eigen::Matrix2d& m)
{
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace

DensityGrid::DensityGrid(const GridSpec& spec, const ForceModel& model) : spec_(spec)
{
    if (spec.n < 4)
        throw ConfigError("density grid needs at least 4 cells per direction");
    values_.assign(static_cast<std::size_t>(spec.n) * spec.n, 0.0);
    mask_.assign(values_.size(), 1);
    if (model.is_fene()) {
        const double limit_sq = model.b * (1.0 - kMaskShrink) * (1.0 - kMaskShrink);
        for (int j = 0; j < spec.n; ++j)
            for (int i = 0; i < spec.n; ++i) {
                const double x = spec.center(i);
                const double y = spec.center(j);
                if (x * x + y * y >= limit_sq)
                    mask_[index(i, j)] = 0;
            }
    }
}

double DensityGrid::mass() const
{
    double sum = 0.0;
    for (double v : values_)
        sum += v;
    return sum * cell_area();
}

void DensityGrid::normalize()
{
    const double m = mass();
    if (!(m > 0.0))
        throw NumericalError("cannot normalize a zero-mass density");
    for (double& v : values_)
        v /= m;
}

Eigen::Matrix2d DensityGrid::second_moment() const
{
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int j = 0; j < spec_.n; ++j)
        for (int i = 0; i < spec_.n; ++i) {
            const double v = values_[index(i, j)];
            if (v == 0.0)
                continue;
            const double x = spec_.center(i);
            const double y = spec_.center(j);
            sxx += v * x * x;
            sxy += v * x * y;
            syy += v * y * y;
        }
    Eigen::Matrix2d m;
    m << sxx, sxy, sxy, syy;
    return m * cell_area();
}

void DensityGrid::write_csv(std::ostream& os) const
{
    os << "x,y,value\n";
    for (int j = 0; j < spec_.n; ++j)
        for (int i = 0; i < spec_.n; ++i) {
            if (!active(i, j))
                continue;
            os << format_double(spec_.center(i)) << ',' << format_double(spec_.center(j))
               << ',' << format_double(value(i, j)) << "\n";
        }
}

FokkerPlanckOperator::FokkerPlanckOperator(const ForceModel& model,
                                           const Eigen::Matrix2d& kappa, double we,
                                           const GridSpec& spec)
    : model_(model), kappa_(kappa), we_(we), spec_(spec)
{
    if (!(we > 0.0))
        throw ConfigError("weissenberg must be > 0");
    if (!kappa.allFinite())
        throw ConfigError("velocity gradient has non-finite entries");

    const DensityGrid geometry(spec, model);
    const double h = spec.spacing();
    const double diffusion = 0.5 / we;
    const Eigen::Matrix2d ks = 0.5 * (kappa + kappa.transpose());
    const Eigen::Matrix2d ka = 0.5 * (kappa - kappa.transpose());

    // Effective potential of the gradient part of the drift; the skew part
    // is handled by a midpoint Peclet contribution.
    auto phi = [&](double x, double y) {
        Eigen::Vector2d p(x, y);
        return potential(model, x, y) - we * p.dot(ks * p);
    };

    const std::size_t ncells = static_cast<std::size_t>(spec.n) * spec.n;
    std::vector<double> out_rate(ncells, 0.0);
    faces_.reserve(2 * ncells);
    for (int j = 0; j < spec.n; ++j)
        for (int i = 0; i < spec.n; ++i) {
            if (!geometry.active(i, j))
                continue;
            const double x = spec.center(i);
            const double y = spec.center(j);
            // east face
            if (i + 1 < spec.n && geometry.active(i + 1, j)) {
                const Eigen::Vector2d mid(x + 0.5 * h, y);
                const Eigen::Vector2d skew_drift = ka * mid;
                const double peclet =
                    (phi(x, y) - phi(x + h, y)) + skew_drift.x() * h / diffusion;
                Face f;
                f.left = static_cast<std::uint32_t>(geometry.index(i, j));
                f.right = static_cast<std::uint32_t>(geometry.index(i + 1, j));
                f.from_left = diffusion / (h * h) * bernoulli(-peclet);
                f.from_right = diffusion / (h * h) * bernoulli(peclet);
                out_rate[f.left] += f.from_left;
                out_rate[f.right] += f.from_right;
                faces_.push_back(f);
            }
            // north face
            if (j + 1 < spec.n && geometry.active(i, j + 1)) {
                const Eigen::Vector2d mid(x, y + 0.5 * h);
                const Eigen::Vector2d skew_drift = ka * mid;
                const double peclet =
                    (phi(x, y) - phi(x, y + h)) + skew_drift.y() * h / diffusion;
                Face f;
                f.left = static_cast<std::uint32_t>(geometry.index(i, j));
                f.right = static_cast<std::uint32_t>(geometry.index(i, j + 1));
                f.from_left = diffusion / (h * h) * bernoulli(-peclet);
                f.from_right = diffusion / (h * h) * bernoulli(peclet);
                out_rate[f.left] += f.from_left;
                out_rate[f.right] += f.from_right;
                faces_.push_back(f);
            }
        }
    double worst = 0.0;
    for (double r : out_rate)
        worst = std::max(worst, r);
    max_stable_dt_ = worst > 0.0 ? 1.0 / worst : 0.0;
}

void FokkerPlanckOperator::step(DensityGrid& psi, double dt) const
{
    if (psi.n() != spec_.n)
        throw ConfigError("density grid does not match the operator grid");
    if (!(dt > 0.0) || dt > max_stable_dt_ * (1.0 + 1e-12))
        throw ConfigError("fp_step: dt = " + format_double(dt) +
                          " violates the stability bound " + format_double(max_stable_dt_));

    const std::vector<double>& v = psi.values();
    std::vector<double> div(v.size(), 0.0);
    const std::size_t nfaces = faces_.size();
    const std::size_t chunks = num_chunks(nfaces);
    // fluxes in parallel per chunk, divergence applied serially in face order
    // (two faces of one cell may sit in different chunks)
    std::vector<std::vector<double>> flux(chunks);
    parallel_for_chunks(nfaces, [&](std::size_t chunk, std::size_t fb, std::size_t fe) {
        auto& buf = flux[chunk];
        buf.resize(fe - fb);
        for (std::size_t f = fb; f < fe; ++f) {
            const Face& face = faces_[f];
            buf[f - fb] = face.from_left * v[face.left] - face.from_right * v[face.right];
        }
    });
    for (std::size_t chunk = 0; chunk < chunks; ++chunk) {
        const std::size_t fb = chunk * kReductionChunk;
        for (std::size_t k = 0; k < flux[chunk].size(); ++k) {
            const Face& face = faces_[fb + k];
            div[face.left] -= flux[chunk][k];
            div[face.right] += flux[chunk][k];
        }
    }

    double change_l1 = 0.0;
    double mass_l1 = 0.0;
    std::vector<double>& out = psi.values();
    for (std::size_t c = 0; c < out.size(); ++c) {
        const double delta = dt * div[c];
        out[c] += delta;
        change_l1 += std::abs(delta);
        mass_l1 += std::abs(out[c]);
    }
    last_residual_ = mass_l1 > 0.0 ? change_l1 / (dt * mass_l1) : 0.0;
}

void fp_step(DensityGrid& psi, const ForceModel& model, const Eigen::Matrix2d& kappa,
             double we, double dt)
{
    FokkerPlanckOperator op(model, kappa, we, psi.spec());
    op.step(psi, dt);
}

StationaryResult stationary_density(const ForceModel& model, const Eigen::Matrix2d& kappa,
                                    double we, const GridSpec& spec,
                                    const StationaryOptions& options)
{
    if (!(we > 0.0))
        throw ConfigError("weissenberg must be > 0");
    const double scale = kappa.cwiseAbs().maxCoeff();
    const bool symmetric =
        (kappa - kappa.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + scale);

    StationaryResult result{DensityGrid(spec, model), false, 0.0, 0};
    if (symmetric) {
        if (!model.is_fene()) {
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(kappa, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().maxCoeff() >= 0.5 / we)
                throw NumericalError(
                    "Hookean stationary state requires eigenvalues of kappa below 1/(2We)");
        }
        DensityGrid& psi = result.psi;
        for (int j = 0; j < spec.n; ++j)
            for (int i = 0; i < spec.n; ++i) {
                if (!psi.active(i, j))
                    continue;
                const Eigen::Vector2d p = psi.center(i, j);
                psi.value(i, j) =
                    std::exp(-potential(model, p.x(), p.y()) + we * p.dot(kappa * p));
            }
        psi.normalize();
        result.analytic = true;
        return result;
    }

    // General kappa: march the Fokker-Planck flow to a fixed point.
    FokkerPlanckOperator op(model, kappa, we, spec);
    DensityGrid& psi = result.psi;
    for (int j = 0; j < spec.n; ++j)
        for (int i = 0; i < spec.n; ++i)
            if (psi.active(i, j)) {
                const Eigen::Vector2d p = psi.center(i, j);
                psi.value(i, j) = std::exp(-potential(model, p.x(), p.y()));
            }
    psi.normalize();
    const double dt = options.dt_safety * op.max_stable_dt();
    for (long n = 0; n < options.max_steps; ++n) {
        op.step(psi, dt);
        result.residual = op.last_residual();
        result.steps = n + 1;
        if (result.residual < options.residual_tol) {
            psi.normalize();
            return result;
        }
    }
    throw NumericalError("stationary_density did not reach the residual tolerance " +
                         format_double(options.residual_tol) + " within " +
                         std::to_string(options.max_steps) + " steps (residual " +
                         format_double(result.residual) + ")");
}

double relative_entropy(const DensityGrid& psi, const DensityGrid& psi_inf)
{
    if (psi.n() != psi_inf.n())
        throw ConfigError("relative_entropy: grid mismatch");
    double sum = 0.0;
    const auto& p = psi.values();
    const auto& q = psi_inf.values();
    for (std::size_t c = 0; c < p.size(); ++c) {
        if (p[c] <= 0.0)
            continue; // 0 ln 0 = 0
        if (q[c] <= 0.0)
            throw NumericalError("relative_entropy: psi > 0 outside the support of psi_inf");
        sum += p[c] * std::log(p[c] / q[c]);
    }
    return sum * psi.cell_area();
}

double l1_distance(const DensityGrid& psi, const DensityGrid& psi_inf)
{
    if (psi.n() != psi_inf.n())
        throw ConfigError("l1_distance: grid mismatch");
    double sum = 0.0;
    for (std::size_t c = 0; c < psi.values().size(); ++c)
        sum += std::abs(psi.values()[c] - psi_inf.values()[c]);
    return sum * psi.cell_area();
}

double fisher_information(const DensityGrid& psi, const DensityGrid& psi_inf)
{
    if (psi.n() != psi_inf.n())
        throw ConfigError("fisher_information: grid mismatch");
    const int n = psi.n();
    const double h = psi.spec().spacing();

    // log-ratio where defined (psi > 0 on the support of psi_inf)
    std::vector<double> logratio(psi.values().size(), 0.0);
    std::vector<std::uint8_t> defined(psi.values().size(), 0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const std::size_t c = psi.index(i, j);
            const double p = psi.values()[c];
            if (p <= 0.0)
                continue;
            if (psi_inf.values()[c] <= 0.0)
                throw NumericalError(
                    "fisher_information: psi > 0 outside the support of psi_inf");
            logratio[c] = std::log(p / psi_inf.values()[c]);
            defined[c] = 1;
        }

    auto derivative = [&](std::size_t c, std::size_t lo, std::size_t hi, bool has_lo,
                          bool has_hi) {
        const bool use_lo = has_lo && defined[lo];
        const bool use_hi = has_hi && defined[hi];
        if (use_lo && use_hi)
            return (logratio[hi] - logratio[lo]) / (2.0 * h);
        if (use_hi)
            return (logratio[hi] - logratio[c]) / h;
        if (use_lo)
            return (logratio[c] - logratio[lo]) / h;
        return 0.0;
    };

    double sum = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const std::size_t c = psi.index(i, j);
            if (!defined[c])
                continue;
            const double gx =
                derivative(c, psi.index(i > 0 ? i - 1 : 0, j), psi.index(i + 1 < n ? i + 1 : i, j),
                           i > 0, i + 1 < n);
            const double gy =
                derivative(c, psi.index(i, j > 0 ? j - 1 : 0), psi.index(i, j + 1 < n ? j + 1 : j),
                           j > 0, j + 1 < n);
            sum += (gx * gx + gy * gy) * psi.values()[c];
        }
    return sum * psi.cell_area();
}

EntropyReport entropy_report(const DensityGrid& psi, const DensityGrid& psi_inf)
{
    EntropyReport r;
    r.relative_entropy = relative_entropy(psi, psi_inf);
    r.fisher_information = fisher_information(psi, psi_inf);
    r.l1_distance = l1_distance(psi, psi_inf);
    return r;
}

double lsi_constant_bakry_emery(const ForceModel& model, int radial_samples,
                                int angular_samples)
{
    if (!model.is_fene())
        return 1.0; // Hessian of |X|^2/2 is the identity
    const double b = model.b;
    double worst = std::numeric_limits<double>::infinity();
    for (int ir = 0; ir < radial_samples; ++ir) {
        const double r = (0.999 * std::sqrt(b)) * ir / (radial_samples - 1);
        const double u = r * r / b;
        // Hessian eigenvalues: tangential 1/(1-u), radial 1/(1-u) + 2u/(1-u)^2.
        const double tangential = 1.0 / (1.0 - u);
        const double radial = tangential + 2.0 * u / ((1.0 - u) * (1.0 - u));
        worst = std::min(worst, std::min(tangential, radial));
    }
    (void)angular_samples; // the potential is radial; angles do not change the scan
    return worst;
}

double holley_stroock_bound(double rho, double perturbation_osc)
{
    if (!(rho > 0.0))
        throw ConfigError("holley_stroock_bound requires rho > 0");
    if (perturbation_osc < 0.0)
        throw ConfigError("holley_stroock_bound requires a nonnegative oscillation");
    return rho * std::exp(-perturbation_osc);
}

Eigen::Matrix2d stress_from_density(const DensityGrid& psi, const ForceModel& model,
                                    double eps, double we)
{
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    const int n = psi.n();
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            if (!psi.active(i, j))
                continue;
            const double v = psi.value(i, j);
            if (v == 0.0)
                continue;
            const Eigen::Vector2d p = psi.center(i, j);
            double g = 1.0;
            if (model.is_fene())
                g = 1.0 / (1.0 - p.squaredNorm() / model.b);
            sxx += v * g * p.x() * p.x();
            sxy += v * g * p.x() * p.y();
            syy += v * g * p.y() * p.y();
        }
    const double area = psi.cell_area();
    Eigen::Matrix2d s;
    s << sxx * area - 1.0, sxy * area, sxy * area, syy * area - 1.0;
    return (eps / we) * s;
}

GradientBoundReport stationary_gradient_bound_check(const DensityGrid& psi_inf, double b,
                                                    const Eigen::Matrix2d& kappa,
                                                    double tolerance,
                                                    double interior_fraction)
{
    const Eigen::Matrix2d ks = 0.5 * (kappa + kappa.transpose());
    const double ks_norm = spectral_norm_sym(ks);
    if (!(ks_norm < 0.5))
        throw NumericalError("gradient bound check requires |kappa_s| < 1/2, got " +
                             format_double(ks_norm));
    const Eigen::Matrix2d bracket = kappa * kappa.transpose() - kappa.transpose() * kappa;
    GradientBoundReport report;
    report.bound = 2.0 * std::sqrt(b) * spectral_norm_sym(bracket) / (1.0 - 2.0 * ks_norm);
    report.tolerance = tolerance;

    const int n = psi_inf.n();
    const double h = psi_inf.spec().spacing();
    const ForceModel model = ForceModel::fene(b);
    // q = ln(psi_inf e^Pi) on cells where the density is positive
    std::vector<double> q(psi_inf.values().size(), 0.0);
    std::vector<std::uint8_t> defined(q.size(), 0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const std::size_t c = psi_inf.index(i, j);
            if (!psi_inf.active(i, j) || psi_inf.values()[c] <= 0.0)
                continue;
            const Eigen::Vector2d p = psi_inf.center(i, j);
            q[c] = std::log(psi_inf.values()[c]) + potential(model, p.x(), p.y());
            defined[c] = 1;
        }
    const double rmax_sq = interior_fraction * interior_fraction * b;
    double worst = 0.0;
    for (int j = 1; j + 1 < n; ++j)
        for (int i = 1; i + 1 < n; ++i) {
            const std::size_t c = psi_inf.index(i, j);
            if (!defined[c])
                continue;
            const Eigen::Vector2d p = psi_inf.center(i, j);
            if (p.squaredNorm() > rmax_sq)
                continue;
            const std::size_t e = psi_inf.index(i + 1, j), w = psi_inf.index(i - 1, j);
            const std::size_t nn = psi_inf.index(i, j + 1), ss = psi_inf.index(i, j - 1);
            if (!defined[e] || !defined[w] || !defined[nn] || !defined[ss])
                continue;
            Eigen::Vector2d grad((q[e] - q[w]) / (2.0 * h), (q[nn] - q[ss]) / (2.0 * h));
            const double dev = (grad - 2.0 * ks * p).norm();
            worst = std::max(worst, dev);
        }
    report.max_deviation = worst;
    report.pass = worst <= report.bound + tolerance;
    return report;
}

} // namespace micromacro::fokker
