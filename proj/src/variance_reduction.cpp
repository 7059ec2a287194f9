#include "micromacro/variance_reduction.hpp"

#include <cmath>
#include <limits>

namespace micromacro::varred {

void BrownianStrategy::normals(std::uint32_t cell, std::uint32_t replica, std::uint32_t step,
                               std::uint32_t attempt, int dim, double* out) const
{
    const dumbbell::IndependentIncrements base(seed_);
    switch (variant_) {
    case BrownianVariant::IndependentPerCell:
        base.normals(cell, replica, step, attempt, dim, out);
        return;
    case BrownianVariant::ConstantInSpace:
        base.normals(0, replica, step, attempt, dim, out);
        return;
    case BrownianVariant::AlternatingSign: {
        base.normals(0, replica, step, attempt, dim, out);
        if (cell % 2 == 1)
            for (int k = 0; k < dim; ++k)
                out[k] = -out[k];
        return;
    }
    }
}

BrownianStrategy apply_brownian_strategy(BrownianVariant variant, std::uint64_t seed)
{
    return BrownianStrategy(variant, seed);
}

BrownianVariant brownian_variant_from_name(const std::string& name)
{
    if (name == "constant")
        return BrownianVariant::ConstantInSpace;
    if (name == "iid")
        return BrownianVariant::IndependentPerCell;
    if (name == "alternating")
        return BrownianVariant::AlternatingSign;
    throw ConfigError("unknown Brownian strategy '" + name +
                      "' (expected constant|iid|alternating)");
}

std::string brownian_variant_name(BrownianVariant variant)
{
    switch (variant) {
    case BrownianVariant::ConstantInSpace:
        return "constant";
    case BrownianVariant::IndependentPerCell:
        return "iid";
    case BrownianVariant::AlternatingSign:
        return "alternating";
    }
    return "?";
}

namespace {

double sample_mean(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v)
{
    if (v.size() < 2)
        return 0.0;
    const double m = sample_mean(v);
    double s = 0.0;
    for (double x : v)
        s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

} // namespace

double optimal_alpha(std::span<const double> z, std::span<const double> y)
{
    if (z.size() != y.size() || z.size() < 2)
        throw ConfigError("optimal_alpha needs matching sample vectors of size >= 2");
    const double my = sample_mean(y);
    const double mz = sample_mean(z);
    double cov = 0.0, var = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        cov += (z[i] - mz) * (y[i] - my);
        var += (y[i] - my) * (y[i] - my);
    }
    const double norm = static_cast<double>(z.size() - 1);
    cov /= norm;
    var /= norm;
    if (!(var > 0.0))
        throw NumericalError("optimal_alpha: degenerate control variate (zero variance)");
    return cov / var;
}

MultiAlpha optimal_alpha_multi(const std::vector<Eigen::MatrixXd>& y_samples,
                               const Eigen::MatrixXd& z_samples)
{
    const int n = static_cast<int>(y_samples.size());
    if (n == 0)
        throw ConfigError("optimal_alpha_multi: empty control family");
    const int m = static_cast<int>(z_samples.rows());
    const int comps = static_cast<int>(z_samples.cols());
    for (const auto& y : y_samples)
        if (y.rows() != m || y.cols() != comps)
            throw ConfigError("optimal_alpha_multi: sample shape mismatch");

    // center everything, then normal equations shared across components
    Eigen::MatrixXd zc = z_samples;
    for (int c = 0; c < comps; ++c)
        zc.col(c).array() -= zc.col(c).mean();
    std::vector<Eigen::MatrixXd> yc(y_samples.begin(), y_samples.end());
    for (auto& y : yc)
        for (int c = 0; c < comps; ++c)
            y.col(c).array() -= y.col(c).mean();

    Eigen::MatrixXd gram(n, n);
    Eigen::VectorXd cross(n);
    for (int a = 0; a < n; ++a) {
        cross(a) = (yc[a].array() * zc.array()).sum();
        for (int b = a; b < n; ++b) {
            gram(a, b) = (yc[a].array() * yc[b].array()).sum();
            gram(b, a) = gram(a, b);
        }
    }
    MultiAlpha out;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    bool ok = ldlt.info() == Eigen::Success;
    if (ok) {
        const double scale = gram.diagonal().maxCoeff();
        ok = ldlt.vectorD().minCoeff() > 1e-13 * std::max(scale, 1.0);
    }
    if (ok) {
        out.alpha = ldlt.solve(cross);
    } else {
        const double ridge = 1e-10 * std::max(gram.diagonal().maxCoeff(), 1.0);
        Eigen::MatrixXd reg = gram;
        reg.diagonal().array() += ridge;
        out.alpha = reg.ldlt().solve(cross);
        out.regularized = true;
    }
    return out;
}

namespace {

Eigen::Matrix2d moment_tensor(const dumbbell::ForceModel& model, double x, double y)
{
    double g = 1.0;
    if (model.is_fene())
        g = 1.0 / (1.0 - (x * x + y * y) / model.b);
    Eigen::Matrix2d t;
    t << g * x * x, g * x * y, g * x * y, g * y * y;
    return t;
}

} // namespace

PairedSamples coupled_control_variate_run(const ControlVariateSpec& spec,
                                          const dumbbell::ForceModel& model,
                                          const Eigen::Matrix2d& kappa,
                                          const dumbbell::FlowParams& params, int samples,
                                          double t_end, std::uint64_t seed)
{
    params.validate();
    dumbbell::ForceModel companion_model = model;
    Eigen::Matrix2d companion_kappa = Eigen::Matrix2d::Zero();
    if (spec.variant == ControlVariateVariant::Hookean) {
        companion_model = dumbbell::ForceModel::hookean();
        companion_kappa = kappa;
    }

    // maximal coupling: the companion consumes the same increments AND starts
    // from the same equilibrium draws as the primary process
    auto primary = dumbbell::DumbbellEnsemble::equilibrium(2, 1, samples, model, seed);
    auto companion = primary;
    const dumbbell::IndependentIncrements increments(seed);

    const long steps = std::lround(t_end / params.dt);
    const Eigen::MatrixXd kz = kappa;
    const Eigen::MatrixXd kc = companion_kappa;
    for (long n = 0; n < steps; ++n) {
        dumbbell::evolve_ensemble(primary, model, kz, params, increments,
                                  static_cast<std::uint32_t>(n));
        dumbbell::evolve_ensemble(companion, companion_model, kc, params, increments,
                                  static_cast<std::uint32_t>(n));
    }

    PairedSamples out;
    out.z.reserve(samples);
    out.y.reserve(samples);
    for (int i = 0; i < samples; ++i) {
        out.z.push_back(
            moment_tensor(model, primary.component(0, i, 0), primary.component(0, i, 1)));
        out.y.push_back(moment_tensor(companion_model, companion.component(0, i, 0),
                                      companion.component(0, i, 1)));
    }
    if (spec.variant == ControlVariateVariant::Equilibrium) {
        // the companion stays in its stationary law: E(X (x) F(X)) = I
        out.y_mean_known = Eigen::Matrix2d::Identity();
    } else {
        // Hookean second moments close exactly: Oldroyd-B from the primary
        // equilibrium's second moment (b/(b+4)) I (identity when Hookean)
        dumbbell::FlowParams ode = params;
        ode.dt = std::min(params.dt, 1e-3 * params.weissenberg);
        const double a0 = model.is_fene() ? model.b / (model.b + 4.0) : 1.0;
        const auto traj = constitutive::integrate_homogeneous(
            constitutive::MacroModel::OldroydB,
            [&](double) { return Eigen::MatrixXd(companion_kappa); },
            constitutive::ConformationTensor(
                Eigen::MatrixXd(a0 * Eigen::Matrix2d::Identity())),
            ode, 0.0, t_end, 1 << 20);
        out.y_mean_known = traj.tensors.back().entries;
    }
    return out;
}

VarianceReport make_variance_report(const std::vector<std::string>& names,
                                    const std::vector<std::vector<double>>& samples_per_name)
{
    if (names.size() != samples_per_name.size())
        throw ConfigError("make_variance_report: one sample vector per name");
    VarianceReport rep;
    rep.quantity = names;
    for (const auto& s : samples_per_name) {
        rep.samples = static_cast<int>(s.size());
        const double m = s.empty() ? 0.0 : sample_mean(s);
        const double v = sample_variance(s);
        rep.mean.push_back(m);
        rep.variance.push_back(v);
        rep.half_width.push_back(1.96 * std::sqrt(v / std::max<std::size_t>(s.size(), 1)));
    }
    return rep;
}

std::vector<StrategyStudyResult> variance_comparison_study(
    const StrategyStudyConfig& cfg, const std::vector<BrownianVariant>& strategies)
{
    cfg.scheme.validate();
    std::vector<StrategyStudyResult> results;
    const long steps = std::lround(cfg.t_end / cfg.scheme.params.dt);
    const int mid = cfg.scheme.cells / 2;
    for (BrownianVariant variant : strategies) {
        StrategyStudyResult res;
        res.variant = variant;
        std::vector<std::vector<double>> tau_cells(
            cfg.scheme.cells, std::vector<double>(cfg.repeats, 0.0));
        for (int rep = 0; rep < cfg.repeats; ++rep) {
            shear::SchemeConfig run_cfg = cfg.scheme;
            run_cfg.seed = cfg.scheme.seed + 7919u * static_cast<std::uint64_t>(rep);
            const BrownianStrategy increments(variant, run_cfg.seed);
            shear::ConnffessitState state = shear::make_connffessit_state(run_cfg);
            if (cfg.share_initial_replicas)
                for (int c = 1; c < run_cfg.cells; ++c)
                    for (int r = 0; r < run_cfg.replicas; ++r)
                        for (int d = 0; d < 2; ++d)
                            state.ensembles.component(c, r, d) =
                                state.ensembles.component(0, r, d);
            for (long n = 0; n < steps; ++n)
                shear::connffessit_step(state, run_cfg, increments);
            res.u_mid_samples.push_back(state.u[mid]);
            double tau_avg = 0.0;
            for (int c = 0; c < run_cfg.cells; ++c) {
                tau_cells[c][rep] = state.tau[c];
                tau_avg += state.tau[c];
            }
            res.tau_mean_samples.push_back(tau_avg / run_cfg.cells);
        }
        res.tau_variance_per_cell.reserve(cfg.scheme.cells);
        double acc = 0.0;
        for (int c = 0; c < cfg.scheme.cells; ++c) {
            const double v = sample_variance(tau_cells[c]);
            res.tau_variance_per_cell.push_back(v);
            acc += v;
        }
        res.tau_variance_cell_avg = acc / cfg.scheme.cells;
        res.tau_samples_per_cell = tau_cells;
        res.report = make_variance_report({"u_mid", "tau_cell_mean"},
                                          {res.u_mid_samples, res.tau_mean_samples});
        results.push_back(std::move(res));
    }
    return results;
}

namespace {

// shifts the replica index so that disjoint sample blocks use disjoint streams
class OffsetIncrements final : public dumbbell::IncrementSource {
public:
    OffsetIncrements(std::uint64_t seed, std::uint32_t offset) : base_(seed), offset_(offset)
    {
    }
    void normals(std::uint32_t cell, std::uint32_t replica, std::uint32_t step,
                 std::uint32_t attempt, int dim, double* out) const override
    {
        base_.normals(cell, replica + offset_, step, attempt, dim, out);
    }

private:
    dumbbell::IndependentIncrements base_;
    std::uint32_t offset_;
};

} // namespace

std::vector<Eigen::Vector3d> stress_moment_samples(const dumbbell::ForceModel& model,
                                                   const Eigen::Matrix2d& kappa,
                                                   const dumbbell::FlowParams& params,
                                                   double t_end, int count,
                                                   std::uint64_t seed, int sample_offset)
{
    params.validate();
    if (sample_offset < 0)
        throw ConfigError("stress_moment_samples: sample_offset must be nonnegative");
    dumbbell::DumbbellEnsemble ens(2, 1, count, seed);
    for (int i = 0; i < count; ++i) {
        const rng::StreamKey key{seed, rng::kDomainInit, 0,
                                 static_cast<std::uint32_t>(sample_offset + i)};
        dumbbell::equilibrium_draw(model, key, 2, ens.cell_data(0) + 2 * i);
    }
    const OffsetIncrements increments(seed, static_cast<std::uint32_t>(sample_offset));
    const Eigen::MatrixXd k = kappa;
    const long steps = std::lround(t_end / params.dt);
    for (long n = 0; n < steps; ++n)
        dumbbell::evolve_ensemble(ens, model, k, params, increments,
                                  static_cast<std::uint32_t>(n));
    std::vector<Eigen::Vector3d> out(count);
    for (int i = 0; i < count; ++i) {
        const Eigen::Matrix2d t = moment_tensor(model, ens.component(0, i, 0),
                                                ens.component(0, i, 1));
        out[i] = Eigen::Vector3d(t(0, 0), t(0, 1), t(1, 1));
    }
    return out;
}

namespace {

Eigen::Vector3d mean_of(const std::vector<Eigen::Vector3d>& v)
{
    Eigen::Vector3d m = Eigen::Vector3d::Zero();
    for (const auto& x : v)
        m += x;
    return m / static_cast<double>(v.size());
}

// Summed per-component covariance of centered sample vectors.
double centered_dot(const std::vector<Eigen::Vector3d>& a, const Eigen::Vector3d& ma,
                    const std::vector<Eigen::Vector3d>& b, const Eigen::Vector3d& mb)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] - ma).dot(b[i] - mb);
    return s / static_cast<double>(a.size() - 1);
}

} // namespace

RbBasis rb_offline(const std::vector<Eigen::Matrix2d>& lambda_trial, int n_basis, int m_large,
                   const dumbbell::ForceModel& model, const dumbbell::FlowParams& params,
                   double t_end, std::uint64_t seed)
{
    if (lambda_trial.empty())
        throw ConfigError("rb_offline: empty trial set");
    if (n_basis < 1 || n_basis > static_cast<int>(lambda_trial.size()))
        throw ConfigError("rb_offline: basis size must lie in [1, |trial set|]");
    if (m_large < 2)
        throw ConfigError("rb_offline: m_large must be >= 2");

    const int ntrial = static_cast<int>(lambda_trial.size());
    std::vector<std::vector<Eigen::Vector3d>> samples(ntrial);
    std::vector<Eigen::Vector3d> means(ntrial);
    for (int t = 0; t < ntrial; ++t) {
        samples[t] =
            stress_moment_samples(model, lambda_trial[t], params, t_end, m_large, seed);
        means[t] = mean_of(samples[t]);
    }

    RbBasis basis;
    basis.model = model;
    basis.params = params;
    basis.t_end = t_end;
    basis.seed = seed;
    basis.m_large = m_large;

    std::vector<double> variances(ntrial);
    double max_variance = 0.0;
    for (int t = 0; t < ntrial; ++t) {
        variances[t] = centered_dot(samples[t], means[t], samples[t], means[t]);
        max_variance = std::max(max_variance, variances[t]);
    }

    std::vector<int> selected;
    // cov(selected row, trial column); Y and Z share covariances since the
    // control variates differ from the snapshots by constants only
    Eigen::MatrixXd cross(0, ntrial);
    while (static_cast<int>(selected.size()) < n_basis) {
        const int nsel = static_cast<int>(selected.size());
        Eigen::MatrixXd gram(nsel, nsel);
        for (int a = 0; a < nsel; ++a)
            for (int b = 0; b < nsel; ++b)
                gram(a, b) = cross(a, selected[b]);
        Eigen::LDLT<Eigen::MatrixXd> ldlt;
        if (nsel > 0)
            ldlt.compute(gram);

        double best_score = -1.0;
        int best = -1;
        for (int t = 0; t < ntrial; ++t) {
            bool duplicate = false;
            for (int s : selected)
                if ((lambda_trial[s] - lambda_trial[t]).cwiseAbs().maxCoeff() == 0.0) {
                    duplicate = true;
                    break;
                }
            if (duplicate)
                continue;
            double residual = variances[t];
            if (nsel > 0) {
                const Eigen::VectorXd c = cross.col(t);
                residual -= c.dot(ldlt.solve(c));
            }
            if (residual > best_score + 1e-15 * std::max(1.0, max_variance)) {
                best_score = residual;
                best = t;
            }
        }
        if (best < 0 || best_score <= 1e-12 * std::max(1.0, max_variance))
            break; // trial set exhausted or fully explained
        selected.push_back(best);
        basis.selection_variances.push_back(best_score);
        cross.conservativeResize(selected.size(), ntrial);
        for (int t = 0; t < ntrial; ++t)
            cross(static_cast<int>(selected.size()) - 1, t) =
                centered_dot(samples[best], means[best], samples[t], means[t]);
    }
    if (selected.empty())
        throw NumericalError("rb_offline: no trial parameter carries variance");

    for (int s : selected) {
        basis.parameters.push_back(lambda_trial[s]);
        basis.trial_indices.push_back(s);
        basis.reference_means.push_back(means[s]);
    }
    return basis;
}

RbOnlineResult rb_online(const Eigen::Matrix2d& lambda, const RbBasis& basis, int m_small,
                         int sample_offset)
{
    if (basis.parameters.empty())
        throw ConfigError("rb_online: empty basis");
    if (m_small < 2)
        throw ConfigError("rb_online: m_small must be >= 2");

    const int n = static_cast<int>(basis.parameters.size());
    const auto z = stress_moment_samples(basis.model, lambda, basis.params, basis.t_end,
                                         m_small, basis.seed, sample_offset);
    // regenerate the coupled snapshots at the online sample indices
    Eigen::MatrixXd zmat(m_small, 3);
    for (int i = 0; i < m_small; ++i)
        zmat.row(i) = z[i].transpose();
    std::vector<Eigen::MatrixXd> ymat(n, Eigen::MatrixXd(m_small, 3));
    for (int k = 0; k < n; ++k) {
        const auto yk = stress_moment_samples(basis.model, basis.parameters[k], basis.params,
                                              basis.t_end, m_small, basis.seed, sample_offset);
        for (int i = 0; i < m_small; ++i)
            ymat[k].row(i) = (yk[i] - basis.reference_means[k]).transpose();
    }

    const MultiAlpha fit = optimal_alpha_multi(ymat, zmat);

    Eigen::MatrixXd corrected = zmat;
    for (int k = 0; k < n; ++k)
        corrected -= fit.alpha(k) * ymat[k];

    RbOnlineResult out;
    out.alpha = fit.alpha;
    out.regularized = fit.regularized;
    out.estimate = corrected.colwise().mean().transpose();

    std::vector<std::vector<double>> per_comp(3), per_comp_unc(3);
    for (int c = 0; c < 3; ++c) {
        per_comp[c].assign(corrected.col(c).data(), corrected.col(c).data() + m_small);
        per_comp_unc[c].assign(zmat.col(c).data(), zmat.col(c).data() + m_small);
    }
    out.report = make_variance_report({"xx", "xy", "yy"}, per_comp);
    for (int c = 0; c < 3; ++c) {
        out.corrected_variance += out.report.variance[c];
        out.uncorrected_variance += sample_variance(per_comp_unc[c]);
    }
    out.reduction_factor = out.corrected_variance > 0.0
                               ? out.uncorrected_variance / out.corrected_variance
                               : std::numeric_limits<double>::infinity();
    return out;
}

} // namespace micromacro::varred
