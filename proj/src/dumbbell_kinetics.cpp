#include "micromacro/dumbbell_kinetics.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace micromacro::dumbbell {

void FlowParams::validate() const
{
    if (!(reynolds > 0.0))
        throw ConfigError("reynolds must be > 0, got " + format_double(reynolds));
    if (!(weissenberg > 0.0))
        throw ConfigError("weissenberg must be > 0, got " + format_double(weissenberg));
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ConfigError("epsilon must lie in (0,1), got " + format_double(epsilon));
    if (!(dt > 0.0))
        throw ConfigError("dt must be > 0, got " + format_double(dt));
}

ForceModel ForceModel::fene(double b)
{
    if (!(b > 0.0))
        throw ConfigError("FENE extensibility b must be > 0, got " + format_double(b));
    return {SpringType::Fene, b};
}

double ForceModel::max_sq_norm() const
{
    return is_fene() ? b : std::numeric_limits<double>::infinity();
}

Eigen::VectorXd spring_force(const ForceModel& model, const Eigen::VectorXd& x)
{
    if (!model.is_fene())
        return x;
    const double sq = x.squaredNorm();
    if (sq >= model.b)
        throw NumericalError("FENE force evaluated at |x|^2 = " + format_double(sq) +
                             " outside the ball of radius sqrt(" + format_double(model.b) + ")");
    return x / (1.0 - sq / model.b);
}

double spring_potential(const ForceModel& model, const Eigen::VectorXd& x)
{
    const double sq = x.squaredNorm();
    if (!model.is_fene())
        return 0.5 * sq;
    if (sq >= model.b)
        throw NumericalError("FENE potential evaluated outside the ball, |x|^2 = " +
                             format_double(sq));
    return -0.5 * model.b * std::log(1.0 - sq / model.b);
}

void IndependentIncrements::normals(std::uint32_t cell, std::uint32_t replica,
                                    std::uint32_t step, std::uint32_t attempt, int dim,
                                    double* out) const
{
    const rng::StreamKey key{seed_, rng::kDomainSde, cell, replica};
    if (dim <= 2) {
        const auto [a, b] = rng::normal_pair(key, step, attempt);
        out[0] = a;
        if (dim == 2)
            out[1] = b;
        return;
    }
    const auto [a, b] = rng::normal_pair(key, step, 2 * attempt);
    const auto [c, d] = rng::normal_pair(key, step, 2 * attempt + 1);
    out[0] = a;
    out[1] = b;
    out[2] = c;
    (void)d;
}

DumbbellEnsemble::DumbbellEnsemble(int dim, int cells, int replicas, std::uint64_t rng_root)
    : dim_(dim), cells_(cells), replicas_(replicas), rng_root_(rng_root)
{
    if (dim != 2 && dim != 3)
        throw ConfigError("ensemble dimension must be 2 or 3, got " + std::to_string(dim));
    if (cells < 1 || replicas < 1)
        throw ConfigError("ensemble needs at least one cell and one replica");
    data_.assign(static_cast<std::size_t>(cells) * replicas * dim, 0.0);
}

namespace {

// Equilibrium draw for one FENE dumbbell: uniform proposal in the ball,
// accepted with probability (1 - r^2/b)^(b/2).
void draw_fene_equilibrium(const rng::StreamKey& key, int dim, double b, double* out)
{
    constexpr std::uint32_t kMaxAttempts = 100000;
    for (std::uint32_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const auto [u1, u2] = rng::uniform_pair(key, 0, 2 * attempt);
        const auto [u3, u4] = rng::uniform_pair(key, 0, 2 * attempt + 1);
        if (dim == 2) {
            const double r = std::sqrt(b * u1);
            if (u3 < std::pow(1.0 - r * r / b, 0.5 * b)) {
                const double th = 2.0 * M_PI * u2;
                out[0] = r * std::cos(th);
                out[1] = r * std::sin(th);
                return;
            }
        } else {
            const double r = std::sqrt(b) * std::cbrt(u1);
            if (u4 < std::pow(1.0 - r * r / b, 0.5 * b)) {
                const double cos_th = 2.0 * u2 - 1.0;
                const double sin_th = std::sqrt(std::max(0.0, 1.0 - cos_th * cos_th));
                const double phi = 2.0 * M_PI * u3;
                out[0] = r * sin_th * std::cos(phi);
                out[1] = r * sin_th * std::sin(phi);
                out[2] = r * cos_th;
                return;
            }
        }
    }
    throw NumericalError("FENE equilibrium sampler exhausted its attempt budget");
}

} // namespace

void equilibrium_draw(const ForceModel& model, const rng::StreamKey& key, int dim,
                      double* out)
{
    if (model.is_fene()) {
        draw_fene_equilibrium(key, dim, model.b, out);
        return;
    }
    const auto [a, b] = rng::normal_pair(key, 0, 0);
    out[0] = a;
    if (dim >= 2)
        out[1] = b;
    if (dim == 3)
        out[2] = rng::normal_pair(key, 0, 1).first;
}

DumbbellEnsemble DumbbellEnsemble::equilibrium(int dim, int cells, int replicas,
                                               const ForceModel& model, std::uint64_t rng_root)
{
    DumbbellEnsemble ens(dim, cells, replicas, rng_root);
    for (int c = 0; c < cells; ++c) {
        double* base = ens.cell_data(c);
        parallel_for_chunks(static_cast<std::size_t>(replicas),
                            [&](std::size_t, std::size_t rb, std::size_t re) {
                                for (std::size_t r = rb; r < re; ++r) {
                                    const rng::StreamKey key{rng_root, rng::kDomainInit,
                                                             static_cast<std::uint32_t>(c),
                                                             static_cast<std::uint32_t>(r)};
                                    equilibrium_draw(model, key, dim, base + r * dim);
                                }
                            });
    }
    return ens;
}

double DumbbellEnsemble::max_norm() const
{
    double best = 0.0;
    for (std::size_t i = 0; i + dim_ <= data_.size(); i += dim_) {
        double sq = 0.0;
        for (int k = 0; k < dim_; ++k)
            sq += data_[i + k] * data_[i + k];
        best = std::max(best, sq);
    }
    return std::sqrt(best);
}

void DumbbellEnsemble::write_csv(std::ostream& os) const
{
    os << "cell,replica,x,y";
    if (dim_ == 3)
        os << ",z";
    os << "\n";
    for (int c = 0; c < cells_; ++c)
        for (int r = 0; r < replicas_; ++r) {
            os << c << ',' << r;
            for (int k = 0; k < dim_; ++k)
                os << ',' << format_double(component(c, r, k));
            os << "\n";
        }
}

namespace {

template <int Dim, bool IsFene>
void evolve_cell(double* data, int replicas, std::uint32_t cell, const double* kappa,
                 double dt, double we, double b, const IncrementSource& increments,
                 std::uint32_t step, const EvolveOptions& options)
{
    const double half_inv_we = 0.5 / we;
    const double noise = std::sqrt(dt / we);
    const double shrink = 1.0 - options.boundary_margin;
    const double limit_sq = IsFene ? b * shrink * shrink : 0.0;

    parallel_for_chunks(
        static_cast<std::size_t>(replicas), [&](std::size_t, std::size_t rb, std::size_t re) {
            for (std::size_t r = rb; r < re; ++r) {
                double* x = data + r * Dim;
                double sq = 0.0;
                for (int k = 0; k < Dim; ++k)
                    sq += x[k] * x[k];
                double force_factor = 1.0;
                if constexpr (IsFene) {
                    const double denom = 1.0 - sq / b;
                    if (denom <= 0.0)
                        throw NumericalError("FENE replica outside the ball before the step");
                    force_factor = 1.0 / denom;
                }
                double mean[Dim];
                for (int i = 0; i < Dim; ++i) {
                    double conv = 0.0;
                    for (int j = 0; j < Dim; ++j)
                        conv += kappa[i * Dim + j] * x[j];
                    mean[i] = x[i] + (conv - half_inv_we * force_factor * x[i]) * dt;
                }
                double xi[Dim];
                if constexpr (!IsFene) {
                    increments.normals(cell, static_cast<std::uint32_t>(r), step, 0, Dim, xi);
                    for (int k = 0; k < Dim; ++k)
                        x[k] = mean[k] + noise * xi[k];
                } else {
                    for (std::uint32_t attempt = 0;; ++attempt) {
                        if (attempt > static_cast<std::uint32_t>(options.max_redraws))
                            throw NumericalError(
                                "FENE step failed after " + std::to_string(options.max_redraws) +
                                " redraws at cell " + std::to_string(cell) + ", replica " +
                                std::to_string(r));
                        increments.normals(cell, static_cast<std::uint32_t>(r), step, attempt,
                                           Dim, xi);
                        double prop[Dim];
                        double prop_sq = 0.0;
                        for (int k = 0; k < Dim; ++k) {
                            prop[k] = mean[k] + noise * xi[k];
                            prop_sq += prop[k] * prop[k];
                        }
                        if (prop_sq < limit_sq) {
                            for (int k = 0; k < Dim; ++k)
                                x[k] = prop[k];
                            break;
                        }
                    }
                }
            }
        });
}

void evolve_one_cell_dispatch(DumbbellEnsemble& ens, int cell, const ForceModel& model,
                              const Eigen::MatrixXd& kappa, const FlowParams& params,
                              const IncrementSource& increments, std::uint32_t step,
                              const EvolveOptions& options)
{
    const int d = ens.dim();
    if (kappa.rows() != d || kappa.cols() != d)
        throw ConfigError("velocity gradient must be " + std::to_string(d) + "x" +
                          std::to_string(d));
    if (!kappa.allFinite())
        throw ConfigError("velocity gradient has non-finite entries");
    double kbuf[9];
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            kbuf[i * d + j] = kappa(i, j);
    double* data = ens.cell_data(cell);
    const auto c = static_cast<std::uint32_t>(cell);
    if (d == 2) {
        if (model.is_fene())
            evolve_cell<2, true>(data, ens.replicas(), c, kbuf, params.dt, params.weissenberg,
                                 model.b, increments, step, options);
        else
            evolve_cell<2, false>(data, ens.replicas(), c, kbuf, params.dt, params.weissenberg,
                                  model.b, increments, step, options);
    } else {
        if (model.is_fene())
            evolve_cell<3, true>(data, ens.replicas(), c, kbuf, params.dt, params.weissenberg,
                                 model.b, increments, step, options);
        else
            evolve_cell<3, false>(data, ens.replicas(), c, kbuf, params.dt, params.weissenberg,
                                  model.b, increments, step, options);
    }
}

void check_fene_dt(const ForceModel& model, const FlowParams& params,
                   const EvolveOptions& options)
{
    if (model.is_fene() && options.enforce_dt_guard && params.dt > 0.1 * params.weissenberg)
        throw ConfigError("FENE timestep guard: dt = " + format_double(params.dt) +
                          " exceeds weissenberg/10 = " + format_double(0.1 * params.weissenberg));
}

} // namespace

void evolve_ensemble(DumbbellEnsemble& ens, const ForceModel& model,
                     const Eigen::MatrixXd& kappa, const FlowParams& params,
                     const IncrementSource& increments, std::uint32_t step,
                     const EvolveOptions& options)
{
    params.validate();
    check_fene_dt(model, params, options);
    for (int c = 0; c < ens.cells(); ++c)
        evolve_one_cell_dispatch(ens, c, model, kappa, params, increments, step, options);
}

void evolve_ensemble_per_cell(DumbbellEnsemble& ens, const ForceModel& model,
                              const std::vector<Eigen::MatrixXd>& kappa_per_cell,
                              const FlowParams& params, const IncrementSource& increments,
                              std::uint32_t step, const EvolveOptions& options)
{
    params.validate();
    check_fene_dt(model, params, options);
    if (static_cast<int>(kappa_per_cell.size()) != ens.cells())
        throw ConfigError("need one velocity gradient per cell");
    for (int c = 0; c < ens.cells(); ++c)
        evolve_one_cell_dispatch(ens, c, model, kappa_per_cell[c], params, increments, step,
                                 options);
}

namespace {

// Accumulates sum of g(|X|) X_i X_j over replicas in fixed chunk order;
// g == 1 gives the second moment, g the FENE factor gives X (x) F(X).
std::vector<Eigen::MatrixXd> weighted_moments(const DumbbellEnsemble& ens, bool fene, double b)
{
    const int d = ens.dim();
    const int ncomp = d * (d + 1) / 2;
    std::vector<Eigen::MatrixXd> out;
    out.reserve(ens.cells());
    const std::size_t chunks = num_chunks(static_cast<std::size_t>(ens.replicas()));
    std::vector<double> partial(chunks * ncomp);

    for (int c = 0; c < ens.cells(); ++c) {
        const double* base = ens.cell_data(c);
        std::fill(partial.begin(), partial.end(), 0.0);
        parallel_for_chunks(
            static_cast<std::size_t>(ens.replicas()),
            [&](std::size_t chunk, std::size_t rb, std::size_t re) {
                double acc[6] = {0, 0, 0, 0, 0, 0};
                for (std::size_t r = rb; r < re; ++r) {
                    const double* x = base + r * d;
                    double g = 1.0;
                    if (fene) {
                        double sq = 0.0;
                        for (int k = 0; k < d; ++k)
                            sq += x[k] * x[k];
                        const double denom = 1.0 - sq / b;
                        if (denom <= 0.0)
                            throw NumericalError("FENE stress: replica outside the ball");
                        g = 1.0 / denom;
                    }
                    int m = 0;
                    for (int i = 0; i < d; ++i)
                        for (int j = i; j < d; ++j)
                            acc[m++] += g * x[i] * x[j];
                }
                for (int m = 0; m < ncomp; ++m)
                    partial[chunk * ncomp + m] = acc[m];
            });
        double total[6] = {0, 0, 0, 0, 0, 0};
        for (std::size_t ch = 0; ch < chunks; ++ch)
            for (int m = 0; m < ncomp; ++m)
                total[m] += partial[ch * ncomp + m];
        Eigen::MatrixXd M(d, d);
        int m = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                M(i, j) = total[m] / ens.replicas();
                M(j, i) = M(i, j);
                ++m;
            }
        out.push_back(std::move(M));
    }
    return out;
}

} // namespace

std::vector<StressTensor> kramers_stress(const DumbbellEnsemble& ens, const ForceModel& model,
                                         const FlowParams& params)
{
    params.validate();
    auto moments = weighted_moments(ens, model.is_fene(), model.b);
    const double scale = params.epsilon / params.weissenberg;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(ens.dim(), ens.dim());
    for (auto& m : moments)
        m = scale * (m - eye);
    return moments;
}

std::vector<Eigen::MatrixXd> second_moment(const DumbbellEnsemble& ens)
{
    return weighted_moments(ens, false, 0.0);
}

} // namespace micromacro::dumbbell
