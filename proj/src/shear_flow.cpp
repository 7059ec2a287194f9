#include "micromacro/shear_flow.hpp"

#include <cmath>

namespace micromacro::shear {

void SchemeConfig::validate() const
{
    params.validate();
    if (cells < 2)
        throw ConfigError("shear solver needs at least 2 cells");
    if (replicas < 1)
        throw ConfigError("shear solver needs at least 1 replica per cell");
    if (macro == constitutive::MacroModel::FeneP && !(fene_p_b > 0.0))
        throw ConfigError("FENE-P macro path requires fene_p_b > 0");
}

ConnffessitState make_connffessit_state(const SchemeConfig& cfg)
{
    cfg.validate();
    ConnffessitState state{std::vector<double>(cfg.cells + 1, 0.0),
                           DumbbellEnsemble::equilibrium(2, cfg.cells, cfg.replicas, cfg.force,
                                                         cfg.seed),
                           std::vector<double>(cfg.cells, 0.0)};
    state.u.front() = cfg.bc_lower(0.0);
    state.u.back() = cfg.bc_upper(0.0);
    return state;
}

MacroShearState make_macro_state(const SchemeConfig& cfg)
{
    cfg.validate();
    MacroShearState state;
    state.u.assign(cfg.cells + 1, 0.0);
    state.u.front() = cfg.bc_lower(0.0);
    state.u.back() = cfg.bc_upper(0.0);
    state.conformation.assign(cfg.cells, Eigen::Matrix2d::Identity());
    state.tau.assign(cfg.cells, 0.0);
    return state;
}

std::vector<double> velocity_update(const std::vector<double>& u,
                                    const std::vector<double>& tau, double g0, double g1,
                                    double re, double eps, double dt, double dy)
{
    const int nodes = static_cast<int>(u.size());
    const int cells = nodes - 1;
    if (static_cast<int>(tau.size()) != cells)
        throw ConfigError("velocity_update: one stress value per cell required");
    const int inner = nodes - 2;
    const double mass = re / dt * dy / 6.0;
    const double stiff = (1.0 - eps) / dy;
    // interior rows i = 1..nodes-2
    std::vector<double> diag(inner, 4.0 * mass + 2.0 * stiff);
    std::vector<double> off(inner > 0 ? inner - 1 : 0, mass - stiff);
    std::vector<double> rhs(inner);
    for (int i = 1; i <= inner; ++i) {
        const double mass_rhs = mass * (u[i - 1] + 4.0 * u[i] + u[i + 1]);
        rhs[i - 1] = mass_rhs + (tau[i] - tau[i - 1]);
    }
    // Dirichlet lift
    rhs[0] -= (mass - stiff) * g0;
    rhs[inner - 1] -= (mass - stiff) * g1;

    const std::vector<double> interior = solve_tridiagonal(off, diag, off, rhs);
    std::vector<double> out(nodes);
    out.front() = g0;
    out.back() = g1;
    for (int i = 0; i < inner; ++i)
        out[i + 1] = interior[i];
    return out;
}

namespace {

// Fixed-order (chunked) per-cell mean of P*Q, with the optional coupling cap.
double mean_pq(const DumbbellEnsemble& ens, int cell, bool cutoff, double cap)
{
    const double* base = ens.cell_data(cell);
    const std::size_t k = static_cast<std::size_t>(ens.replicas());
    const std::size_t chunks = num_chunks(k);
    std::vector<double> partial(chunks, 0.0);
    parallel_for_chunks(k, [&](std::size_t chunk, std::size_t rb, std::size_t re) {
        double acc = 0.0;
        for (std::size_t r = rb; r < re; ++r) {
            const double p = base[2 * r];
            double q = base[2 * r + 1];
            if (cutoff)
                q = std::clamp(q, -cap, cap);
            acc += p * q;
        }
        partial[chunk] = acc;
    });
    double total = 0.0;
    for (double v : partial)
        total += v;
    return total / static_cast<double>(k);
}

} // namespace

void connffessit_step(ConnffessitState& state, const SchemeConfig& cfg,
                      const IncrementSource& increments)
{
    const double we = cfg.params.weissenberg;
    const double dt = cfg.params.dt;
    // (1) stress at time n
    for (int c = 0; c < cfg.cells; ++c)
        state.tau[c] = cfg.params.epsilon / we *
                       mean_pq(state.ensembles, c, cfg.q_cutoff_enabled, cfg.q_cutoff_stds);
    // (2) implicit velocity solve
    const double t_next = state.time + dt;
    state.u = velocity_update(state.u, state.tau, cfg.bc_lower(t_next), cfg.bc_upper(t_next),
                              cfg.params.reynolds, cfg.params.epsilon, dt, cfg.dy());
    // (3) dumbbell update driven by d_y u^{n+1}
    if (!cfg.q_cutoff_enabled) {
        std::vector<Eigen::MatrixXd> kappa(cfg.cells, Eigen::MatrixXd::Zero(2, 2));
        for (int c = 0; c < cfg.cells; ++c)
            kappa[c](0, 1) = (state.u[c + 1] - state.u[c]) / cfg.dy();
        dumbbell::evolve_ensemble_per_cell(state.ensembles, cfg.force, kappa, cfg.params,
                                           increments, state.step);
    } else {
        // capped coupling: P sees clamp(Q) in the drift; otherwise the same
        // Euler-Maruyama update as the plain path
        const double noise = std::sqrt(dt / we);
        const double cap = cfg.q_cutoff_stds;
        const bool fene = cfg.force.is_fene();
        const double b = cfg.force.b;
        for (int c = 0; c < cfg.cells; ++c) {
            const double gamma = (state.u[c + 1] - state.u[c]) / cfg.dy();
            double* base = state.ensembles.cell_data(c);
            parallel_for_chunks(
                static_cast<std::size_t>(cfg.replicas),
                [&](std::size_t, std::size_t rb, std::size_t re) {
                    for (std::size_t r = rb; r < re; ++r) {
                        double p = base[2 * r], q = base[2 * r + 1];
                        double fp = p, fq = q;
                        if (fene) {
                            const double denom = 1.0 - (p * p + q * q) / b;
                            if (denom <= 0.0)
                                throw NumericalError("FENE replica outside the ball");
                            fp = p / denom;
                            fq = q / denom;
                        }
                        const double mp =
                            p + (gamma * std::clamp(q, -cap, cap) - fp / (2.0 * we)) * dt;
                        const double mq = q - fq / (2.0 * we) * dt;
                        double xi[2];
                        for (std::uint32_t attempt = 0;; ++attempt) {
                            increments.normals(static_cast<std::uint32_t>(c),
                                               static_cast<std::uint32_t>(r), state.step,
                                               attempt, 2, xi);
                            const double np = mp + noise * xi[0];
                            const double nq = mq + noise * xi[1];
                            if (!fene || np * np + nq * nq < b * (1.0 - 1e-12) * (1.0 - 1e-12)) {
                                base[2 * r] = np;
                                base[2 * r + 1] = nq;
                                break;
                            }
                            if (attempt >= 100)
                                throw NumericalError("FENE step failed under the Q cutoff path");
                        }
                    }
                });
        }
    }
    state.time = t_next;
    ++state.step;
}

void macro_shear_step(MacroShearState& state, const SchemeConfig& cfg)
{
    const double we = cfg.params.weissenberg;
    const double dt = cfg.params.dt;
    for (int c = 0; c < cfg.cells; ++c)
        state.tau[c] = cfg.params.epsilon / we * state.conformation[c](0, 1);
    const double t_next = state.time + dt;
    state.u = velocity_update(state.u, state.tau, cfg.bc_lower(t_next), cfg.bc_upper(t_next),
                              cfg.params.reynolds, cfg.params.epsilon, dt, cfg.dy());
    for (int c = 0; c < cfg.cells; ++c) {
        Eigen::Matrix2d kappa = Eigen::Matrix2d::Zero();
        kappa(0, 1) = (state.u[c + 1] - state.u[c]) / cfg.dy();
        Eigen::Matrix2d a = state.conformation[c];
        int halvings = 0;
        for (;;) {
            Eigen::Matrix2d trial = a;
            const int substeps = 1 << halvings;
            const double sub_dt = dt / substeps;
            bool ok = true;
            for (int s = 0; s < substeps && ok; ++s) {
                trial = constitutive::semi_implicit_step(cfg.macro, trial, kappa, we,
                                                         cfg.fene_p_b, sub_dt);
                Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(trial,
                                                                  Eigen::EigenvaluesOnly);
                ok = es.eigenvalues().minCoeff() > 0.0 &&
                     (cfg.macro != constitutive::MacroModel::FeneP ||
                      trial.trace() < cfg.fene_p_b);
            }
            if (ok) {
                state.conformation[c] = trial;
                break;
            }
            if (++halvings > 20)
                throw NumericalError("macro shear step lost positive definiteness in cell " +
                                     std::to_string(c));
        }
    }
    state.time = t_next;
    ++state.step;
}

double velocity_l2_sq(const std::vector<double>& u, double dy)
{
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < u.size(); ++i)
        sum += u[i] * u[i] + u[i] * u[i + 1] + u[i + 1] * u[i + 1];
    return sum * dy / 3.0;
}

FreeEnergySeries free_energy_monitor(const std::vector<MacroShearState>& trajectory,
                                     const SchemeConfig& cfg, bool zero_forcing)
{
    FreeEnergySeries series;
    const double dy = cfg.dy();
    for (const auto& state : trajectory) {
        std::vector<constitutive::ConformationTensor> field;
        field.reserve(state.conformation.size());
        for (const auto& a : state.conformation)
            field.emplace_back(Eigen::MatrixXd(a));
        const std::vector<double> measures(state.conformation.size(), dy);
        const double u2 = velocity_l2_sq(state.u, dy);
        constitutive::FreeEnergyRecord rec;
        if (cfg.macro == constitutive::MacroModel::FeneP)
            rec = constitutive::fene_p_free_energy(field, measures, cfg.params, cfg.fene_p_b,
                                                   u2);
        else
            rec = constitutive::oldroyd_b_free_energy(u2, field, measures, cfg.params);
        series.times.push_back(state.time);
        series.records.push_back(rec);
    }
    if (zero_forcing) {
        for (std::size_t i = 1; i < series.records.size(); ++i) {
            const double inc = series.records[i].total - series.records[i - 1].total;
            if (inc > 1e-12) {
                series.increase_flagged = true;
                series.max_increase = std::max(series.max_increase, inc);
            }
        }
    }
    return series;
}

namespace {

// P1 nodal field evaluated on a finer uniform node set.
std::vector<double> inject_velocity(const std::vector<double>& u, int fine_cells)
{
    const int coarse_cells = static_cast<int>(u.size()) - 1;
    std::vector<double> out(fine_cells + 1);
    for (int i = 0; i <= fine_cells; ++i) {
        const double y = static_cast<double>(i) / fine_cells;
        const double pos = y * coarse_cells;
        const int c = std::min(coarse_cells - 1, static_cast<int>(pos));
        const double frac = pos - c;
        out[i] = (1.0 - frac) * u[c] + frac * u[c + 1];
    }
    return out;
}

// Piecewise-constant field evaluated on finer cells.
std::vector<double> inject_stress(const std::vector<double>& tau, int fine_cells)
{
    const int coarse_cells = static_cast<int>(tau.size());
    std::vector<double> out(fine_cells);
    for (int i = 0; i < fine_cells; ++i) {
        const double y = (i + 0.5) / fine_cells;
        const int c = std::min(coarse_cells - 1, static_cast<int>(y * coarse_cells));
        out[i] = tau[c];
    }
    return out;
}

double l2_node_error(const std::vector<double>& a, const std::vector<double>& b, double dy)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        const double w = (i == 0 || i + 1 == a.size()) ? 0.5 : 1.0;
        sum += w * d * d;
    }
    return std::sqrt(sum * dy);
}

double l1_cell_error(const std::vector<double>& a, const std::vector<double>& b, double dy)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        sum += std::abs(a[i] - b[i]);
    return sum * dy;
}

struct FinalFields {
    std::vector<double> u;
    std::vector<double> tau;
};

FinalFields run_macro(const ConvergenceStudyConfig& study, int cells, double dt)
{
    SchemeConfig cfg;
    cfg.cells = cells;
    cfg.replicas = 1;
    cfg.params = study.params;
    cfg.params.dt = dt;
    cfg.force = ForceModel::hookean();
    cfg.macro = constitutive::MacroModel::OldroydB;
    cfg.bc_upper = [&study](double t) {
        return study.bc_amplitude * std::sin(2.0 * M_PI * study.bc_frequency * t);
    };
    MacroShearState state = make_macro_state(cfg);
    const long steps = std::lround(study.t_end / dt);
    for (long n = 0; n < steps; ++n)
        macro_shear_step(state, cfg);
    // report the stress actually entering the velocity equation at T
    std::vector<double> tau(cfg.cells);
    for (int c = 0; c < cfg.cells; ++c)
        tau[c] = cfg.params.epsilon / cfg.params.weissenberg * state.conformation[c](0, 1);
    return {state.u, tau};
}

FinalFields run_connffessit(const ConvergenceStudyConfig& study, int cells, double dt, int k,
                            std::uint64_t seed)
{
    SchemeConfig cfg;
    cfg.cells = cells;
    cfg.replicas = k;
    cfg.params = study.params;
    cfg.params.dt = dt;
    cfg.force = ForceModel::hookean();
    cfg.seed = seed;
    cfg.bc_upper = [&study](double t) {
        return study.bc_amplitude * std::sin(2.0 * M_PI * study.bc_frequency * t);
    };
    ConnffessitState state = make_connffessit_state(cfg);
    dumbbell::IndependentIncrements increments(seed);
    const long steps = std::lround(study.t_end / dt);
    for (long n = 0; n < steps; ++n)
        connffessit_step(state, cfg, increments);
    std::vector<double> tau(cfg.cells);
    for (int c = 0; c < cfg.cells; ++c)
        tau[c] = cfg.params.epsilon / cfg.params.weissenberg *
                 mean_pq(state.ensembles, c, false, 0.0);
    return {state.u, tau};
}

} // namespace

ConvergenceStudy convergence_study(const ConvergenceStudyConfig& study)
{
    ConvergenceStudy result;
    const double dy_fine = 1.0 / study.ref_cells;
    const FinalFields ref = run_macro(study, study.ref_cells, study.ref_dt);

    // timestep sweep at the reference resolution
    std::vector<double> dt_errors;
    for (double dt : study.dts) {
        const FinalFields f = run_macro(study, study.ref_cells, dt);
        ConvergenceRow row{"dt", dt, l2_node_error(f.u, ref.u, dy_fine),
                           l1_cell_error(f.tau, ref.tau, dy_fine), 0.0};
        row.error_total = row.error_u + row.error_tau;
        dt_errors.push_back(row.error_total);
        result.rows.push_back(row);
    }
    result.order_dt = fit_loglog(study.dts, dt_errors).slope;

    // mesh sweep at the reference timestep
    std::vector<double> dys, dy_errors;
    for (int cells : study.cell_counts) {
        const FinalFields f = run_macro(study, cells, study.ref_dt);
        const std::vector<double> u_fine = inject_velocity(f.u, study.ref_cells);
        const std::vector<double> tau_fine = inject_stress(f.tau, study.ref_cells);
        ConvergenceRow row{"dy", 1.0 / cells, l2_node_error(u_fine, ref.u, dy_fine),
                           l1_cell_error(tau_fine, ref.tau, dy_fine), 0.0};
        row.error_total = row.error_u + row.error_tau;
        dys.push_back(1.0 / cells);
        dy_errors.push_back(row.error_total);
        result.rows.push_back(row);
    }
    result.order_dy = fit_loglog(dys, dy_errors).slope;

    // replica sweep against the deterministic limit on the same grid
    const FinalFields mc_ref = run_macro(study, study.k_cells, study.k_dt);
    std::vector<double> ks, k_errors;
    for (int k : study.k_values) {
        double err_u = 0.0, err_tau = 0.0;
        for (int rep = 0; rep < study.k_replications; ++rep) {
            const FinalFields f =
                run_connffessit(study, study.k_cells, study.k_dt, k,
                                study.seed + 977u * static_cast<std::uint64_t>(rep));
            err_u += l2_node_error(f.u, mc_ref.u, 1.0 / study.k_cells);
            err_tau += l1_cell_error(f.tau, mc_ref.tau, 1.0 / study.k_cells);
        }
        err_u /= study.k_replications;
        err_tau /= study.k_replications;
        ConvergenceRow row{"k", static_cast<double>(k), err_u, err_tau, err_u + err_tau};
        ks.push_back(static_cast<double>(k));
        k_errors.push_back(row.error_total);
        result.rows.push_back(row);
    }
    result.slope_k = fit_loglog(ks, k_errors).slope;
    return result;
}

} // namespace micromacro::shear
