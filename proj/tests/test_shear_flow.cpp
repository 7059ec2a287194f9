#include <doctest.h>

#include <cmath>

#include "micromacro/shear_flow.hpp"
#include "micromacro/variance_reduction.hpp"

using namespace micromacro;
using namespace micromacro::shear;

namespace {

SchemeConfig basic_config(int cells, int replicas, double dt, std::uint64_t seed)
{
    SchemeConfig cfg;
    cfg.cells = cells;
    cfg.replicas = replicas;
    cfg.params = {0.1, 1.0, 0.5, dt};
    cfg.force = dumbbell::ForceModel::hookean();
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("velocity update: implicit diffusion is unconditionally stable")
{
    const int cells = 16;
    const double dy = 1.0 / cells;
    std::vector<double> u(cells + 1, 0.0), tau(cells, 0.0);
    for (int c = 0; c < cells; ++c)
        tau[c] = 0.3 * std::sin(2.0 * M_PI * (c + 0.5) * dy);
    for (int n = 0; n < 50; ++n) {
        u = velocity_update(u, tau, 0.0, 0.0, 1.0, 0.5, 100.0, dy); // dt = 100
        for (double v : u)
            CHECK(std::abs(v) < 10.0);
    }

    // with zero stress and boundaries the velocity decays to zero
    std::vector<double> w(cells + 1);
    for (int i = 0; i <= cells; ++i)
        w[i] = std::sin(M_PI * i * dy);
    const std::vector<double> no_stress(cells, 0.0);
    for (int n = 0; n < 400; ++n)
        w = velocity_update(w, no_stress, 0.0, 0.0, 1.0, 0.5, 1e-2, dy);
    for (double v : w)
        CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("zero forcing keeps the velocity at Monte Carlo noise level")
{
    const int cells = 8, k = 200, reps = 30, steps = 100;
    const double eps_over_we = 0.5;
    std::vector<double> u_mid;
    for (int rep = 0; rep < reps; ++rep) {
        SchemeConfig cfg = basic_config(cells, k, 5e-3, 100 + rep);
        ConnffessitState state = make_connffessit_state(cfg);
        const dumbbell::IndependentIncrements inc(cfg.seed);
        for (int n = 0; n < steps; ++n)
            connffessit_step(state, cfg, inc);
        u_mid.push_back(state.u[cells / 2]);
    }
    double mean = 0.0, rms = 0.0;
    for (double v : u_mid)
        mean += v;
    mean /= reps;
    for (double v : u_mid)
        rms += v * v;
    rms = std::sqrt(rms / reps);
    // symmetric problem: the mean is zero within its own standard error, and
    // the fluctuation scale is (eps/We)/sqrt(K) up to an O(1) solver gain
    CHECK(std::abs(mean) < 4.0 * rms / std::sqrt(static_cast<double>(reps)));
    CHECK(rms < 10.0 * eps_over_we / std::sqrt(static_cast<double>(k)));
    CHECK(rms > 0.0);
}

TEST_CASE("Hookean startup Couette reaches the affine steady state")
{
    SchemeConfig cfg = basic_config(16, 4000, 2e-3, 7);
    cfg.bc_upper = [](double) { return 1.0; };
    ConnffessitState state = make_connffessit_state(cfg);
    const dumbbell::IndependentIncrements inc(cfg.seed);
    const int steps = 2500; // T = 5 We
    for (int n = 0; n < steps; ++n)
        connffessit_step(state, cfg, inc);

    const double dy = cfg.dy();
    for (int i = 0; i <= cfg.cells; ++i)
        CHECK(std::abs(state.u[i] - i * dy) < 0.05);
    // stress is spatially constant, equal to (eps/We) We gamma = eps
    for (int c = 0; c < cfg.cells; ++c)
        CHECK(std::abs(state.tau[c] - 0.5) < 0.05 * 0.5 + 0.02);

    // Q is an autonomous Ornstein-Uhlenbeck process with unit variance
    double q2 = 0.0;
    for (int c = 0; c < cfg.cells; ++c)
        for (int r = 0; r < cfg.replicas; ++r)
            q2 += state.ensembles.component(c, r, 1) * state.ensembles.component(c, r, 1);
    const double pooled = static_cast<double>(cfg.cells) * cfg.replicas;
    q2 /= pooled;
    CHECK(std::abs(q2 - 1.0) < 3.0 * std::sqrt(2.0 / pooled));
}

TEST_CASE("deterministic reproducibility across seeds and thread counts")
{
    auto run = [](std::uint64_t seed, int threads) {
        set_thread_count(threads);
        SchemeConfig cfg = basic_config(8, 500, 5e-3, seed);
        cfg.bc_upper = [](double) { return 1.0; };
        ConnffessitState state = make_connffessit_state(cfg);
        const dumbbell::IndependentIncrements inc(seed);
        for (int n = 0; n < 200; ++n)
            connffessit_step(state, cfg, inc);
        set_thread_count(1);
        return state;
    };
    const auto a = run(42, 1);
    const auto b = run(42, 3);
    const auto c = run(43, 1);
    CHECK(a.u == b.u);
    CHECK(a.tau == b.tau);
    bool configs_equal = true;
    for (int cell = 0; cell < 8 && configs_equal; ++cell)
        for (int r = 0; r < 500 && configs_equal; ++r)
            for (int comp = 0; comp < 2; ++comp)
                if (a.ensembles.component(cell, r, comp) !=
                    b.ensembles.component(cell, r, comp)) {
                    configs_equal = false;
                    break;
                }
    CHECK(configs_equal);
    CHECK(a.u != c.u);
}

TEST_CASE("macro path: exact affine steady state and zero-forcing decay")
{
    SUBCASE("driven Couette settles on the affine profile")
    {
        SchemeConfig cfg = basic_config(16, 1, 5e-3, 0);
        cfg.bc_upper = [](double) { return 1.0; };
        MacroShearState state = make_macro_state(cfg);
        for (int n = 0; n < 2400; ++n) // T = 12 We
            macro_shear_step(state, cfg);
        const double dy = cfg.dy();
        for (int i = 0; i <= cfg.cells; ++i)
            CHECK(std::abs(state.u[i] - i * dy) < 1e-4);
        for (int c = 0; c < cfg.cells; ++c) {
            CHECK(state.conformation[c](0, 1) == doctest::Approx(1.0).epsilon(1e-4));
            CHECK(state.conformation[c](1, 1) == doctest::Approx(1.0).epsilon(1e-4));
        }
    }
    SUBCASE("zero forcing decays with monotone free energy")
    {
        SchemeConfig cfg = basic_config(16, 1, 2e-3, 0);
        MacroShearState state = make_macro_state(cfg);
        const double dy = cfg.dy();
        for (int c = 0; c < cfg.cells; ++c) {
            const double y = (c + 0.5) * dy;
            Eigen::Matrix2d a;
            a << 1.5, 0.3 * std::sin(M_PI * y), 0.3 * std::sin(M_PI * y), 0.9;
            state.conformation[c] = a;
        }
        std::vector<MacroShearState> trajectory{state};
        double max_u = 0.0;
        for (int n = 0; n < 3000; ++n) {
            macro_shear_step(state, cfg);
            for (double v : state.u)
                max_u = std::max(max_u, std::abs(v));
            if (n % 10 == 0)
                trajectory.push_back(state);
        }
        trajectory.push_back(state);
        CHECK(max_u > 1e-4); // the heterogeneous stress really kicks the fluid
        for (double v : state.u)
            CHECK(std::abs(v) < 1e-6); // and it relaxes back
        const auto series = free_energy_monitor(trajectory, cfg, true);
        CHECK_FALSE(series.increase_flagged);
        CHECK(series.records.back().total < series.records.front().total);

        // driven runs are reported but never flagged
        const auto driven = free_energy_monitor(trajectory, cfg, false);
        CHECK_FALSE(driven.increase_flagged);
    }
    SUBCASE("equilibrium stays at zero free energy")
    {
        SchemeConfig cfg = basic_config(8, 1, 5e-3, 0);
        MacroShearState state = make_macro_state(cfg);
        std::vector<MacroShearState> trajectory{state};
        for (int n = 0; n < 100; ++n) {
            macro_shear_step(state, cfg);
            trajectory.push_back(state);
        }
        const auto series = free_energy_monitor(trajectory, cfg, true);
        CHECK_FALSE(series.increase_flagged);
        for (const auto& rec : series.records)
            CHECK(std::abs(rec.total) < 1e-14);
    }
}

TEST_CASE("CONNFFESSIT expectation tracks the macro solver")
{
    SchemeConfig cfg = basic_config(16, 2000, 2e-3, 99);
    cfg.bc_upper = [](double) { return 1.0; };
    ConnffessitState mc = make_connffessit_state(cfg);
    MacroShearState macro = make_macro_state(cfg);
    const dumbbell::IndependentIncrements inc(cfg.seed);
    const int steps = 1000; // T = 2 We
    for (int n = 0; n < steps; ++n) {
        connffessit_step(mc, cfg, inc);
        macro_shear_step(macro, cfg);
    }
    for (int c = 0; c < cfg.cells; ++c) {
        double mean_pq = 0.0, var_pq = 0.0;
        for (int r = 0; r < cfg.replicas; ++r)
            mean_pq += mc.ensembles.component(c, r, 0) * mc.ensembles.component(c, r, 1);
        mean_pq /= cfg.replicas;
        for (int r = 0; r < cfg.replicas; ++r) {
            const double d =
                mc.ensembles.component(c, r, 0) * mc.ensembles.component(c, r, 1) - mean_pq;
            var_pq += d * d;
        }
        const double se = std::sqrt(var_pq / (cfg.replicas - 1.0) / cfg.replicas);
        CHECK(std::abs(mean_pq - macro.conformation[c](0, 1)) < 5.0 * se);
    }
}

TEST_CASE("optional Q cutoff clamps the coupling")
{
    SchemeConfig plain = basic_config(4, 200, 5e-3, 5);
    plain.bc_upper = [](double) { return 1.0; };
    SchemeConfig capped = plain;
    capped.q_cutoff_enabled = true;
    capped.q_cutoff_stds = 0.5; // aggressive cap so the paths must differ

    ConnffessitState a = make_connffessit_state(plain);
    ConnffessitState b = make_connffessit_state(capped);
    const dumbbell::IndependentIncrements inc(5);
    for (int n = 0; n < 100; ++n) {
        connffessit_step(a, plain, inc);
        connffessit_step(b, capped, inc);
    }
    CHECK(a.u != b.u);
    for (double v : b.u)
        CHECK(std::isfinite(v));
}

TEST_CASE("configuration validation")
{
    SchemeConfig cfg = basic_config(1, 100, 1e-3, 0);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = basic_config(8, 0, 1e-3, 0);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = basic_config(8, 10, 1e-3, 0);
    cfg.macro = constitutive::MacroModel::FeneP;
    CHECK_THROWS_AS(cfg.validate(), ConfigError); // missing extensibility
}

TEST_CASE("convergence orders in dt, dy and K")
{
    ConvergenceStudyConfig study;
    study.params = {1.0, 1.0, 0.5, 1e-3};
    study.t_end = 0.5;
    study.ref_cells = 256;
    study.ref_dt = 5e-4;
    study.dts = {8e-3, 4e-3, 2e-3};
    study.cell_counts = {16, 32, 64};
    study.k_values = {100, 1000, 10000};
    study.k_cells = 8;
    study.k_dt = 1e-3;
    study.k_replications = 8;
    const auto result = convergence_study(study);
    CHECK(result.order_dt == doctest::Approx(1.0).epsilon(0.35));
    CHECK(result.order_dy == doctest::Approx(1.0).epsilon(0.35));
    CHECK(result.slope_k == doctest::Approx(-0.5).epsilon(0.3));
    CHECK(result.rows.size() == 9);
}
