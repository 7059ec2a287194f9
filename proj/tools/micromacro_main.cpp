// Command-line front end: one subcommand per solver, flat key=value config
// files (flags override file values), deterministic seeding, CSV outputs and
// a manifest per run. Exit codes: 0 success, 2 configuration error,
// 3 numerical failure.

#include <CLI11.hpp>
#include <cstdio>

#include "micromacro/common.hpp"
#include "micromacro/run_io.hpp"

using namespace micromacro;

int main(int argc, char** argv)
{
    CLI::App app{"micro-macro simulation toolkit for dilute polymeric fluids"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value run configuration; flags override");
    app.allow_config_extras(false);

    std::uint64_t seed = 12345;
    int threads = 1;
    std::string out_dir = "out";
    app.add_option("--seed", seed, "root seed for every stochastic stream")
        ->capture_default_str();
    app.add_option("--threads", threads, "worker threads (results are thread-count independent)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--out", out_dir, "output directory")->capture_default_str();

    const auto positive = CLI::PositiveNumber;
    const auto eps_range = CLI::Range(std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0));

    // ---- shear ------------------------------------------------------------
    io::ShearRunOptions shear_opts;
    auto* shear = app.add_subcommand("shear", "coupled 1D Couette solver");
    shear->add_option("--model", shear_opts.model, "hookean|fene|oldroyd-b|fene-p")
        ->capture_default_str();
    shear->add_option("--re", shear_opts.re, "Reynolds number")->check(positive)
        ->capture_default_str();
    shear->add_option("--we", shear_opts.we, "Weissenberg number")->check(positive)
        ->capture_default_str();
    shear->add_option("--eps", shear_opts.eps, "polymer viscosity fraction, in (0,1)")
        ->check(eps_range)
        ->capture_default_str();
    shear->add_option("--b", shear_opts.b, "FENE extensibility")->capture_default_str();
    shear->add_option("--dy", shear_opts.dy, "mesh size (must divide 1)")->check(positive)
        ->capture_default_str();
    shear->add_option("--dt", shear_opts.dt, "timestep")->check(positive)
        ->capture_default_str();
    shear->add_option("--k", shear_opts.k, "replicas per cell")->check(positive)
        ->capture_default_str();
    shear->add_option("--t-end", shear_opts.t_end, "final time")->check(positive)
        ->capture_default_str();
    shear->add_option("--brownian", shear_opts.brownian, "constant|iid|alternating")
        ->capture_default_str();
    shear->add_option("--u-lower", shear_opts.u_lower, "lower wall velocity")
        ->capture_default_str();
    shear->add_option("--u-upper", shear_opts.u_upper, "upper wall velocity")
        ->capture_default_str();
    shear->add_option("--output-every", shear_opts.output_every,
                      "snapshot cadence in steps (0 = automatic)")
        ->capture_default_str();

    // ---- homogeneous -------------------------------------------------------
    io::HomogeneousRunOptions homo_opts;
    auto* homo = app.add_subcommand("homogeneous",
                                    "constitutive models under a prescribed gradient");
    homo->add_option("--model", homo_opts.model, "oldroyd-b|fene-p|corotational")
        ->capture_default_str();
    homo->add_option("--re", homo_opts.re)->check(positive)->capture_default_str();
    homo->add_option("--we", homo_opts.we)->check(positive)->capture_default_str();
    homo->add_option("--eps", homo_opts.eps)->check(eps_range)->capture_default_str();
    homo->add_option("--b", homo_opts.b, "FENE-P extensibility")->capture_default_str();
    homo->add_option("--dt", homo_opts.dt)->check(positive)->capture_default_str();
    homo->add_option("--t-end", homo_opts.t_end)->check(positive)->capture_default_str();
    homo->add_option("--shear-rate", homo_opts.shear_rate, "simple shear rate")
        ->capture_default_str();
    homo->add_option("--kappa", homo_opts.kappa, "full gradient k00,k01,k10,k11");
    homo->add_option("--a0", homo_opts.a0, "initial tensor xx,xy,yy (default identity)");

    // ---- fokker-planck ------------------------------------------------------
    io::FokkerPlanckRunOptions fp_opts;
    auto* fp = app.add_subcommand("fokker-planck",
                                  "deterministic configuration-density solver");
    fp->add_option("--model", fp_opts.model, "hookean|fene")->capture_default_str();
    fp->add_option("--we", fp_opts.we)->check(positive)->capture_default_str();
    fp->add_option("--b", fp_opts.b, "FENE extensibility")->capture_default_str();
    fp->add_option("--kappa", fp_opts.kappa, "gradient k00,k01,k10,k11 (default zero)");
    fp->add_option("--grid-n", fp_opts.grid_n, "cells per direction")->check(positive)
        ->capture_default_str();
    fp->add_option("--half-width", fp_opts.half_width,
                   "domain half width (0 = automatic)")
        ->capture_default_str();
    fp->add_option("--dt", fp_opts.dt, "timestep (0 = 90% of the stability bound)")
        ->capture_default_str();
    fp->add_option("--t-end", fp_opts.t_end)->check(positive)->capture_default_str();
    fp->add_option("--init", fp_opts.init, "equilibrium|shifted|uniform")
        ->capture_default_str();

    // ---- pgd ----------------------------------------------------------------
    io::PgdRunOptions pgd_opts;
    auto* pgd = app.add_subcommand("pgd", "greedy rank-1 Poisson solver");
    pgd->add_option("--nx", pgd_opts.nx)->check(positive)->capture_default_str();
    pgd->add_option("--ny", pgd_opts.ny)->check(positive)->capture_default_str();
    pgd->add_option("--rhs", pgd_opts.rhs, "separable|constant|file")
        ->capture_default_str();
    pgd->add_option("--rhs-file", pgd_opts.rhs_file, "whitespace-separated nx*ny values");
    pgd->add_option("--tol", pgd_opts.tol, "H^-1 residual tolerance")->check(positive)
        ->capture_default_str();
    pgd->add_option("--max-terms", pgd_opts.max_terms)->check(positive)
        ->capture_default_str();

    // ---- rb-offline ----------------------------------------------------------
    io::RbOfflineRunOptions rboff_opts;
    auto* rboff = app.add_subcommand("rb-offline",
                                     "greedy reduced basis of control variates");
    rboff->add_option("--we", rboff_opts.we)->check(positive)->capture_default_str();
    rboff->add_option("--eps", rboff_opts.eps)->check(eps_range)->capture_default_str();
    rboff->add_option("--re", rboff_opts.re)->check(positive)->capture_default_str();
    rboff->add_option("--b", rboff_opts.b, "FENE extensibility")->check(positive)
        ->capture_default_str();
    rboff->add_option("--dt", rboff_opts.dt)->check(positive)->capture_default_str();
    rboff->add_option("--t-end", rboff_opts.t_end)->check(positive)->capture_default_str();
    rboff->add_option("--trial-count", rboff_opts.trial_count)->check(positive)
        ->capture_default_str();
    rboff->add_option("--gamma-min", rboff_opts.gamma_min)->capture_default_str();
    rboff->add_option("--gamma-max", rboff_opts.gamma_max)->capture_default_str();
    rboff->add_option("--n-basis", rboff_opts.n_basis)->check(positive)
        ->capture_default_str();
    rboff->add_option("--m-large", rboff_opts.m_large)->check(positive)
        ->capture_default_str();

    // ---- rb-online -------------------------------------------------------------
    io::RbOnlineRunOptions rbon_opts;
    auto* rbon = app.add_subcommand("rb-online", "corrected estimate from a stored basis");
    rbon->add_option("--basis", rbon_opts.basis_path, "basis.json from rb-offline")
        ->required();
    rbon->add_option("--gamma", rbon_opts.gamma, "shear rate of the online parameter")
        ->capture_default_str();
    rbon->add_option("--kappa", rbon_opts.kappa, "full gradient k00,k01,k10,k11");
    rbon->add_option("--m-small", rbon_opts.m_small)->check(positive)
        ->capture_default_str();

    // ---- variance-study -----------------------------------------------------------
    io::VarianceStudyRunOptions var_opts;
    auto* var = app.add_subcommand("variance-study",
                                   "Brownian spatial-correlation comparison");
    var->add_option("--re", var_opts.re)->check(positive)->capture_default_str();
    var->add_option("--we", var_opts.we)->check(positive)->capture_default_str();
    var->add_option("--eps", var_opts.eps)->check(eps_range)->capture_default_str();
    var->add_option("--dy", var_opts.dy)->check(positive)->capture_default_str();
    var->add_option("--dt", var_opts.dt)->check(positive)->capture_default_str();
    var->add_option("--t-end", var_opts.t_end)->check(positive)->capture_default_str();
    var->add_option("--k", var_opts.k)->check(positive)->capture_default_str();
    var->add_option("--repeats", var_opts.repeats)->check(positive)->capture_default_str();
    var->add_option("--u-upper", var_opts.u_upper)->capture_default_str();

    // ---- convergence-study -----------------------------------------------------------
    io::ConvergenceStudyRunOptions conv_opts;
    auto* conv = app.add_subcommand("convergence-study",
                                    "self-convergence orders in dt, dy and K");
    conv->add_option("--re", conv_opts.re)->check(positive)->capture_default_str();
    conv->add_option("--we", conv_opts.we)->check(positive)->capture_default_str();
    conv->add_option("--eps", conv_opts.eps)->check(eps_range)->capture_default_str();
    conv->add_option("--t-end", conv_opts.t_end)->check(positive)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        set_thread_count(threads);
        shear_opts.seed = seed;
        rboff_opts.seed = seed;
        var_opts.seed = seed;
        conv_opts.seed = seed;
        if (shear->parsed())
            io::run_shear(shear_opts, out_dir, threads);
        else if (homo->parsed())
            io::run_homogeneous(homo_opts, out_dir);
        else if (fp->parsed())
            io::run_fokker_planck(fp_opts, out_dir);
        else if (pgd->parsed())
            io::run_pgd(pgd_opts, out_dir);
        else if (rboff->parsed())
            io::run_rb_offline(rboff_opts, out_dir);
        else if (rbon->parsed())
            io::run_rb_online(rbon_opts, out_dir);
        else if (var->parsed())
            io::run_variance_study(var_opts, out_dir);
        else if (conv->parsed())
            io::run_convergence_study(conv_opts, out_dir);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
