#include "micromacro/run_io.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "micromacro/fokker_planck.hpp"
#include "micromacro/macro_models.hpp"
#include "micromacro/pgd.hpp"
#include "micromacro/shear_flow.hpp"
#include "micromacro/variance_reduction.hpp"

namespace micromacro::io {

using nlohmann::json;

void RunConfig::add(const std::string& key, const std::string& value)
{
    entries.emplace_back(key, value);
}
void RunConfig::add(const std::string& key, double value)
{
    entries.emplace_back(key, format_double(value));
}
void RunConfig::add(const std::string& key, long long value)
{
    entries.emplace_back(key, std::to_string(value));
}
void RunConfig::add(const std::string& key, std::uint64_t value)
{
    entries.emplace_back(key, std::to_string(value));
}

RunWriter::RunWriter(RunConfig config)
    : config_(std::move(config)), start_(std::chrono::steady_clock::now())
{
    std::filesystem::create_directories(config_.out_dir);
}

void RunWriter::write_table(const std::string& filename, const CsvTable& table)
{
    write_csv(config_.out_dir / filename, table);
    outputs_.push_back(filename);
}

void RunWriter::write_text(const std::string& filename, const std::string& content)
{
    std::ofstream os(config_.out_dir / filename, std::ios::binary);
    if (!os)
        throw ConfigError("cannot open '" + (config_.out_dir / filename).string() + "'");
    os << content;
    os.flush();
    if (!os)
        throw ConfigError("write failed for '" + filename + "'");
    outputs_.push_back(filename);
}

void RunWriter::finalize()
{
    if (finalized_)
        return;
    json manifest;
    manifest["artifact"] = kArtifactName;
    manifest["version"] = kArtifactVersion;
    manifest["subcommand"] = config_.subcommand;
    json cfg = json::object();
    for (const auto& [k, v] : config_.entries)
        cfg[k] = v;
    manifest["config"] = cfg;
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    manifest["duration_seconds"] =
        std::chrono::duration_cast<std::chrono::duration<double>>(elapsed).count();
    json sums = json::object();
    for (const auto& name : outputs_)
        sums[name] = crc32_file_hex(config_.out_dir / name);
    manifest["outputs"] = sums;

    const auto tmp = config_.out_dir / "manifest.json.tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os)
            throw ConfigError("cannot open '" + tmp.string() + "'");
        os << manifest.dump(2) << "\n";
        os.flush();
        if (!os)
            throw ConfigError("write failed for manifest");
    }
    std::filesystem::rename(tmp, config_.out_dir / "manifest.json");
    finalized_ = true;
}

namespace {

Eigen::Matrix2d parse_matrix2(const std::string& text, const std::string& what)
{
    Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
    if (text.empty())
        return m;
    std::vector<double> vals;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = text.find(',', pos);
        const std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                            : comma - pos);
        try {
            vals.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError(what + ": cannot parse '" + tok + "' as a number");
        }
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    if (vals.size() != 4)
        throw ConfigError(what + ": expected 4 comma-separated entries k00,k01,k10,k11");
    m << vals[0], vals[1], vals[2], vals[3];
    return m;
}

int cells_from_dy(double dy)
{
    if (!(dy > 0.0) || dy > 0.5)
        throw ConfigError("dy must lie in (0, 0.5]");
    const int cells = static_cast<int>(std::lround(1.0 / dy));
    if (std::abs(cells * dy - 1.0) > 1e-9)
        throw ConfigError("dy = " + format_double(dy) + " must divide the unit channel");
    return cells;
}

int default_cadence(double t_end, double dt, int target_snapshots = 50)
{
    const long steps = std::lround(t_end / dt);
    return std::max(1L, steps / target_snapshots);
}

} // namespace

void run_shear(const ShearRunOptions& opts, const std::filesystem::path& out_dir, int threads)
{
    set_thread_count(threads);
    RunConfig config;
    config.subcommand = "shear";
    config.out_dir = out_dir;
    config.add("model", opts.model);
    config.add("re", opts.re);
    config.add("we", opts.we);
    config.add("eps", opts.eps);
    config.add("b", opts.b);
    config.add("dy", opts.dy);
    config.add("dt", opts.dt);
    config.add("k", static_cast<long long>(opts.k));
    config.add("t_end", opts.t_end);
    config.add("seed", opts.seed);
    config.add("brownian", opts.brownian);
    config.add("u_lower", opts.u_lower);
    config.add("u_upper", opts.u_upper);
    RunWriter writer(std::move(config));

    shear::SchemeConfig cfg;
    cfg.cells = cells_from_dy(opts.dy);
    cfg.replicas = opts.k;
    cfg.params = {opts.re, opts.we, opts.eps, opts.dt};
    cfg.seed = opts.seed;
    cfg.bc_lower = [v = opts.u_lower](double) { return v; };
    cfg.bc_upper = [v = opts.u_upper](double) { return v; };

    const bool mc_path = opts.model == "hookean" || opts.model == "fene";
    if (opts.model == "hookean")
        cfg.force = dumbbell::ForceModel::hookean();
    else if (opts.model == "fene")
        cfg.force = dumbbell::ForceModel::fene(opts.b);
    else if (opts.model == "oldroyd-b")
        cfg.macro = constitutive::MacroModel::OldroydB;
    else if (opts.model == "fene-p") {
        cfg.macro = constitutive::MacroModel::FeneP;
        cfg.fene_p_b = opts.b;
    } else
        throw ConfigError("shear: unknown model '" + opts.model +
                          "' (hookean|fene|oldroyd-b|fene-p)");

    const long steps = std::lround(opts.t_end / opts.dt);
    const int every = opts.output_every > 0 ? opts.output_every
                                            : default_cadence(opts.t_end, opts.dt);

    CsvTable velocity{{"t", "y", "u"}, {}};
    CsvTable stress{{"t", "cell", "tau"}, {}};
    CsvTable energy{{"t", "kinetic", "entropic", "total", "dissipation"}, {}};

    const double dy = cfg.dy();
    auto snapshot = [&](double t, const std::vector<double>& u, const std::vector<double>& tau,
                        const std::vector<Eigen::Matrix2d>& conf) {
        for (std::size_t i = 0; i < u.size(); ++i)
            velocity.rows.push_back({t, static_cast<double>(i) * dy, u[i]});
        for (std::size_t c = 0; c < tau.size(); ++c)
            stress.rows.push_back({t, static_cast<long long>(c), tau[c]});
        std::vector<constitutive::ConformationTensor> field;
        field.reserve(conf.size());
        for (const auto& a : conf)
            field.emplace_back(Eigen::MatrixXd(a));
        const std::vector<double> measures(conf.size(), dy);
        constitutive::FreeEnergyRecord rec;
        if (cfg.macro == constitutive::MacroModel::FeneP && !mc_path)
            rec = constitutive::fene_p_free_energy(field, measures, cfg.params, cfg.fene_p_b,
                                                   shear::velocity_l2_sq(u, dy));
        else
            rec = constitutive::oldroyd_b_free_energy(shear::velocity_l2_sq(u, dy), field,
                                                      measures, cfg.params);
        energy.rows.push_back({t, rec.kinetic, rec.entropic, rec.total, rec.dissipation});
    };

    if (mc_path) {
        shear::ConnffessitState state = shear::make_connffessit_state(cfg);
        const varred::BrownianStrategy increments(
            varred::brownian_variant_from_name(opts.brownian), opts.seed);
        auto empirical_conf = [&]() {
            const auto moments = dumbbell::second_moment(state.ensembles);
            std::vector<Eigen::Matrix2d> conf(moments.size());
            for (std::size_t c = 0; c < moments.size(); ++c)
                conf[c] = moments[c];
            return conf;
        };
        auto stress_now = [&]() {
            const auto taus =
                dumbbell::kramers_stress(state.ensembles, cfg.force, cfg.params);
            std::vector<double> out(taus.size());
            for (std::size_t c = 0; c < taus.size(); ++c)
                out[c] = taus[c](0, 1);
            return out;
        };
        snapshot(0.0, state.u, stress_now(), empirical_conf());
        for (long n = 0; n < steps; ++n) {
            shear::connffessit_step(state, cfg, increments);
            if ((n + 1) % every == 0 || n + 1 == steps)
                snapshot(state.time, state.u, stress_now(), empirical_conf());
        }
    } else {
        shear::MacroShearState state = shear::make_macro_state(cfg);
        auto stress_now = [&]() {
            std::vector<double> out(state.conformation.size());
            for (std::size_t c = 0; c < out.size(); ++c)
                out[c] = cfg.params.epsilon / cfg.params.weissenberg *
                         state.conformation[c](0, 1);
            return out;
        };
        snapshot(0.0, state.u, stress_now(), state.conformation);
        for (long n = 0; n < steps; ++n) {
            shear::macro_shear_step(state, cfg);
            if ((n + 1) % every == 0 || n + 1 == steps)
                snapshot(state.time, state.u, stress_now(), state.conformation);
        }
    }

    writer.write_table("velocity.csv", velocity);
    writer.write_table("stress.csv", stress);
    writer.write_table("free_energy.csv", energy);
    writer.finalize();
}

void run_homogeneous(const HomogeneousRunOptions& opts, const std::filesystem::path& out_dir)
{
    RunConfig config;
    config.subcommand = "homogeneous";
    config.out_dir = out_dir;
    config.add("model", opts.model);
    config.add("re", opts.re);
    config.add("we", opts.we);
    config.add("eps", opts.eps);
    config.add("b", opts.b);
    config.add("dt", opts.dt);
    config.add("t_end", opts.t_end);
    config.add("shear_rate", opts.shear_rate);
    config.add("kappa", opts.kappa);
    config.add("a0", opts.a0);
    RunWriter writer(std::move(config));

    constitutive::MacroModel model;
    if (opts.model == "oldroyd-b")
        model = constitutive::MacroModel::OldroydB;
    else if (opts.model == "fene-p")
        model = constitutive::MacroModel::FeneP;
    else if (opts.model == "corotational")
        model = constitutive::MacroModel::Corotational;
    else
        throw ConfigError("homogeneous: unknown model '" + opts.model + "'");

    Eigen::Matrix2d kappa;
    if (!opts.kappa.empty())
        kappa = parse_matrix2(opts.kappa, "kappa");
    else {
        kappa = Eigen::Matrix2d::Zero();
        kappa(0, 1) = opts.shear_rate;
    }
    Eigen::MatrixXd a0 = Eigen::MatrixXd::Identity(2, 2);
    if (!opts.a0.empty()) {
        std::vector<double> vals;
        std::size_t pos = 0;
        for (int k = 0; k < 3; ++k) {
            const std::size_t comma = opts.a0.find(',', pos);
            vals.push_back(std::stod(opts.a0.substr(pos, comma - pos)));
            pos = comma + 1;
        }
        a0 << vals[0], vals[1], vals[1], vals[2];
    }

    const dumbbell::FlowParams params{opts.re, opts.we, opts.eps, opts.dt};
    const int every = opts.output_every > 0 ? opts.output_every
                                            : default_cadence(opts.t_end, opts.dt, 500);
    const auto traj = constitutive::integrate_homogeneous(
        model, [&](double) { return Eigen::MatrixXd(kappa); },
        constitutive::ConformationTensor(a0), params, opts.b, opts.t_end, every);

    CsvTable table{{"t", "A_xx", "A_xy", "A_yy", "free_energy", "dissipation"}, {}};
    const std::vector<double> unit_measure{1.0};
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const auto& a = traj.tensors[i];
        constitutive::FreeEnergyRecord rec;
        if (model == constitutive::MacroModel::FeneP)
            rec = constitutive::fene_p_free_energy({a}, unit_measure, params, opts.b);
        else
            rec = constitutive::oldroyd_b_free_energy(0.0, {a}, unit_measure, params);
        table.rows.push_back({traj.times[i], a.entries(0, 0), a.entries(0, 1),
                              a.entries(1, 1), rec.total, rec.dissipation});
    }
    writer.write_table("trajectory.csv", table);
    writer.finalize();
}

void run_fokker_planck(const FokkerPlanckRunOptions& opts,
                       const std::filesystem::path& out_dir)
{
    RunConfig config;
    config.subcommand = "fokker-planck";
    config.out_dir = out_dir;
    config.add("model", opts.model);
    config.add("we", opts.we);
    config.add("b", opts.b);
    config.add("kappa", opts.kappa);
    config.add("grid_n", static_cast<long long>(opts.grid_n));
    config.add("half_width", opts.half_width);
    config.add("dt", opts.dt);
    config.add("t_end", opts.t_end);
    config.add("init", opts.init);
    RunWriter writer(std::move(config));

    dumbbell::ForceModel model;
    if (opts.model == "hookean")
        model = dumbbell::ForceModel::hookean();
    else if (opts.model == "fene")
        model = dumbbell::ForceModel::fene(opts.b);
    else
        throw ConfigError("fokker-planck: unknown model '" + opts.model + "'");

    const Eigen::Matrix2d kappa = parse_matrix2(opts.kappa, "kappa");
    double half_width = opts.half_width;
    if (half_width <= 0.0)
        half_width = model.is_fene() ? std::sqrt(model.b) : 6.0;
    const fokker::GridSpec spec{opts.grid_n, half_width};

    const fokker::FokkerPlanckOperator op(model, kappa, opts.we, spec);
    double dt = opts.dt;
    if (dt <= 0.0)
        dt = 0.9 * op.max_stable_dt();

    const auto stationary = fokker::stationary_density(model, kappa, opts.we, spec);

    fokker::DensityGrid psi(spec, model);
    if (opts.init == "equilibrium") {
        psi = stationary.psi;
    } else if (opts.init == "shifted") {
        for (int j = 0; j < spec.n; ++j)
            for (int i = 0; i < spec.n; ++i) {
                if (!psi.active(i, j))
                    continue;
                const auto p = psi.center(i, j);
                const double sx = p.x() - 0.5;
                psi.value(i, j) = std::exp(-0.5 * (sx * sx + p.y() * p.y()));
            }
        psi.normalize();
    } else if (opts.init == "uniform") {
        for (int j = 0; j < spec.n; ++j)
            for (int i = 0; i < spec.n; ++i)
                if (psi.active(i, j))
                    psi.value(i, j) = 1.0;
        psi.normalize();
    } else {
        throw ConfigError("fokker-planck: unknown init '" + opts.init + "'");
    }

    CsvTable initial{{"x", "y", "value"}, {}};
    for (int j = 0; j < spec.n; ++j)
        for (int i = 0; i < spec.n; ++i)
            if (psi.active(i, j))
                initial.rows.push_back({spec.center(i), spec.center(j), psi.value(i, j)});

    const long steps = std::lround(opts.t_end / dt);
    const int every = opts.output_every > 0
                          ? opts.output_every
                          : std::max(1L, steps / 200);
    CsvTable entropy{{"t", "H", "fisher", "l1"}, {}};
    auto record = [&](double t) {
        const auto rep = fokker::entropy_report(psi, stationary.psi);
        entropy.rows.push_back({t, rep.relative_entropy, rep.fisher_information,
                                rep.l1_distance});
    };
    record(0.0);
    for (long n = 0; n < steps; ++n) {
        op.step(psi, dt);
        if ((n + 1) % every == 0 || n + 1 == steps)
            record((n + 1) * dt);
    }

    CsvTable final_density{{"x", "y", "value"}, {}};
    for (int j = 0; j < spec.n; ++j)
        for (int i = 0; i < spec.n; ++i)
            if (psi.active(i, j))
                final_density.rows.push_back({spec.center(i), spec.center(j), psi.value(i, j)});

    writer.write_table("density_initial.csv", initial);
    writer.write_table("density_final.csv", final_density);
    writer.write_table("entropy.csv", entropy);
    writer.finalize();
}

void run_pgd(const PgdRunOptions& opts, const std::filesystem::path& out_dir)
{
    RunConfig config;
    config.subcommand = "pgd";
    config.out_dir = out_dir;
    config.add("nx", static_cast<long long>(opts.nx));
    config.add("ny", static_cast<long long>(opts.ny));
    config.add("rhs", opts.rhs);
    config.add("rhs_file", opts.rhs_file);
    config.add("tol", opts.tol);
    config.add("max_terms", static_cast<long long>(opts.max_terms));
    RunWriter writer(std::move(config));

    const pgd::ProductGrid grid{opts.nx, opts.ny};
    grid.validate();
    Eigen::MatrixXd f(opts.nx, opts.ny);
    if (opts.rhs == "separable") {
        for (int i = 0; i < opts.nx; ++i)
            for (int j = 0; j < opts.ny; ++j)
                f(i, j) = 2.0 * M_PI * M_PI * std::sin(M_PI * grid.x(i)) *
                          std::sin(M_PI * grid.y(j));
    } else if (opts.rhs == "constant") {
        f.setOnes();
    } else if (opts.rhs == "file") {
        std::ifstream is(opts.rhs_file);
        if (!is)
            throw ConfigError("pgd: cannot open rhs file '" + opts.rhs_file + "'");
        for (int i = 0; i < opts.nx; ++i)
            for (int j = 0; j < opts.ny; ++j)
                if (!(is >> f(i, j)))
                    throw ConfigError("pgd: rhs file ended before nx*ny values were read");
    } else {
        throw ConfigError("pgd: unknown rhs '" + opts.rhs + "' (separable|constant|file)");
    }

    const auto solution = pgd::pgd_solve(f, grid, opts.tol, opts.max_terms);

    CsvTable terms{{"term", "direction", "index", "coordinate", "value"}, {}};
    for (std::size_t k = 0; k < solution.terms.size(); ++k) {
        const auto& term = solution.terms[k];
        for (int i = 0; i < term.r.size(); ++i)
            terms.rows.push_back({static_cast<long long>(k + 1), std::string("r"),
                                  static_cast<long long>(i), grid.x(i), term.r(i)});
        for (int j = 0; j < term.s.size(); ++j)
            terms.rows.push_back({static_cast<long long>(k + 1), std::string("s"),
                                  static_cast<long long>(j), grid.y(j), term.s(j)});
    }
    CsvTable history{{"term", "h_minus1_residual"}, {}};
    for (std::size_t k = 0; k < solution.residual_history.size(); ++k)
        history.rows.push_back({static_cast<long long>(k + 1), solution.residual_history[k]});

    writer.write_table("terms.csv", terms);
    writer.write_table("residual_history.csv", history);
    writer.finalize();
}

void run_rb_offline(const RbOfflineRunOptions& opts, const std::filesystem::path& out_dir)
{
    RunConfig config;
    config.subcommand = "rb-offline";
    config.out_dir = out_dir;
    config.add("we", opts.we);
    config.add("eps", opts.eps);
    config.add("re", opts.re);
    config.add("b", opts.b);
    config.add("dt", opts.dt);
    config.add("t_end", opts.t_end);
    config.add("trial_count", static_cast<long long>(opts.trial_count));
    config.add("gamma_min", opts.gamma_min);
    config.add("gamma_max", opts.gamma_max);
    config.add("n_basis", static_cast<long long>(opts.n_basis));
    config.add("m_large", static_cast<long long>(opts.m_large));
    config.add("seed", opts.seed);
    RunWriter writer(std::move(config));

    std::vector<Eigen::Matrix2d> trial;
    for (int i = 0; i < opts.trial_count; ++i) {
        const double gamma =
            opts.trial_count == 1
                ? opts.gamma_min
                : opts.gamma_min +
                      (opts.gamma_max - opts.gamma_min) * i / (opts.trial_count - 1);
        Eigen::Matrix2d k = Eigen::Matrix2d::Zero();
        k(0, 1) = gamma;
        trial.push_back(k);
    }
    const dumbbell::FlowParams params{opts.re, opts.we, opts.eps, opts.dt};
    const auto model = dumbbell::ForceModel::fene(opts.b);
    const auto basis = varred::rb_offline(trial, opts.n_basis, opts.m_large, model, params,
                                          opts.t_end, opts.seed);

    json doc;
    doc["artifact"] = kArtifactName;
    doc["version"] = kArtifactVersion;
    doc["model"] = "fene";
    doc["b"] = opts.b;
    doc["re"] = opts.re;
    doc["we"] = opts.we;
    doc["eps"] = opts.eps;
    doc["dt"] = opts.dt;
    doc["t_end"] = opts.t_end;
    doc["seed"] = opts.seed;
    doc["m_large"] = opts.m_large;
    doc["error_estimator"] = basis.error_estimator;
    json params_json = json::array();
    for (std::size_t n = 0; n < basis.parameters.size(); ++n) {
        json entry;
        entry["kappa"] = {basis.parameters[n](0, 0), basis.parameters[n](0, 1),
                          basis.parameters[n](1, 0), basis.parameters[n](1, 1)};
        entry["trial_index"] = basis.trial_indices[n];
        entry["reference_mean"] = {basis.reference_means[n](0), basis.reference_means[n](1),
                                   basis.reference_means[n](2)};
        entry["selection_variance"] = basis.selection_variances[n];
        params_json.push_back(entry);
    }
    doc["basis"] = params_json;
    writer.write_text("basis.json", doc.dump(2) + "\n");
    writer.finalize();
}

namespace {

varred::RbBasis load_basis(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError("rb-online: cannot open basis '" + path + "'");
    json doc;
    try {
        is >> doc;
    } catch (const std::exception& e) {
        throw ConfigError("rb-online: invalid basis JSON: " + std::string(e.what()));
    }
    varred::RbBasis basis;
    basis.model = dumbbell::ForceModel::fene(doc.at("b").get<double>());
    basis.params = {doc.at("re").get<double>(), doc.at("we").get<double>(),
                    doc.at("eps").get<double>(), doc.at("dt").get<double>()};
    basis.t_end = doc.at("t_end").get<double>();
    basis.seed = doc.at("seed").get<std::uint64_t>();
    basis.m_large = doc.at("m_large").get<int>();
    basis.error_estimator = doc.value("error_estimator", "");
    for (const auto& entry : doc.at("basis")) {
        Eigen::Matrix2d k;
        const auto& kv = entry.at("kappa");
        k << kv.at(0).get<double>(), kv.at(1).get<double>(), kv.at(2).get<double>(),
            kv.at(3).get<double>();
        basis.parameters.push_back(k);
        basis.trial_indices.push_back(entry.at("trial_index").get<int>());
        const auto& mv = entry.at("reference_mean");
        basis.reference_means.emplace_back(mv.at(0).get<double>(), mv.at(1).get<double>(),
                                           mv.at(2).get<double>());
        basis.selection_variances.push_back(entry.at("selection_variance").get<double>());
    }
    return basis;
}

} // namespace

void run_rb_online(const RbOnlineRunOptions& opts, const std::filesystem::path& out_dir)
{
    RunConfig config;
    config.subcommand = "rb-online";
    config.out_dir = out_dir;
    config.add("basis", opts.basis_path);
    config.add("gamma", opts.gamma);
    config.add("kappa", opts.kappa);
    config.add("m_small", static_cast<long long>(opts.m_small));
    RunWriter writer(std::move(config));

    const varred::RbBasis basis = load_basis(opts.basis_path);
    Eigen::Matrix2d kappa;
    if (!opts.kappa.empty())
        kappa = parse_matrix2(opts.kappa, "kappa");
    else {
        kappa = Eigen::Matrix2d::Zero();
        kappa(0, 1) = opts.gamma;
    }
    const auto result = varred::rb_online(kappa, basis, opts.m_small);

    const double scale = basis.params.epsilon / basis.params.weissenberg;
    CsvTable table{{"k00", "k01", "k10", "k11", "moment_xx", "moment_xy", "moment_yy",
                    "tau_xx", "tau_xy", "tau_yy", "variance_uncorrected",
                    "variance_corrected", "reduction_factor", "regularized"},
                   {}};
    table.rows.push_back({kappa(0, 0), kappa(0, 1), kappa(1, 0), kappa(1, 1),
                          result.estimate(0), result.estimate(1), result.estimate(2),
                          scale * (result.estimate(0) - 1.0), scale * result.estimate(1),
                          scale * (result.estimate(2) - 1.0), result.uncorrected_variance,
                          result.corrected_variance, result.reduction_factor,
                          static_cast<long long>(result.regularized ? 1 : 0)});
    writer.write_table("estimate.csv", table);
    writer.finalize();
}

void run_variance_study(const VarianceStudyRunOptions& opts,
                        const std::filesystem::path& out_dir)
{
    RunConfig config;
    config.subcommand = "variance-study";
    config.out_dir = out_dir;
    config.add("re", opts.re);
    config.add("we", opts.we);
    config.add("eps", opts.eps);
    config.add("dy", opts.dy);
    config.add("dt", opts.dt);
    config.add("t_end", opts.t_end);
    config.add("k", static_cast<long long>(opts.k));
    config.add("repeats", static_cast<long long>(opts.repeats));
    config.add("u_upper", opts.u_upper);
    config.add("seed", opts.seed);
    RunWriter writer(std::move(config));

    varred::StrategyStudyConfig study;
    study.scheme.cells = cells_from_dy(opts.dy);
    study.scheme.replicas = opts.k;
    study.scheme.params = {opts.re, opts.we, opts.eps, opts.dt};
    study.scheme.force = dumbbell::ForceModel::hookean();
    study.scheme.seed = opts.seed;
    study.scheme.bc_upper = [v = opts.u_upper](double) { return v; };
    study.t_end = opts.t_end;
    study.repeats = opts.repeats;

    const auto results = varred::variance_comparison_study(
        study, {varred::BrownianVariant::ConstantInSpace,
                varred::BrownianVariant::IndependentPerCell,
                varred::BrownianVariant::AlternatingSign});

    CsvTable table{{"strategy", "u_mid_mean", "u_mid_variance", "tau_mean",
                    "tau_variance_cell_avg", "repeats"},
                   {}};
    for (const auto& res : results)
        table.rows.push_back({varred::brownian_variant_name(res.variant),
                              res.report.mean[0], res.report.variance[0],
                              res.report.mean[1], res.tau_variance_cell_avg,
                              static_cast<long long>(res.report.samples)});
    writer.write_table("variance.csv", table);
    writer.finalize();
}

void run_convergence_study(const ConvergenceStudyRunOptions& opts,
                           const std::filesystem::path& out_dir)
{
    RunConfig config;
    config.subcommand = "convergence-study";
    config.out_dir = out_dir;
    config.add("re", opts.re);
    config.add("we", opts.we);
    config.add("eps", opts.eps);
    config.add("t_end", opts.t_end);
    config.add("seed", opts.seed);
    RunWriter writer(std::move(config));

    shear::ConvergenceStudyConfig study;
    study.params = {opts.re, opts.we, opts.eps, 1e-3};
    study.t_end = opts.t_end;
    study.seed = opts.seed;
    const auto result = shear::convergence_study(study);

    CsvTable errors{{"parameter", "value", "error_u", "error_tau", "error_total"}, {}};
    for (const auto& row : result.rows)
        errors.rows.push_back(
            {row.parameter, row.value, row.error_u, row.error_tau, row.error_total});
    CsvTable orders{{"parameter", "fitted_order"}, {}};
    orders.rows.push_back({std::string("dt"), result.order_dt});
    orders.rows.push_back({std::string("dy"), result.order_dy});
    orders.rows.push_back({std::string("k"), result.slope_k});

    writer.write_table("errors.csv", errors);
    writer.write_table("orders.csv", orders);
    writer.finalize();
}

} // namespace micromacro::io
