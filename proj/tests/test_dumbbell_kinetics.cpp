#include <doctest.h>

#include <cmath>
#include <sstream>

#include "micromacro/dumbbell_kinetics.hpp"
#include "micromacro/rng.hpp"

using namespace micromacro;
using namespace micromacro::dumbbell;

namespace {

Eigen::Vector2d v2(double x, double y) { return {x, y}; }

// central finite difference of the potential, the independent gradient oracle
Eigen::VectorXd fd_gradient(const ForceModel& model, const Eigen::VectorXd& x, double h)
{
    Eigen::VectorXd g(x.size());
    for (int k = 0; k < x.size(); ++k) {
        Eigen::VectorXd lo = x, hi = x;
        lo[k] -= h;
        hi[k] += h;
        g[k] = (spring_potential(model, hi) - spring_potential(model, lo)) / (2.0 * h);
    }
    return g;
}

Eigen::Matrix2d covariance(const DumbbellEnsemble& ens)
{
    const auto m = second_moment(ens);
    return m[0];
}

} // namespace

TEST_CASE("spring force closed forms")
{
    const auto hook = ForceModel::hookean();
    CHECK(spring_force(hook, v2(0, 0)).norm() == 0.0);
    CHECK(spring_potential(hook, v2(0, 0)) == 0.0);

    const auto fene4 = ForceModel::fene(4.0);
    const auto f = spring_force(fene4, v2(1, 0));
    CHECK(f(0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(f(1) == 0.0);
    CHECK(spring_potential(fene4, v2(1, 0)) ==
          doctest::Approx(-2.0 * std::log(0.75)).epsilon(1e-15));

    CHECK_THROWS_AS(spring_force(fene4, v2(2, 0)), NumericalError);
    CHECK_THROWS_AS(spring_potential(fene4, v2(2, 0)), NumericalError);
    CHECK_THROWS_AS(ForceModel::fene(-1.0), ConfigError);
}

TEST_CASE("force is the gradient of the potential")
{
    const auto fene9 = ForceModel::fene(9.0);
    // the stated spot check
    const Eigen::VectorXd x0 = v2(0.5, 0.3);
    CHECK((spring_force(fene9, x0) - fd_gradient(fene9, x0, 1e-5)).cwiseAbs().maxCoeff() <
          1e-6);

    // 100 random interior points, both models, relative 1e-5
    const rng::StreamKey key{321, rng::kDomainAux, 0, 0};
    for (int i = 0; i < 100; ++i) {
        const auto [u1, u2] = rng::uniform_pair(key, static_cast<std::uint32_t>(i), 0);
        const double r = 0.85 * std::sqrt(9.0) * std::sqrt(u1);
        const Eigen::VectorXd x = v2(r * std::cos(2 * M_PI * u2), r * std::sin(2 * M_PI * u2));
        for (const auto& model : {ForceModel::hookean(), fene9}) {
            const Eigen::VectorXd f = spring_force(model, x);
            const Eigen::VectorXd g = fd_gradient(model, x, 1e-5);
            CHECK((f - g).norm() <= 1e-5 * std::max(1.0, f.norm()));
        }
    }
}

TEST_CASE("drift-only step recovers the relaxation rate")
{
    FlowParams params{1.0, 2.0, 0.5, 1e-6};
    DumbbellEnsemble ens(2, 1, 1, 0);
    ens.component(0, 0, 0) = 1.0;
    ens.component(0, 0, 1) = 0.0;
    const ZeroIncrements zero;
    evolve_ensemble(ens, ForceModel::hookean(), Eigen::MatrixXd::Zero(2, 2), params, zero, 0);
    const double rate = (ens.component(0, 0, 0) - 1.0) / params.dt;
    CHECK(rate == doctest::Approx(-1.0 / (2.0 * params.weissenberg)).epsilon(1e-9));
}

TEST_CASE("Hookean equilibrium ensemble stays at unit covariance")
{
    const int k = 100000;
    FlowParams params{1.0, 1.0, 0.5, 5e-3};
    auto ens = DumbbellEnsemble::equilibrium(2, 1, k, ForceModel::hookean(), 77);
    const IndependentIncrements inc(77);
    const int steps = 200; // one relaxation time
    for (int n = 0; n < steps; ++n)
        evolve_ensemble(ens, ForceModel::hookean(), Eigen::MatrixXd::Zero(2, 2), params, inc,
                        static_cast<std::uint32_t>(n));
    const Eigen::Matrix2d cov = covariance(ens);
    const double se_diag = std::sqrt(2.0 / k);
    const double se_off = std::sqrt(1.0 / k);
    CHECK(std::abs(cov(0, 0) - 1.0) < 3.0 * se_diag);
    CHECK(std::abs(cov(1, 1) - 1.0) < 3.0 * se_diag);
    CHECK(std::abs(cov(0, 1)) < 3.0 * se_off);
}

TEST_CASE("relaxation from a point mass reaches unit covariance within 4/sqrt(K)")
{
    const int k = 10000;
    FlowParams params{1.0, 1.0, 0.5, 5e-3};
    DumbbellEnsemble ens(2, 1, k, 0);
    for (int r = 0; r < k; ++r) {
        ens.component(0, r, 0) = 1.5;
        ens.component(0, r, 1) = 0.8;
    }
    const IndependentIncrements inc(11);
    const int steps = 4000; // 20 relaxation times
    for (int n = 0; n < steps; ++n)
        evolve_ensemble(ens, ForceModel::hookean(), Eigen::MatrixXd::Zero(2, 2), params, inc,
                        static_cast<std::uint32_t>(n));
    const Eigen::Matrix2d cov = covariance(ens);
    CHECK((cov - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 4.0 / std::sqrt(k));
}

TEST_CASE("FENE ensembles stay inside the ball")
{
    const int k = 2000;
    FlowParams params{1.0, 1.0, 0.5, 5e-3};
    const auto fene = ForceModel::fene(9.0);
    auto ens = DumbbellEnsemble::equilibrium(2, 1, k, fene, 5);
    CHECK(ens.max_norm() < 3.0);
    const IndependentIncrements inc(5);
    for (int n = 0; n < 500; ++n) {
        evolve_ensemble(ens, fene, Eigen::MatrixXd::Zero(2, 2), params, inc,
                        static_cast<std::uint32_t>(n));
        REQUIRE(ens.max_norm() < 3.0);
    }
}

TEST_CASE("FENE timestep guard and retry exhaustion")
{
    const auto fene = ForceModel::fene(1.0);
    DumbbellEnsemble ens(2, 1, 1, 0);
    ens.component(0, 0, 0) = 0.9;
    const IndependentIncrements inc(3);

    FlowParams too_coarse{1.0, 1.0, 0.5, 0.2};
    CHECK_THROWS_AS(evolve_ensemble(ens, fene, Eigen::MatrixXd::Zero(2, 2), too_coarse, inc, 0),
                    ConfigError);

    // expansive gradient overwhelms the spring: every proposal leaves the ball
    FlowParams params{1.0, 1.0, 0.5, 0.05};
    Eigen::MatrixXd kappa = 500.0 * Eigen::MatrixXd::Identity(2, 2);
    try {
        evolve_ensemble(ens, fene, kappa, params, inc, 0);
        FAIL("expected a step failure");
    } catch (const NumericalError& e) {
        const std::string what = e.what();
        CHECK(what.find("cell 0") != std::string::npos);
        CHECK(what.find("replica 0") != std::string::npos);
    }
}

TEST_CASE("Kramers stress closed-form cases")
{
    FlowParams params{1.0, 1.0, 0.5, 1e-3};
    SUBCASE("ensemble with exactly unit second moment gives zero stress")
    {
        DumbbellEnsemble ens(2, 1, 4, 0);
        const double pts[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
        for (int r = 0; r < 4; ++r) {
            ens.component(0, r, 0) = pts[r][0];
            ens.component(0, r, 1) = pts[r][1];
        }
        const auto tau = kramers_stress(ens, ForceModel::hookean(), params);
        CHECK(tau[0].cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("two mirrored replicas")
    {
        DumbbellEnsemble ens(2, 1, 2, 0);
        ens.component(0, 0, 0) = 1.0;
        ens.component(0, 1, 0) = -1.0;
        const auto tau = kramers_stress(ens, ForceModel::hookean(), params);
        CHECK(tau[0](0, 0) == doctest::Approx(0.0));
        CHECK(tau[0](1, 1) == doctest::Approx(-0.5));
        CHECK(tau[0](0, 1) == 0.0);
    }
}

TEST_CASE("stationary stress under symmetric extension matches the Gaussian law")
{
    // kappa = diag(s,-s) with 2 We s = 0.5: stationary variances (2, 2/3)
    const int k = 100000;
    const double s = 0.25;
    FlowParams params{1.0, 1.0, 0.5, 2e-3};
    DumbbellEnsemble ens(2, 1, k, 0);
    const rng::StreamKey key{1234, rng::kDomainAux, 0, 0};
    const double sx = std::sqrt(1.0 / (1.0 - 2.0 * s));
    const double sy = std::sqrt(1.0 / (1.0 + 2.0 * s));
    for (int r = 0; r < k; ++r) {
        const auto [a, b] = rng::normal_pair(key, static_cast<std::uint32_t>(r), 0);
        ens.component(0, r, 0) = sx * a;
        ens.component(0, r, 1) = sy * b;
    }
    Eigen::MatrixXd kappa(2, 2);
    kappa << s, 0, 0, -s;
    const IndependentIncrements inc(1234);
    for (int n = 0; n < 500; ++n)
        evolve_ensemble(ens, ForceModel::hookean(), kappa, params, inc,
                        static_cast<std::uint32_t>(n));
    const auto tau = kramers_stress(ens, ForceModel::hookean(), params);
    const double expected = 0.5 * (1.0 / (1.0 - 2.0 * s) - 1.0);
    // standard error of the tau_xx estimator: Var(x^2) = 2 sx^4
    const double se = 0.5 * std::sqrt(2.0 * sx * sx * sx * sx / k);
    CHECK(std::abs(tau[0](0, 0) - expected) < 4.0 * se);
    CHECK(std::abs(tau[0](1, 1) - 0.5 * (sy * sy - 1.0)) < 4.0 * se);
}

TEST_CASE("Kramers stress is symmetric and permutation invariant")
{
    FlowParams params{1.0, 1.0, 0.5, 1e-3};
    // exactly representable configurations: sums are exact, so a permutation
    // cannot change the result at all
    DumbbellEnsemble a(2, 1, 8, 0), b(2, 1, 8, 0);
    const double vals[8][2] = {{1, 0.5},  {-0.5, 0.25}, {0.75, -1}, {2, 0.125},
                               {-1.5, 1}, {0.25, 0.25}, {-2, -0.5}, {0.5, -0.25}};
    for (int r = 0; r < 8; ++r) {
        a.component(0, r, 0) = vals[r][0];
        a.component(0, r, 1) = vals[r][1];
        b.component(0, r, 0) = vals[7 - r][0];
        b.component(0, r, 1) = vals[7 - r][1];
    }
    const auto ta = kramers_stress(a, ForceModel::hookean(), params);
    const auto tb = kramers_stress(b, ForceModel::hookean(), params);
    CHECK((ta[0] - tb[0]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(ta[0](0, 1) == ta[0](1, 0));
}

TEST_CASE("Monte Carlo stress error scales as K^{-1/2}")
{
    FlowParams params{1.0, 1.0, 0.5, 5e-3};
    const int reps = 400;
    std::vector<double> ks = {100, 1000, 10000};
    std::vector<double> stds;
    for (double kd : ks) {
        const int k = static_cast<int>(kd);
        double sum = 0.0, sumsq = 0.0;
        for (int rep = 0; rep < reps; ++rep) {
            auto ens = DumbbellEnsemble::equilibrium(2, 1, k, ForceModel::hookean(),
                                                     9000 + rep);
            const IndependentIncrements inc(9000 + rep);
            evolve_ensemble(ens, ForceModel::hookean(), Eigen::MatrixXd::Zero(2, 2), params,
                            inc, 0);
            const double txy = kramers_stress(ens, ForceModel::hookean(), params)[0](0, 1);
            sum += txy;
            sumsq += txy * txy;
        }
        stds.push_back(std::sqrt(sumsq / reps - (sum / reps) * (sum / reps)));
    }
    const double slope = fit_loglog(ks, stds).slope;
    CHECK(slope == doctest::Approx(-0.5).epsilon(0.2)); // -0.5 +- 0.1
}

TEST_CASE("three-dimensional ensembles work end to end")
{
    const int k = 20000;
    FlowParams params{1.0, 1.0, 0.5, 5e-3};
    auto ens = DumbbellEnsemble::equilibrium(3, 1, k, ForceModel::hookean(), 21);
    const IndependentIncrements inc(21);
    for (int n = 0; n < 100; ++n)
        evolve_ensemble(ens, ForceModel::hookean(), Eigen::MatrixXd::Zero(3, 3), params, inc,
                        static_cast<std::uint32_t>(n));
    const auto cov = second_moment(ens)[0];
    CHECK((cov - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 4.0 / std::sqrt(k));

    auto fene = DumbbellEnsemble::equilibrium(3, 1, 500, ForceModel::fene(9.0), 22);
    CHECK(fene.max_norm() < 3.0);
}

TEST_CASE("ensemble snapshots serialize to CSV")
{
    DumbbellEnsemble ens(2, 2, 2, 0);
    ens.component(1, 1, 0) = 0.5;
    std::ostringstream os;
    ens.write_csv(os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "cell,replica,x,y");
    int rows = 0;
    while (std::getline(is, line))
        ++rows;
    CHECK(rows == 4);
    CHECK(os.str().find("1,1,0.5,0") != std::string::npos);
}
