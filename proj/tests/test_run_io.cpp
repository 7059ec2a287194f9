#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "micromacro/run_io.hpp"

using namespace micromacro;
using namespace micromacro::io;

namespace {

std::filesystem::path fresh_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("micromacro_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int run_cli(const std::string& args)
{
    const std::string cmd =
        std::string(MICROMACRO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("CSV fields: quoting and float round-trips")
{
    CHECK(csv_field(CsvValue{std::string("plain")}) == "plain");
    CHECK(csv_field(CsvValue{std::string("a,b")}) == "\"a,b\"");
    CHECK(csv_field(CsvValue{std::string("say \"hi\"")}) == "\"say \"\"hi\"\"\"");
    CHECK(csv_field(CsvValue{0.03125}) == "0.03125");
    CHECK(csv_field(CsvValue{1.0 / 3.0}) == "0.33333333333333331");
    CHECK(csv_field(CsvValue{static_cast<long long>(-7)}) == "-7");
    // 17 significant digits recover the exact double
    const double awkward = 0.1 + 0.2;
    CHECK(std::stod(csv_field(CsvValue{awkward})) == awkward);
}

TEST_CASE("empty record sets produce a header-only file")
{
    const auto dir = fresh_dir("empty_csv");
    write_csv(dir / "empty.csv", {{"a", "b", "c"}, {}});
    CHECK(slurp(dir / "empty.csv") == "a,b,c\n");
}

TEST_CASE("manifest echoes config, checksums outputs and is written last")
{
    const auto dir = fresh_dir("homog");
    HomogeneousRunOptions opts;
    opts.t_end = 0.5;
    run_homogeneous(opts, dir);

    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest.at("artifact") == kArtifactName);
    CHECK(manifest.at("subcommand") == "homogeneous");
    CHECK(manifest.at("config").at("we") == "1");
    CHECK(manifest.at("config").at("eps") == "0.5");
    CHECK(manifest.at("duration_seconds").get<double>() >= 0.0);
    const auto sums = manifest.at("outputs");
    REQUIRE(sums.contains("trajectory.csv"));
    CHECK(sums.at("trajectory.csv").get<std::string>() ==
          crc32_file_hex(dir / "trajectory.csv"));
}

TEST_CASE("determinism: identical seeds give identical bytes, deterministic outputs ignore the seed")
{
    ShearRunOptions opts;
    opts.dy = 1.0 / 8;
    opts.k = 100;
    opts.dt = 5e-3;
    opts.t_end = 0.1;
    opts.seed = 42;

    const auto a = fresh_dir("shear_a");
    const auto b = fresh_dir("shear_b");
    const auto c = fresh_dir("shear_c");
    run_shear(opts, a, 1);
    run_shear(opts, b, 2); // different thread count, same seed
    opts.seed = 43;
    run_shear(opts, c, 1);

    for (const char* name : {"velocity.csv", "stress.csv", "free_energy.csv"}) {
        CHECK(slurp(a / name) == slurp(b / name));
        CHECK(slurp(a / name) != slurp(c / name)); // stochastic outputs move with the seed
    }

    // a deterministic run is byte-identical under any seed
    HomogeneousRunOptions homog;
    homog.t_end = 0.5;
    const auto d = fresh_dir("homog_a");
    const auto e = fresh_dir("homog_b");
    run_homogeneous(homog, d);
    run_homogeneous(homog, e);
    CHECK(slurp(d / "trajectory.csv") == slurp(e / "trajectory.csv"));
}

TEST_CASE("range and format validation")
{
    CHECK_THROWS_WITH_AS(
        run_shear([] {
            ShearRunOptions o;
            o.eps = 1.2;
            return o;
        }(), fresh_dir("bad_eps"), 1),
        doctest::Contains("epsilon"), ConfigError);

    CHECK_THROWS_AS(run_shear([] {
                        ShearRunOptions o;
                        o.dy = 0.3; // does not divide the channel
                        return o;
                    }(), fresh_dir("bad_dy"), 1),
                    ConfigError);

    CHECK_THROWS_AS(run_homogeneous([] {
                        HomogeneousRunOptions o;
                        o.model = "maxwell";
                        return o;
                    }(), fresh_dir("bad_model")),
                    ConfigError);
}

TEST_CASE("command line: exit codes and config files")
{
    SUBCASE("help and a successful tiny run exit 0")
    {
        CHECK(run_cli("--help") == 0);
        const auto dir = fresh_dir("cli_ok");
        CHECK(run_cli("--out " + dir.string() +
                      " homogeneous --t-end 0.2 --dt 0.01") == 0);
        CHECK(std::filesystem::exists(dir / "manifest.json"));
    }
    SUBCASE("configuration errors exit 2")
    {
        CHECK(run_cli("shear --eps 1.2") == 2);          // out of (0,1)
        CHECK(run_cli("shear --no-such-flag 1") == 2);   // unknown flag
        CHECK(run_cli("") == 2);                         // missing subcommand
        CHECK(run_cli("rb-online --m-small 10") == 2);   // missing required basis
    }
    SUBCASE("numerical failures exit 3")
    {
        const auto dir = fresh_dir("cli_numfail");
        // Hookean extension beyond the stationary threshold: no steady state
        CHECK(run_cli("--out " + dir.string() +
                      " fokker-planck --kappa 0.6,0,0,-0.6 --grid-n 24 --t-end 0.01") == 3);
    }
    SUBCASE("flags override config-file values; unknown keys are rejected")
    {
        const auto dir = fresh_dir("cli_config");
        const auto cfg = dir / "run.ini";
        {
            std::ofstream os(cfg);
            os << "[homogeneous]\n";
            os << "t-end=0.2\n";
            os << "dt=0.02\n";
            os << "shear-rate=0.5\n";
        }
        CHECK(run_cli("--config " + cfg.string() + " --out " + (dir / "o1").string() +
                      " homogeneous") == 0);
        const auto m1 = nlohmann::json::parse(slurp(dir / "o1" / "manifest.json"));
        CHECK(m1.at("config").at("shear_rate") == "0.5");
        CHECK(m1.at("config").at("dt") == "0.02");

        CHECK(run_cli("--config " + cfg.string() + " --out " + (dir / "o2").string() +
                      " homogeneous --shear-rate 1.5") == 0);
        const auto m2 = nlohmann::json::parse(slurp(dir / "o2" / "manifest.json"));
        CHECK(m2.at("config").at("shear_rate") == "1.5"); // flag wins

        {
            std::ofstream os(cfg, std::ios::app);
            os << "not-a-key=1\n";
        }
        CHECK(run_cli("--config " + cfg.string() + " --out " + (dir / "o3").string() +
                      " homogeneous") == 2);
    }
    SUBCASE("config echo round-trips byte-identically")
    {
        const auto dir = fresh_dir("cli_echo");
        CHECK(run_cli("--out " + (dir / "r1").string() +
                      " shear --we 1 --eps 0.5 --dy 0.03125 --k 50 --t-end 0.02") == 0);
        const auto m1 = nlohmann::json::parse(slurp(dir / "r1" / "manifest.json"));
        CHECK(m1.at("config").at("we") == "1");
        CHECK(m1.at("config").at("eps") == "0.5");
        CHECK(m1.at("config").at("dy") == "0.03125");
        // rerun from the echoed values: identical output bytes
        CHECK(run_cli("--out " + (dir / "r2").string() + " shear --we " +
                      m1.at("config").at("we").get<std::string>() + " --eps " +
                      m1.at("config").at("eps").get<std::string>() + " --dy " +
                      m1.at("config").at("dy").get<std::string>() +
                      " --k 50 --t-end 0.02") == 0);
        CHECK(slurp(dir / "r1" / "velocity.csv") == slurp(dir / "r2" / "velocity.csv"));
    }
}
