#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "micromacro/csv_io.hpp"

namespace micromacro::io {

inline constexpr const char* kArtifactName = "micromacro";
inline constexpr const char* kArtifactVersion = "0.1.0";

/// Flat key-value run description; keys are canonical strings so the manifest
/// echo reproduces the run byte-identically.
struct RunConfig {
    std::string subcommand;
    std::filesystem::path out_dir;
    std::vector<std::pair<std::string, std::string>> entries;

    void add(const std::string& key, const std::string& value);
    void add(const std::string& key, double value);
    void add(const std::string& key, long long value);
    void add(const std::string& key, std::uint64_t value);
};

/// Collects output files for one run and writes manifest.json last
/// (atomically); the manifest carries the config echo, the artifact version,
/// the wall-clock duration and a CRC-32 per output.
class RunWriter {
public:
    explicit RunWriter(RunConfig config);
    const std::filesystem::path& dir() const { return config_.out_dir; }
    void write_table(const std::string& filename, const CsvTable& table);
    void write_text(const std::string& filename, const std::string& content);
    void finalize();

private:
    RunConfig config_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::string> outputs_;
    bool finalized_ = false;
};

// ---- subcommand option blocks -------------------------------------------

struct ShearRunOptions {
    std::string model = "hookean"; ///< hookean|fene|oldroyd-b|fene-p
    double re = 0.1, we = 1.0, eps = 0.5, b = 0.0;
    double dy = 1.0 / 32, dt = 1e-3, t_end = 5.0;
    int k = 1000;
    std::uint64_t seed = 12345;
    std::string brownian = "iid";
    double u_lower = 0.0, u_upper = 1.0;
    int output_every = 0; ///< 0: pick ~50 snapshots automatically
};

struct HomogeneousRunOptions {
    std::string model = "oldroyd-b"; ///< oldroyd-b|fene-p|corotational
    double re = 1.0, we = 1.0, eps = 0.5, b = 0.0;
    double dt = 1e-3, t_end = 10.0;
    double shear_rate = 1.0;
    std::string kappa; ///< optional "k00,k01,k10,k11", overrides shear_rate
    std::string a0;    ///< optional "xx,xy,yy" initial tensor
    int output_every = 0;
};

struct FokkerPlanckRunOptions {
    std::string model = "hookean"; ///< hookean|fene
    double we = 1.0, b = 0.0;
    std::string kappa; ///< "k00,k01,k10,k11"; default zero
    int grid_n = 128;
    double half_width = 0.0; ///< 0: 6 sigma (Hookean) or sqrt(b) (FENE)
    double dt = 0.0;         ///< 0: 90% of the stability bound
    double t_end = 3.0;
    std::string init = "shifted"; ///< equilibrium|shifted|uniform
    int output_every = 0;
};

struct PgdRunOptions {
    int nx = 64, ny = 64;
    std::string rhs = "separable"; ///< separable|constant|file
    std::string rhs_file;
    double tol = 1e-8;
    int max_terms = 30;
};

struct RbOfflineRunOptions {
    double we = 1.0, eps = 0.5, re = 1.0, b = 9.0;
    double dt = 1e-3, t_end = 1.5;
    int trial_count = 100;
    double gamma_min = 0.02, gamma_max = 1.0;
    int n_basis = 20;
    int m_large = 10000;
    std::uint64_t seed = 12345;
};

struct RbOnlineRunOptions {
    std::string basis_path;
    double gamma = 1.0;
    std::string kappa; ///< optional full matrix
    int m_small = 100;
};

struct VarianceStudyRunOptions {
    double re = 0.1, we = 1.0, eps = 0.9;
    double dy = 1.0 / 16, dt = 5e-3, t_end = 0.5;
    int k = 200;
    int repeats = 200;
    double u_upper = 1.0;
    std::uint64_t seed = 12345;
};

struct ConvergenceStudyRunOptions {
    double re = 1.0, we = 1.0, eps = 0.5;
    double t_end = 1.0;
    std::uint64_t seed = 2024;
};

void run_shear(const ShearRunOptions& opts, const std::filesystem::path& out_dir,
               int threads = 1);
void run_homogeneous(const HomogeneousRunOptions& opts, const std::filesystem::path& out_dir);
void run_fokker_planck(const FokkerPlanckRunOptions& opts,
                       const std::filesystem::path& out_dir);
void run_pgd(const PgdRunOptions& opts, const std::filesystem::path& out_dir);
void run_rb_offline(const RbOfflineRunOptions& opts, const std::filesystem::path& out_dir);
void run_rb_online(const RbOnlineRunOptions& opts, const std::filesystem::path& out_dir);
void run_variance_study(const VarianceStudyRunOptions& opts,
                        const std::filesystem::path& out_dir);
void run_convergence_study(const ConvergenceStudyRunOptions& opts,
                           const std::filesystem::path& out_dir);

} // namespace micromacro::io
