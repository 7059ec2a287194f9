#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "micromacro/common.hpp"
#include "micromacro/dumbbell_kinetics.hpp"
#include "micromacro/shear_flow.hpp"

namespace micromacro::varred {

/// Spatial covariance of the Brownian motions driving the per-cell ensembles.
/// The macroscopic means do not depend on this choice; the variances do.
enum class BrownianVariant { ConstantInSpace, IndependentPerCell, AlternatingSign };

class BrownianStrategy final : public dumbbell::IncrementSource {
public:
    BrownianStrategy(BrownianVariant variant, std::uint64_t seed)
        : variant_(variant), seed_(seed)
    {
    }
    BrownianVariant variant() const { return variant_; }
    void normals(std::uint32_t cell, std::uint32_t replica, std::uint32_t step,
                 std::uint32_t attempt, int dim, double* out) const override;

private:
    BrownianVariant variant_;
    std::uint64_t seed_;
};

BrownianStrategy apply_brownian_strategy(BrownianVariant variant, std::uint64_t seed);

BrownianVariant brownian_variant_from_name(const std::string& name);
std::string brownian_variant_name(BrownianVariant variant);

/// Optimal scalar control-variate coefficient Covar(Z,Y)/Var(Y), empirical
/// with the unbiased 1/(M-1) normalization. Throws NumericalError when Y is
/// degenerate (zero variance).
double optimal_alpha(std::span<const double> z, std::span<const double> y);

/// Least-squares generalization: one coefficient per control variate, shared
/// across the response components (columns of z). Rank-deficient normal
/// equations fall back to a ridge (1e-10) solve, flagged.
struct MultiAlpha {
    Eigen::VectorXd alpha;
    bool regularized = false;
};
MultiAlpha optimal_alpha_multi(const std::vector<Eigen::MatrixXd>& y_samples,
                               const Eigen::MatrixXd& z_samples);

enum class ControlVariateVariant { Equilibrium, Hookean };

struct ControlVariateSpec {
    ControlVariateVariant variant = ControlVariateVariant::Equilibrium;
    // the companion always consumes the identical Brownian increments
};

/// Runs the primary process X and its companion X~ on shared increments and
/// returns the per-sample tensors X (x) F(X), X~ (x) F~(X~), plus the known
/// companion mean: the equilibrium identity, or the Oldroyd-B conformation
/// at t_end for the Hookean companion.
struct PairedSamples {
    std::vector<Eigen::Matrix2d> z;
    std::vector<Eigen::Matrix2d> y;
    Eigen::Matrix2d y_mean_known;
};
PairedSamples coupled_control_variate_run(const ControlVariateSpec& spec,
                                          const dumbbell::ForceModel& model,
                                          const Eigen::Matrix2d& kappa,
                                          const dumbbell::FlowParams& params, int samples,
                                          double t_end, std::uint64_t seed);

struct VarianceReport {
    std::vector<std::string> quantity;
    std::vector<double> mean;
    std::vector<double> variance;
    std::vector<double> half_width; ///< 1.96 sqrt(var / samples)
    int samples = 0;
};

VarianceReport make_variance_report(const std::vector<std::string>& names,
                                    const std::vector<std::vector<double>>& samples_per_name);

/// Replicated coupled-shear runs per strategy; reports the variance of the
/// mid-channel velocity and the cell-averaged per-cell stress variance.
struct StrategyStudyConfig {
    shear::SchemeConfig scheme;
    double t_end = 0.5;
    int repeats = 200;
    /// Replicate the cell-0 equilibrium draws across every cell, mirroring the
    /// shear system's y-independent initial configuration field. The spatial
    /// Brownian correlation is then the only difference between strategies.
    bool share_initial_replicas = true;
};

struct StrategyStudyResult {
    BrownianVariant variant;
    VarianceReport report;                 ///< quantities: u_mid, tau_cell_avg
    std::vector<double> u_mid_samples;     ///< one per replication
    std::vector<double> tau_mean_samples;  ///< cell-averaged stress per replication
    double tau_variance_cell_avg = 0.0;    ///< per-cell variance averaged over cells
    std::vector<double> tau_variance_per_cell;
    /// raw per-cell stress samples, [cell][replication]; kept for bootstraps
    std::vector<std::vector<double>> tau_samples_per_cell;
};

std::vector<StrategyStudyResult> variance_comparison_study(
    const StrategyStudyConfig& cfg, const std::vector<BrownianVariant>& strategies);

/// Reduced basis of control variates: greedily selected parameters with their
/// large-sample reference means. Snapshots are regenerated online from the
/// shared seed schedule, so storage is O(N).
struct RbBasis {
    dumbbell::ForceModel model;
    dumbbell::FlowParams params;
    double t_end = 1.0;
    std::uint64_t seed = 0;
    int m_large = 0;
    std::vector<Eigen::Matrix2d> parameters;
    std::vector<int> trial_indices;
    std::vector<Eigen::Vector3d> reference_means; ///< (xx, xy, yy) of X (x) F(X)
    std::vector<double> selection_variances;      ///< greedy estimator at selection time
    std::string error_estimator = "post-projection empirical variance";
};

/// Per-sample moment tensor components (xx, xy, yy) of X (x) F(X) at t_end.
/// Sample i is driven by the (seed, replica = sample_offset + i) stream,
/// shared across every parameter value, which is what couples online samples
/// to the stored snapshots.
std::vector<Eigen::Vector3d> stress_moment_samples(const dumbbell::ForceModel& model,
                                                   const Eigen::Matrix2d& kappa,
                                                   const dumbbell::FlowParams& params,
                                                   double t_end, int count,
                                                   std::uint64_t seed, int sample_offset = 0);

RbBasis rb_offline(const std::vector<Eigen::Matrix2d>& lambda_trial, int n_basis, int m_large,
                   const dumbbell::ForceModel& model, const dumbbell::FlowParams& params,
                   double t_end, std::uint64_t seed);

struct RbOnlineResult {
    Eigen::Vector3d estimate;    ///< corrected empirical mean of (xx, xy, yy)
    VarianceReport report;
    double uncorrected_variance = 0.0; ///< summed over components
    double corrected_variance = 0.0;
    double reduction_factor = 0.0;
    Eigen::VectorXd alpha;
    bool regularized = false;
};

/// Online estimate over samples [sample_offset, sample_offset + m_small).
RbOnlineResult rb_online(const Eigen::Matrix2d& lambda, const RbBasis& basis, int m_small,
                         int sample_offset = 0);

} // namespace micromacro::varred
