#pragma once

#include "smallnoise/diagnostics.hpp"
#include "smallnoise/ekf.hpp"
#include "smallnoise/models.hpp"
#include "smallnoise/sde.hpp"
#include "smallnoise/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace smallnoise::studies {

/// One concrete filtering problem at a given noise scale.
struct ModelInstance {
    models::ModelCoefficients model;
    models::InitialCondition ic;
    double epsilon;
};

/// Family of instances indexed by epsilon. The linear benchmark keeps
/// its coefficients fixed; the epidemic family rebuilds from
/// N = 1/eps^2.
using ModelFamily = std::function<ModelInstance(double epsilon)>;

ModelFamily linear_family(const models::LinearCoeffs& lm, const Vec& y0, const Vec& z0);
ModelFamily sis_family(models::SisParams base);  // N is overridden per epsilon

// ---------------------------------------------------------------------------
// Convergence study (error order in epsilon)

struct ConvergenceStudySpec {
    ModelFamily family;
    std::string family_label;
    std::vector<double> eps_grid;  // strictly decreasing, in (0, 1]
    int n_paths = 100;
    std::vector<double> q_orders{2.0};
    std::vector<double> t_checkpoints{1.0};
    double dt = 1e-3;
    std::uint64_t master_seed = 0;
    Mat q0;
    bool zero_noise = false;  // diagnostics mode: all increments zeroed
    bool force_serial = false;

    void validate() const;
};

struct MomentCell {
    double eps = 0.0;
    double t = 0.0;
    double q_order = 0.0;
    diag::MomentEstimate estimate;
};

struct AlphaFit {
    double t = 0.0;
    double q_order = 0.0;
    double alpha_hat = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double ci_lo = 0.0;  // bootstrap 2.5% percentile
    double ci_hi = 0.0;  // bootstrap 97.5% percentile
};

struct PathNormRecord {
    double eps = 0.0;
    long path_index = 0;
    double t = 0.0;
    double value = 0.0;
};

struct ConvergenceReport {
    std::string status;  // VALID | DEGRADED | DEGENERATE
    std::vector<std::string> warnings;
    std::vector<MomentCell> moments;
    std::vector<AlphaFit> fits;
    std::vector<double> eps_grid;
    std::vector<long> failed_per_eps;
    long n_paths = 0;
    std::vector<PathNormRecord> path_records;  // companion CSV payload
    double wall_seconds = 0.0;                 // logged, never serialized
};

/// Simulates n_paths per epsilon with the initial estimate offset drawn
/// as sqrt(eps) * Q0^{1/2} * Normal(0, I), filters each trajectory, and
/// fits the order of |Q^{-1/2}(Y-M)| at the checkpoints across the
/// epsilon grid.
ConvergenceReport run_convergence_study(const ConvergenceStudySpec& spec);

// ---------------------------------------------------------------------------
// Forgetting study (decay of the initial estimation error)

struct ForgettingStudySpec {
    ModelFamily family;
    std::string family_label;
    double epsilon = 1e-4;
    std::vector<double> initial_error_magnitudes;  // deltas, all > 0
    int n_paths = 100;
    std::vector<double> t_grid;  // measurement times on the dt grid
    double q_order = 2.0;
    double dt = 1e-3;
    std::uint64_t master_seed = 0;
    Mat q0;
    Vec direction;  // unit vector u; M(0) = Y(0) + delta * u
    // A grid point enters the decay fit only while
    // norm_delta - floor > fit_cutoff_ratio * floor, which keeps the
    // fit inside the exponential regime of the bound.
    double fit_cutoff_ratio = 4.0;
    bool force_serial = false;

    void validate() const;
};

struct DecayFit {
    double delta = 0.0;
    double c0_hat = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    int points_used = 0;
    int points_dropped = 0;
};

struct ForgettingPathRecord {
    double delta = 0.0;
    long path_index = 0;
    double t = 0.0;
    double value = 0.0;
};

struct ForgettingReport {
    std::string status;
    std::vector<std::string> warnings;
    std::vector<double> deltas;                          // 0 first (baseline), then spec order
    std::vector<std::vector<diag::MomentEstimate>> norms;  // [delta][t]
    std::vector<double> t_grid;
    std::vector<DecayFit> per_delta_fits;
    double c0_hat = 0.0;  // pooled across deltas
    double c0_ci_lo = 0.0;
    double c0_ci_hi = 0.0;
    double bound_constant = 0.0;  // fitted C in C sqrt(eps) + C delta e^{-c0 t}
    bool bound_dominates = false;
    diag::StabilityWitness pilot;
    // Stability of A(t) can only be probed along finitely many
    // processes; the pilot filter path and these offsets of it are the
    // coverage actually checked. offset -> fitted decay rate.
    std::vector<std::pair<double, double>> stability_probes;
    long failed_paths = 0;
    long total_paths = 0;
    std::vector<ForgettingPathRecord> path_records;
    double wall_seconds = 0.0;
};

/// For each delta, filters the same trajectories with M(0) offset by
/// delta along the configured direction, fits the decay rate of
/// log(norm_delta - baseline norm) over the usable grid points, and
/// verifies the fitted bound C sqrt(eps) + C delta e^{-c0 t} dominates
/// the empirical curves. Requires the pilot linearization A(t) to be
/// exponentially stable.
ForgettingReport run_forgetting_study(const ForgettingStudySpec& spec);

// ---------------------------------------------------------------------------
// Discrete Kalman oracle on exactly linear models

struct OracleRun {
    std::vector<Vec> means;        // per grid point
    std::vector<Mat> covs_scaled;  // P_k / epsilon, per grid point
};

/// Standard discrete-time Kalman recursion on the Euler-discretized
/// linear model, with correlated process/measurement noise
/// (cross-covariance eps * g l^T dt), consuming the same observation
/// increments the trajectory recorded. Throws if the supplied model is
/// not exactly linear.
OracleRun discrete_kalman_oracle(const models::ModelCoefficients& model,
                                 const sde::Trajectory& traj, const Vec& m0, const Mat& q0,
                                 double epsilon);
OracleRun discrete_kalman_oracle(const models::LinearCoeffs& lm, const sde::Trajectory& traj,
                                 const Vec& m0, const Mat& q0, double epsilon);

struct OracleComparison {
    int n_seeds = 0;
    double rms_mean_diff = 0.0;   // worst RMS over seeds
    double max_cov_diff = 0.0;    // worst absolute scaled-covariance gap
    long projection_events = 0;   // summed over the EKF runs
    double wall_seconds = 0.0;
};

/// Runs the EKF and the discrete oracle on shared trajectories.
OracleComparison oracle_compare(const models::LinearCoeffs& lm, double epsilon, double dt,
                                double t_end, int n_seeds, std::uint64_t master_seed,
                                const Mat& q0, bool force_serial = false);

/// Linearization A(t) = grad_f - G grad_h along a filter run; feeds the
/// exponential-stability fit.
std::vector<Mat> filter_linearization_path(const models::ModelCoefficients& model,
                                           const sde::Trajectory& traj,
                                           const ekf::FilterRun& run);

}  // namespace smallnoise::studies
