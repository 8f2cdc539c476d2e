#pragma once

#include "smallnoise/ekf.hpp"
#include "smallnoise/models.hpp"
#include "smallnoise/types.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace smallnoise::diag {

/// Axis-aligned sampling box. All estimated constants are relative to
/// the declared box, which is echoed into every report.
struct BoxDomain {
    Vec lo;
    Vec hi;

    BoxDomain(Vec lo_, Vec hi_);
    Vec sample(std::mt19937_64& rng) const;
    Vec center() const { return 0.5 * (lo + hi); }
};

using VecFn = std::function<Vec(const Vec&)>;

/// Empirical almost-linearity modulus: max over sampled pairs of
/// |phi(x1) - phi(x2) - F (x1 - x2)| / |x1 - x2|. A lower bound for the
/// true modulus on the box; monotone non-decreasing in the sample set.
double almost_linearity_modulus(const VecFn& phi, const Mat& F, const BoxDomain& box,
                                int n_pairs, std::uint64_t seed);

/// Empirical strong-injectivity constant: min over sampled pairs of
/// |h(x1) - h(x2)| / |x1 - x2|. An upper bound for the best constant;
/// monotone non-increasing in the sample set.
double injectivity_constant(const VecFn& h, const BoxDomain& box, int n_pairs,
                            std::uint64_t seed);

/// Per-grid-point check of Kdot >= A K + K A^T + k K in the Loewner
/// order. All paths must share the grid.
std::vector<bool> check_kk_stable(const std::vector<Mat>& a_path, const std::vector<Mat>& k_mat,
                                  const std::vector<Mat>& k_dot, const std::vector<double>& k_fn,
                                  double tol);

struct StabilityWitness {
    double c_hat = 0.0;     // fitted decay rate
    double c_big_hat = 0.0; // fitted prefactor
    double residual = 0.0;  // RMS of the log-norm fit
    std::vector<double> grid;
    bool overflowed = false;
};

/// Integrates the fundamental matrix zeta' = A(t) zeta, zeta(0) = I by
/// explicit Euler on the grid of a_path, then least-squares fits
/// log |zeta(t)|_F against t. c_hat is minus the slope. If zeta
/// overflows, the fit uses the points collected so far and the witness
/// is flagged (a growing zeta yields c_hat < 0, i.e. non-stable).
StabilityWitness exp_stability_fit(const std::vector<Mat>& a_path, double dt);

/// Forgetting rate implied by a stability witness: any rate strictly
/// below the fitted decay qualifies, and this fixes the choice as
/// c_hat * (1 - margin).
double c0_from_stability(const StabilityWitness& witness, double margin = 0.1);

struct MomentEstimate {
    double q_order = 2.0;
    double value = 0.0;
    double std_error = 0.0;
    long n_samples = 0;
};

/// Empirical L^q norm (mean of |x|^q)^{1/q} with a 200-resample
/// bootstrap standard error.
MomentEstimate moment_norm(const std::vector<Vec>& samples, double q_order,
                           std::uint64_t bootstrap_seed = 0, int n_boot = 200);

struct OrderFit {
    double alpha_hat = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Least-squares slope of log(norm) against log(eps).
OrderFit order_fit(const std::vector<double>& eps_grid, const std::vector<double>& norms);

/// Plain line fit y = slope*x + intercept, shared by the order and
/// stability estimators.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double rms_residual = 0.0;
};
LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

struct AssumptionThresholds {
    double injectivity_min = 1e-3;
    double ellipticity_min = 1e-6;
    double almost_linear_max = 1e-2;
    double q0_ratio_max = 1e6;
};

struct AssumptionReport {
    // Estimates (domain-relative, see the box fields).
    double mu_f = 0.0;
    double mu_h = 0.0;
    double injectivity_c = 0.0;
    double coefficient_sup = 0.0;
    double min_eig_a = 0.0;
    double min_eig_llt_inv = 0.0;
    double q0_eig_ratio = 0.0;

    // Verdicts with the thresholds they were judged against.
    AssumptionThresholds thresholds;
    bool bounded = false;
    bool almost_linear = false;
    bool injective = false;
    bool elliptic = false;
    bool q0_ratio_ok = false;

    // Sampling setup echo.
    int n_pairs = 0;
    int n_z_samples = 0;
    std::uint64_t seed = 0;
    Vec box_y_lo, box_y_hi, box_z_lo, box_z_hi;
};

/// Samples the model coefficients over the declared (y, z) box and
/// fills an AssumptionReport: coefficient boundedness, almost-linearity
/// moduli of f and h (against their derivatives at the box center),
/// strong injectivity of h, ellipticity of the noise intensity a and of
/// (ell ell^T)^{-1}, and the eigenvalue ratio of q0.
AssumptionReport check_assumptions(const models::ModelCoefficients& model,
                                   const BoxDomain& y_box, const BoxDomain& z_box, const Mat& q0,
                                   int n_pairs, int n_z_samples, std::uint64_t seed,
                                   const AssumptionThresholds& thresholds = {});

struct TraceMonitor {
    double max_trace_q = 0.0;
    double max_trace_q_inv = 0.0;
    double max_product = 0.0;
};

/// Tracks tr(Q), tr(Q^{-1}) and their product along a filter run.
TraceMonitor trace_monitor(const ekf::FilterRun& run);

}  // namespace smallnoise::diag
