#pragma once

#include "smallnoise/matkit.hpp"
#include "smallnoise/models.hpp"
#include "smallnoise/sde.hpp"
#include "smallnoise/types.hpp"

#include <vector>

namespace smallnoise::ekf {

/// Filter state at one grid point: estimate mean M(t) and the scaled
/// covariance Q(t), i.e. the actual covariance divided by epsilon.
struct FilterState {
    double t;
    Vec m;
    matkit::SpdMat q;
};

struct FilterRun {
    std::vector<FilterState> states;  // per grid point
    std::vector<Mat> gains;           // per grid point
    std::vector<Vec> scaled_errors;   // Q^{-1/2}(t)(Y(t)-M(t)); empty without truth
    long projection_events = 0;
    long regularization_events = 0;

    std::vector<double> scaled_error_norms() const;
};

/// Gain G = [g ell^T + Q grad_h^T](ell ell^T)^{-1}, all coefficients at
/// (t, m, z). q may be any symmetric matrix (the Q -> 0 limit is valid).
Mat gain(const models::ModelCoefficients& model, double t, const Vec& m, const Vec& z,
         const Mat& q);

/// Riccati right-hand side
///   [grad_f - g ell^T (ell ell^T)^{-1} grad_h] Q + Q [...]^T
///   - Q [grad_h^T (ell ell^T)^{-1} grad_h] Q + a,
/// symmetrized, with noise intensity
///   a = sigma sigma^T + g (I - ell^T (ell ell^T)^{-1} ell) g^T.
/// The correlated-channel correction uses the orthogonal projection
/// I - ell^T (ell ell^T)^{-1} ell, which keeps a positive semi-definite.
Mat riccati_rhs(const models::ModelCoefficients& model, double t, const Vec& m, const Vec& z,
                const Mat& q);

/// Eigenvalue clipping onto the SPD cone: eigenvalues below `floor` are
/// raised to `floor`. Sets *clipped when an eigenvalue below -floor had
/// to be repaired (dust within (-floor, floor) does not count).
matkit::SpdMat project_spd(const Mat& q_raw, double floor, bool* clipped = nullptr);

/// Runs the filter along a trajectory: explicit Euler on the trajectory
/// grid for both the mean (driven by the recorded observation
/// increments) and the scaled-covariance Riccati equation, with
/// symmetrization and SPD projection each step.
FilterRun filter_run(const models::ModelCoefficients& model, const sde::Trajectory& traj,
                     const Vec& m0, const Mat& q0, double epsilon);

}  // namespace smallnoise::ekf
