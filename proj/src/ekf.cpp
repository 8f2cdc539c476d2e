#include "smallnoise/ekf.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace smallnoise::ekf {

namespace {

// Coefficients of one (t, m, z) evaluation shared by gain and Riccati.
struct CoeffEval {
    Vec f, h;
    Mat sigma, g, ell, grad_f, grad_h;
    Mat ell_ellt_inv;
    bool regularized = false;
};

CoeffEval evaluate(const models::ModelCoefficients& model, double t, const Vec& m, const Vec& z) {
    CoeffEval e;
    e.f = model.f(t, m, z);
    e.h = model.h(t, m, z);
    e.sigma = model.sigma(t, m, z);
    e.g = model.g(t, m, z);
    e.ell = model.ell(t, m, z);
    e.grad_f = model.grad_f(t, m, z);
    e.grad_h = model.grad_h(t, m, z);

    Mat llt_mat = e.ell * e.ell.transpose();
    const double tr = llt_mat.trace();
    Eigen::SelfAdjointEigenSolver<Mat> es(llt_mat, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success || !(tr > 0.0))
        throw NumericalError("ekf: ell ell^T evaluation failed");
    if (es.eigenvalues().minCoeff() < 1e-12 * tr) {
        llt_mat += (1e-10 * tr) * Mat::Identity(llt_mat.rows(), llt_mat.cols());
        e.regularized = true;
    }
    Eigen::LLT<Mat> llt(llt_mat);
    if (llt.info() != Eigen::Success)
        throw NumericalError("ekf: ell ell^T singular beyond regularization threshold");
    e.ell_ellt_inv = llt.solve(Mat::Identity(llt_mat.rows(), llt_mat.cols()));
    return e;
}

Mat gain_from(const CoeffEval& e, const Mat& q) {
    return (e.g * e.ell.transpose() + q * e.grad_h.transpose()) * e.ell_ellt_inv;
}

Mat rhs_from(const CoeffEval& e, const Mat& q) {
    const Mat drift = e.grad_f - e.g * e.ell.transpose() * e.ell_ellt_inv * e.grad_h;
    const Mat obs_info = e.grad_h.transpose() * e.ell_ellt_inv * e.grad_h;
    const Mat proj = Mat::Identity(e.ell.cols(), e.ell.cols()) -
                     e.ell.transpose() * e.ell_ellt_inv * e.ell;
    const Mat a = e.sigma * e.sigma.transpose() + e.g * proj * e.g.transpose();
    return matkit::symmetrize(drift * q + q * drift.transpose() - q * obs_info * q + a);
}

void check_filter_domain(const models::ModelCoefficients& model, double t, const Vec& m,
                         const Vec& z, long step) {
    if (!m.allFinite())
        throw NumericalError("filter: non-finite mean", step);
    if (model.domain_ok && !model.domain_ok(t, m, z))
        throw NumericalError("filter: inadmissible filter state for coefficient evaluation",
                             step);
}

}  // namespace

std::vector<double> FilterRun::scaled_error_norms() const {
    std::vector<double> out;
    out.reserve(scaled_errors.size());
    for (const auto& e : scaled_errors) out.push_back(e.norm());
    return out;
}

Mat gain(const models::ModelCoefficients& model, double t, const Vec& m, const Vec& z,
         const Mat& q) {
    return gain_from(evaluate(model, t, m, z), q);
}

Mat riccati_rhs(const models::ModelCoefficients& model, double t, const Vec& m, const Vec& z,
                const Mat& q) {
    return rhs_from(evaluate(model, t, m, z), q);
}

matkit::SpdMat project_spd(const Mat& q_raw, double floor, bool* clipped) {
    if (!matkit::is_symmetric(q_raw))
        throw ValidationError("project_spd: input must be symmetric");
    if (!(floor > 0.0)) throw ValidationError("project_spd: floor must be > 0");
    Eigen::SelfAdjointEigenSolver<Mat> es(matkit::symmetrize(q_raw));
    if (es.info() != Eigen::Success)
        throw NumericalError("project_spd: eigendecomposition failed");
    if (clipped) *clipped = es.eigenvalues().minCoeff() < -floor;
    if (es.eigenvalues().minCoeff() >= floor) {
        return matkit::SpdMat::trusted(matkit::symmetrize(q_raw));
    }
    Vec lam = es.eigenvalues().cwiseMax(floor);
    Mat q = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    return matkit::SpdMat::trusted(matkit::symmetrize(q));
}

FilterRun filter_run(const models::ModelCoefficients& model, const sde::Trajectory& traj,
                     const Vec& m0, const Mat& q0, double epsilon) {
    if (traj.steps() < 1) throw ValidationError("filter_run: empty trajectory");
    if (m0.size() != model.n) throw ValidationError("filter_run: m0 dimension mismatch");
    matkit::SpdMat q = matkit::SpdMat(q0);  // validates SPD
    (void)epsilon;  // Q is stored scaled; epsilon only matters on export.

    const long K = traj.steps();
    const double dt = traj.dt();
    const bool have_truth = !traj.y_path.empty();

    FilterRun run;
    run.states.reserve(K + 1);
    run.gains.reserve(K + 1);
    if (have_truth) run.scaled_errors.reserve(K + 1);

    Vec m = m0;
    auto record = [&](long k) {
        run.states.push_back(FilterState{traj.times[k], m, q});
        if (have_truth) {
            const matkit::SpdMat s = matkit::sqrt_spd(q);
            run.scaled_errors.push_back(s.mat().llt().solve(traj.y_path[k] - m));
        }
    };

    for (long k = 0; k < K; ++k) {
        const double t = traj.times[k];
        const Vec& z = traj.z_path[k];
        check_filter_domain(model, t, m, z, k);

        CoeffEval e = evaluate(model, t, m, z);
        if (e.regularized) ++run.regularization_events;
        const Mat G = gain_from(e, q.mat());
        record(k);
        run.gains.push_back(G);

        const Vec dz = traj.z_path[k + 1] - z;
        m = m + e.f * dt + G * (dz - e.h * dt);

        Mat q_raw = matkit::symmetrize(q.mat() + rhs_from(e, q.mat()) * dt);
        if (!q_raw.allFinite())
            throw NumericalError("filter: covariance update produced non-finite entries", k);
        const double floor = 1e-12 * std::max(1.0, q_raw.trace());
        bool clipped = false;
        q = project_spd(q_raw, floor, &clipped);
        if (clipped) ++run.projection_events;
    }

    check_filter_domain(model, traj.times[K], m, traj.z_path[K], K);
    CoeffEval e = evaluate(model, traj.times[K], m, traj.z_path[K]);
    record(K);
    run.gains.push_back(gain_from(e, q.mat()));
    return run;
}

}  // namespace smallnoise::ekf
