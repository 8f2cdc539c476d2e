#include "smallnoise/matkit.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace smallnoise::matkit {

double frobenius(const Mat& a) { return a.norm(); }

bool is_symmetric(const Mat& a, double rtol) {
    if (a.rows() != a.cols()) return false;
    const double scale = std::max(1.0, a.norm());
    return (a - a.transpose()).norm() <= rtol * scale;
}

Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

SpdMat::SpdMat(Mat m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0)
        throw ValidationError("SpdMat: matrix must be square and non-empty");
    if (!m_.allFinite()) throw ValidationError("SpdMat: non-finite entries");
    if (!is_symmetric(m_))
        throw ValidationError("SpdMat: matrix not symmetric within 1e-12 relative tolerance");
    m_ = symmetrize(m_);
    Eigen::LLT<Mat> llt(m_);
    if (llt.info() != Eigen::Success || !(min_eig(m_) > 0.0))
        throw ValidationError("SpdMat: matrix not strictly positive definite");
}

SpdMat SpdMat::identity(Eigen::Index n) { return SpdMat::trusted(Mat::Identity(n, n)); }

SpdMat SpdMat::trusted(Mat m) { return SpdMat(std::move(m), Trusted{}); }

Mat pinv(const Mat& a) {
    if (!a.allFinite()) throw ValidationError("pinv: non-finite entries");
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cutoff =
        1e-13 * std::max<double>(a.rows(), a.cols()) * (sv.size() > 0 ? sv(0) : 0.0);
    Vec inv_sv = Vec::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff) inv_sv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

bool loewner_geq(const Mat& a, const Mat& b, double tol) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ValidationError("loewner_geq: dimension mismatch");
    if (!is_symmetric(a) || !is_symmetric(b))
        throw ValidationError("loewner_geq: inputs must be symmetric");
    return min_eig(symmetrize(a - b)) >= -tol;
}

bool trace_bounds_check(const Mat& m) {
    if (!is_symmetric(m)) throw ValidationError("trace_bounds_check: matrix not symmetric");
    if (min_eig(m) < -psd_tolerance(m))
        throw ValidationError("trace_bounds_check: matrix not positive semi-definite");
    const double d = static_cast<double>(m.rows());
    const double tr = m.trace();
    const double tr_sq = tr * tr;
    const double tr_of_sq = (m * m).trace();
    const double tol = 1e-10 * std::max(1.0, tr_sq);
    return tr_sq >= tr_of_sq - tol && tr_of_sq >= tr_sq / d - tol;
}

bool trace_bounds_check(const SpdMat& a) { return trace_bounds_check(a.mat()); }

SpdMat sqrt_spd(const SpdMat& q) {
    Eigen::SelfAdjointEigenSolver<Mat> es(q.mat());
    if (es.info() != Eigen::Success)
        throw NumericalError("sqrt_spd: eigendecomposition failed");
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw ValidationError("sqrt_spd: matrix not positive definite");
    Mat s = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
            es.eigenvectors().transpose();
    return SpdMat::trusted(symmetrize(s));
}

namespace {
Vec sym_eigenvalues(const Mat& a, const char* who) {
    if (!is_symmetric(a)) throw ValidationError(std::string(who) + ": matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError(std::string(who) + ": eigendecomposition failed");
    return es.eigenvalues();
}
}  // namespace

double min_eig(const Mat& a) { return sym_eigenvalues(a, "min_eig").minCoeff(); }
double max_eig(const Mat& a) { return sym_eigenvalues(a, "max_eig").maxCoeff(); }

double psd_tolerance(const Mat& a) { return 1e-10 * std::max(1.0, a.norm()); }

}  // namespace smallnoise::matkit
