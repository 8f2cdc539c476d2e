#pragma once

#include "smallnoise/types.hpp"

namespace smallnoise::matkit {

/// Relative symmetry tolerance used by SpdMat and the symmetry guards.
inline constexpr double kSymmetryRtol = 1e-12;

double frobenius(const Mat& a);
bool is_symmetric(const Mat& a, double rtol = kSymmetryRtol);

/// (A + A^T)/2. Applied after every update that should preserve symmetry.
Mat symmetrize(const Mat& a);

/// Symmetric positive definite matrix. Construction validates symmetry
/// (1e-12 relative) and definiteness via Cholesky.
class SpdMat {
  public:
    explicit SpdMat(Mat m);
    static SpdMat identity(Eigen::Index n);

    /// Wraps without re-validating. For matrices that are SPD by
    /// construction (eigenvalue-clipped, scaled identity, ...).
    static SpdMat trusted(Mat m);

    const Mat& mat() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }

  private:
    struct Trusted {};
    SpdMat(Mat m, Trusted) : m_(std::move(m)) {}
    Mat m_;
};

/// Moore--Penrose pseudoinverse. Always exists; the four defining
/// identities (ABA=A, BAB=B, (AB)^T=AB, (BA)^T=BA) hold to 1e-10.
Mat pinv(const Mat& a);

/// True iff A - B is positive semi-definite within tol, i.e.
/// lambda_min(A - B) >= -tol. Throws on dimension mismatch or
/// non-symmetric input.
bool loewner_geq(const Mat& a, const Mat& b, double tol);

/// Checks tr^2(A) >= tr(A^2) >= tr^2(A)/d on a symmetric positive
/// semi-definite matrix, to 1e-10 relative tolerance. Throws on
/// non-PSD input (min_eig below -psd_tolerance).
bool trace_bounds_check(const Mat& a);
bool trace_bounds_check(const SpdMat& a);

/// Symmetric positive definite square root: S with S*S = Q.
SpdMat sqrt_spd(const SpdMat& q);

/// Extreme eigenvalues of a symmetric matrix.
double min_eig(const Mat& a);
double max_eig(const Mat& a);

/// Convention for "positive semi-definite within tol":
/// min_eig >= -tol with tol = 1e-10 * max(1, |A|_F).
double psd_tolerance(const Mat& a);

}  // namespace smallnoise::matkit
