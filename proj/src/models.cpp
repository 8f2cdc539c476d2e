#include "smallnoise/models.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace smallnoise::models {

namespace {

// Square-root arguments within -1e-12 of zero are floating-point dust
// and get clamped; anything more negative is out of domain.
constexpr double kDomainDust = 1e-12;

bool clamped_sqrt(double x, double* out) {
    if (x < -kDomainDust) return false;
    *out = std::sqrt(std::max(x, 0.0));
    return true;
}

}  // namespace

void SisParams::validate() const {
    if (!(beta > 0.0 && alpha > 0.0 && rho_minus > 0.0 && rho_plus > 0.0))
        throw ValidationError("SisParams: all rates must be strictly positive");
    if (!(x0[0] > 0.0 && x0[0] < 1.0 && x0[1] > 0.0 && x0[1] < 1.0))
        throw ValidationError("SisParams: x0 components must lie in (0,1)");
    if (!(x0[0] + x0[1] < 1.0))
        throw ValidationError("SisParams: x0 components must sum below 1");
    if (!(N >= 1.0)) throw ValidationError("SisParams: N must be >= 1");
}

double SisParams::epsilon() const { return 1.0 / std::sqrt(N); }

ModelCoefficients linear_model(const Mat& a, const Mat& h_mat, const Mat& s, const Mat& g_mat,
                               const Mat& l_mat) {
    const int n = static_cast<int>(a.rows());
    const int d = static_cast<int>(h_mat.rows());
    const int d1 = static_cast<int>(s.cols());
    const int d2 = static_cast<int>(g_mat.cols());
    if (a.cols() != n || h_mat.cols() != n || s.rows() != n || g_mat.rows() != n ||
        l_mat.rows() != d || l_mat.cols() != d2)
        throw ValidationError("linear_model: inconsistent coefficient dimensions");
    Eigen::LLT<Mat> llt(Mat(l_mat * l_mat.transpose()));
    if (llt.info() != Eigen::Success)
        throw ValidationError("linear_model: l l^T is singular");

    ModelCoefficients m;
    m.n = n;
    m.d = d;
    m.d1 = d1;
    m.d2 = d2;
    m.f = [a](double, const Vec& y, const Vec&) -> Vec { return a * y; };
    m.h = [h_mat](double, const Vec& y, const Vec&) -> Vec { return h_mat * y; };
    m.sigma = [s](double, const Vec&, const Vec&) -> Mat { return s; };
    m.g = [g_mat](double, const Vec&, const Vec&) -> Mat { return g_mat; };
    m.ell = [l_mat](double, const Vec&, const Vec&) -> Mat { return l_mat; };
    m.grad_f = [a](double, const Vec&, const Vec&) -> Mat { return a; };
    m.grad_h = [h_mat](double, const Vec&, const Vec&) -> Mat { return h_mat; };
    return m;
}

LinearCoeffs LinearCoeffs::scalar(double a, double h, double s, double g, double l) {
    auto m = [](double v) { return (Mat(1, 1) << v).finished(); };
    return LinearCoeffs{m(a), m(h), m(s), m(g), m(l)};
}

SisSystem sis_scaled_model(const SisParams& p) {
    p.validate();
    const double eps = p.epsilon();
    const double beta = p.beta, alpha = p.alpha, rm = p.rho_minus, rp = p.rho_plus;
    const double x01 = p.x0[0], x02 = p.x0[1];

    // Compartment values behind the deviation coordinates.
    auto yhat = [=](double y) { return x01 + eps * y; };
    auto zhat = [=](double z) { return x02 + eps * z; };

    ModelCoefficients m;
    m.n = 1;
    m.d = 1;
    m.d1 = 2;
    m.d2 = 2;
    m.f = [=](double, const Vec& y, const Vec& z) -> Vec {
        const double yh = yhat(y(0)), zh = zhat(z(0));
        Vec out(1);
        out(0) = beta * (1.0 - yh - zh) * yh - (alpha + rm) * yh;
        return out;
    };
    m.h = [=](double, const Vec& y, const Vec& z) -> Vec {
        const double yh = yhat(y(0)), zh = zhat(z(0));
        Vec out(1);
        out(0) = alpha * yh - rp * zh;
        return out;
    };
    m.sigma = [=](double, const Vec& y, const Vec& z) -> Mat {
        const double yh = yhat(y(0)), zh = zhat(z(0));
        double s1, s2;
        if (!clamped_sqrt(beta * (1.0 - yh - zh) * yh, &s1) || !clamped_sqrt(rm * yh, &s2))
            throw NumericalError("sis sigma: negative compartment expression under square root");
        Mat out(1, 2);
        out << s1, -s2;
        return out;
    };
    m.g = [=](double, const Vec& y, const Vec&) -> Mat {
        double s;
        if (!clamped_sqrt(alpha * yhat(y(0)), &s))
            throw NumericalError("sis g: negative compartment expression under square root");
        Mat out(1, 2);
        out << -s, 0.0;
        return out;
    };
    m.ell = [=](double, const Vec& y, const Vec& z) -> Mat {
        double s1, s2;
        if (!clamped_sqrt(alpha * yhat(y(0)), &s1) || !clamped_sqrt(rp * zhat(z(0)), &s2))
            throw NumericalError("sis ell: negative compartment expression under square root");
        Mat out(1, 2);
        out << s1, -s2;
        return out;
    };
    m.grad_f = [=](double, const Vec& y, const Vec& z) -> Mat {
        const double yh = yhat(y(0)), zh = zhat(z(0));
        Mat out(1, 1);
        out(0, 0) = eps * (beta * (1.0 - 2.0 * yh - zh) - (alpha + rm));
        return out;
    };
    m.grad_h = [=](double, const Vec&, const Vec&) -> Mat {
        Mat out(1, 1);
        out(0, 0) = alpha * eps;
        return out;
    };
    m.domain_ok = [=](double, const Vec& y, const Vec& z) {
        const double yh = yhat(y(0)), zh = zhat(z(0));
        return beta * (1.0 - yh - zh) * yh >= -kDomainDust && rm * yh >= -kDomainDust &&
               alpha * yh >= -kDomainDust && rp * zh >= -kDomainDust &&
               alpha * yh + rp * zh > 0.0;
    };

    InitialCondition ic{Vec::Zero(1), Vec::Zero(1)};
    if (!admissible(m, ic.y0, ic.z0))
        throw ValidationError("sis_scaled_model: initial condition is not admissible");
    return SisSystem{std::move(m), std::move(ic), eps};
}

bool admissible(const ModelCoefficients& model, const Vec& y, const Vec& z) {
    if (!y.allFinite() || !z.allFinite()) return false;
    if (model.domain_ok && !model.domain_ok(0.0, y, z)) return false;
    try {
        if (!model.f(0.0, y, z).allFinite()) return false;
        if (!model.h(0.0, y, z).allFinite()) return false;
        if (!model.sigma(0.0, y, z).allFinite()) return false;
        if (!model.g(0.0, y, z).allFinite()) return false;
        const Mat l = model.ell(0.0, y, z);
        if (!l.allFinite()) return false;
        Eigen::LLT<Mat> llt(Mat(l * l.transpose()));
        return llt.info() == Eigen::Success;
    } catch (const NumericalError&) {
        return false;
    }
}

ModelCoefficients cubic_observation_model() {
    ModelCoefficients m;
    m.n = 1;
    m.d = 1;
    m.d1 = 1;
    m.d2 = 1;
    m.f = [](double, const Vec& y, const Vec&) -> Vec { return -y; };
    m.h = [](double, const Vec& y, const Vec&) -> Vec {
        Vec out(1);
        out(0) = y(0) * y(0) * y(0);
        return out;
    };
    m.sigma = [](double, const Vec&, const Vec&) -> Mat { return Mat::Identity(1, 1); };
    m.g = [](double, const Vec&, const Vec&) -> Mat { return Mat::Zero(1, 1); };
    m.ell = [](double, const Vec&, const Vec&) -> Mat { return Mat::Identity(1, 1); };
    m.grad_f = [](double, const Vec&, const Vec&) -> Mat { return -Mat::Identity(1, 1); };
    m.grad_h = [](double, const Vec& y, const Vec&) -> Mat {
        Mat out(1, 1);
        out(0, 0) = 3.0 * y(0) * y(0);
        return out;
    };
    return m;
}

double default_dt(const SisParams& p) {
    const double max_rate = std::max({p.beta, p.alpha, p.rho_minus, p.rho_plus});
    return 1e-3 * std::min(1.0, 1.0 / max_rate);
}

}  // namespace smallnoise::models
