#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "smallnoise/models.hpp"

#include <cmath>
#include <random>

using namespace smallnoise;
using namespace smallnoise::models;

namespace {

Vec v1(double x) {
    Vec v(1);
    v(0) = x;
    return v;
}

// Central finite differences of a coefficient in the signal argument.
Mat fd_gradient(const std::function<Vec(double, const Vec&, const Vec&)>& fn, double t,
                const Vec& y, const Vec& z, double step) {
    const int n = static_cast<int>(y.size());
    const int m = static_cast<int>(fn(t, y, z).size());
    Mat grad(m, n);
    for (int j = 0; j < n; ++j) {
        Vec yp = y, ym = y;
        yp(j) += step;
        ym(j) -= step;
        grad.col(j) = (fn(t, yp, z) - fn(t, ym, z)) / (2.0 * step);
    }
    return grad;
}

void check_gradients(const ModelCoefficients& model, std::mt19937_64& rng, double spread) {
    std::uniform_real_distribution<double> u(-spread, spread);
    int checked = 0;
    while (checked < 100) {
        Vec y(model.n), z(model.d);
        for (int i = 0; i < model.n; ++i) y(i) = u(rng);
        for (int i = 0; i < model.d; ++i) z(i) = u(rng);
        if (!admissible(model, y, z)) continue;
        ++checked;
        const Mat gf = model.grad_f(0.0, y, z);
        const Mat gh = model.grad_h(0.0, y, z);
        const Mat gf_fd = fd_gradient(model.f, 0.0, y, z, 1e-5);
        const Mat gh_fd = fd_gradient(model.h, 0.0, y, z, 1e-5);
        CHECK((gf - gf_fd).norm() <= 1e-4 * std::max(1.0, gf.norm()));
        CHECK((gh - gh_fd).norm() <= 1e-4 * std::max(1.0, gh.norm()));
    }
}

SisParams worked_params() {
    SisParams p;
    p.beta = 0.5;
    p.alpha = 0.2;
    p.rho_minus = 0.1;
    p.rho_plus = 0.15;
    p.N = 1.0;  // eps = 1, so (y, z) = (0, 0) probes the compartments (0.1, 0.05)
    p.x0 = {0.1, 0.05};
    return p;
}

}  // namespace

TEST_CASE("scalar linear model evaluates its matrices") {
    const auto m = LinearCoeffs::scalar(-1.0, 1.0, 1.0, 0.0, 1.0).model();
    CHECK(m.f(0.0, v1(2.0), v1(0.0))(0) == doctest::Approx(-2.0));
    CHECK(m.h(0.0, v1(2.0), v1(0.0))(0) == doctest::Approx(2.0));
    CHECK(m.grad_f(0.0, v1(5.0), v1(1.0))(0, 0) == doctest::Approx(-1.0));
    CHECK(m.grad_f(3.0, v1(-2.0), v1(7.0))(0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("rotation drift maps (1,0) to (0,-1)") {
    Mat a(2, 2);
    a << 0.0, 1.0, -1.0, 0.0;
    const auto m = linear_model(a, Mat::Identity(1, 2), Mat::Identity(2, 1), Mat::Zero(2, 1),
                                Mat::Identity(1, 1));
    Vec y(2);
    y << 1.0, 0.0;
    const Vec f = m.f(0.0, y, v1(0.0));
    CHECK(f(0) == doctest::Approx(0.0));
    CHECK(f(1) == doctest::Approx(-1.0));
}

TEST_CASE("linear model rejects singular l l^T") {
    CHECK_THROWS_AS(linear_model(Mat::Identity(1, 1), Mat::Identity(1, 1),
                                 Mat::Identity(1, 1), Mat::Zero(1, 1), Mat::Zero(1, 1)),
                    ValidationError);
}

TEST_CASE("linear coefficients are exactly linear") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat a(2, 2);
    a << -1.0, 0.3, 0.2, -0.7;
    const auto m = linear_model(a, Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Zero(2, 2),
                                Mat::Identity(2, 2));
    for (int trial = 0; trial < 50; ++trial) {
        Vec y1(2), y2(2), z = Vec::Zero(2);
        for (int i = 0; i < 2; ++i) {
            y1(i) = normal(rng);
            y2(i) = normal(rng);
        }
        const Vec lhs = m.f(0.0, y1, z) - m.f(0.0, y2, z);
        CHECK((lhs - a * (y1 - y2)).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("SI+-S drift pair matches the hand evaluation at (0.1, 0.05)") {
    const auto sys = sis_scaled_model(worked_params());
    CHECK(sys.epsilon == doctest::Approx(1.0));
    const Vec y = v1(0.0), z = v1(0.0);
    CHECK(sys.model.f(0.0, y, z)(0) == doctest::Approx(0.0125).epsilon(1e-12));
    CHECK(sys.model.h(0.0, y, z)(0) == doctest::Approx(0.0125).epsilon(1e-12));
}

TEST_CASE("SI+-S observation noise magnitude matches the hand evaluation") {
    const auto sys = sis_scaled_model(worked_params());
    const Mat ell = sys.model.ell(0.0, v1(0.0), v1(0.0));
    CHECK((ell * ell.transpose())(0, 0) == doctest::Approx(0.0275).epsilon(1e-12));
}

TEST_CASE("epsilon is the reciprocal square root of the population size") {
    SisParams p = worked_params();
    p.N = 1e4;
    CHECK(p.epsilon() == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(sis_scaled_model(p).epsilon == doctest::Approx(0.01).epsilon(1e-15));
}

TEST_CASE("SI+-S signal noise decomposition") {
    // sigma sigma^T + g g^T must equal beta(1-yh-zh)yh + rho_minus yh + alpha yh.
    SisParams p = worked_params();
    p.N = 1e4;
    const auto sys = sis_scaled_model(p);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec y = v1(u(rng)), z = v1(u(rng));
        if (!admissible(sys.model, y, z)) continue;
        const double yh = 0.1 + sys.epsilon * y(0);
        const double zh = 0.05 + sys.epsilon * z(0);
        const Mat sig = sys.model.sigma(0.0, y, z);
        const Mat g = sys.model.g(0.0, y, z);
        const double got = (sig * sig.transpose() + g * g.transpose())(0, 0);
        const double want =
            p.beta * (1.0 - yh - zh) * yh + p.rho_minus * yh + p.alpha * yh;
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
        CHECK((sys.model.ell(0.0, y, z) * sys.model.ell(0.0, y, z).transpose())(0, 0) > 0.0);
    }
}

TEST_CASE("gradients agree with central finite differences") {
    std::mt19937_64 rng(21);
    SisParams p = worked_params();
    p.N = 1e4;
    check_gradients(sis_scaled_model(p).model, rng, 2.0);
    check_gradients(LinearCoeffs::scalar(-1.0, 1.0, 1.0, 0.5, 1.0).model(), rng, 3.0);
    check_gradients(cubic_observation_model(), rng, 1.0);
}

TEST_CASE("admissibility guards the compartment domain") {
    SisParams p = worked_params();
    p.N = 1e4;
    const auto sys = sis_scaled_model(p);
    CHECK(admissible(sys.model, v1(0.0), v1(0.0)));
    // x01 + eps*y < 0 <=> y < -0.1/0.01 = -10
    CHECK_FALSE(admissible(sys.model, v1(-11.0), v1(0.0)));
    const auto lin = LinearCoeffs::scalar(-1.0, 1.0, 1.0, 0.5, 1.0).model();
    CHECK(admissible(lin, v1(1e6), v1(-1e6)));
}

TEST_CASE("SisParams validation") {
    SisParams p = worked_params();
    p.beta = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = worked_params();
    p.x0 = {0.6, 0.5};
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = worked_params();
    p.N = 0.5;
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("default step size scales with the fastest rate") {
    SisParams p = worked_params();
    CHECK(default_dt(p) == doctest::Approx(1e-3));
    p.beta = 4.0;
    CHECK(default_dt(p) == doctest::Approx(0.25e-3));
}
