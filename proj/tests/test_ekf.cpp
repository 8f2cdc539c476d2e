#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "smallnoise/diagnostics.hpp"
#include "smallnoise/ekf.hpp"
#include "smallnoise/mc.hpp"

#include <cmath>

using namespace smallnoise;
using namespace smallnoise::ekf;

namespace {

Vec v1(double x) {
    Vec v(1);
    v(0) = x;
    return v;
}

Mat m1(double x) {
    Mat m(1, 1);
    m(0, 0) = x;
    return m;
}

models::SisParams worked_sis() {
    models::SisParams p;
    p.beta = 0.5;
    p.alpha = 0.2;
    p.rho_minus = 0.1;
    p.rho_plus = 0.15;
    p.N = 1.0;
    p.x0 = {0.1, 0.05};
    return p;
}

}  // namespace

TEST_CASE("gain formula arithmetic on scalar models") {
    // g = 0, Q = 1, grad_h = 2, l = 1  ->  G = 2
    const auto m1g0 = models::LinearCoeffs::scalar(0.0, 2.0, 1.0, 0.0, 1.0).model();
    CHECK(gain(m1g0, 0.0, v1(0.0), v1(0.0), m1(1.0))(0, 0) == doctest::Approx(2.0));
    // Q -> 0, g = 1, l = 1: pure correlation gain g l^T / (l l^T) = 1
    const auto m2 = models::LinearCoeffs::scalar(0.0, 1.0, 1.0, 1.0, 1.0).model();
    CHECK(gain(m2, 0.0, v1(0.0), v1(0.0), m1(0.0))(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("gain on the worked SI+-S point") {
    const auto sys = models::sis_scaled_model(worked_sis());
    // g l^T = -0.02, grad_h = 0.2, l l^T = 0.0275, Q = 0.5
    const double g = gain(sys.model, 0.0, v1(0.0), v1(0.0), m1(0.5))(0, 0);
    CHECK(g == doctest::Approx(0.08 / 0.0275).epsilon(1e-12));
}

TEST_CASE("riccati right-hand side on scalar steady states") {
    // a0 = 0, h = l = s = 1: rhs(1) = 0
    const auto fam1 = models::LinearCoeffs::scalar(0.0, 1.0, 1.0, 0.0, 1.0).model();
    CHECK(riccati_rhs(fam1, 0.0, v1(0.0), v1(0.0), m1(1.0))(0, 0) ==
          doctest::Approx(0.0).epsilon(1e-14));
    // steady state s*l/h: s=2, l=3, h=1 -> Q* = 6
    const auto fam2 = models::LinearCoeffs::scalar(0.0, 1.0, 2.0, 0.0, 3.0).model();
    CHECK(riccati_rhs(fam2, 0.0, v1(0.0), v1(0.0), m1(6.0))(0, 0) ==
          doctest::Approx(0.0).epsilon(1e-14));
    CHECK(riccati_rhs(fam2, 0.0, v1(0.0), v1(0.0), m1(1.0))(0, 0) > 0.0);
}

TEST_CASE("noise intensity on the worked SI+-S point") {
    // a = sigma sigma^T + g g^T - (g l^T)^2 / (l l^T) at Q = 0
    const auto sys = models::sis_scaled_model(worked_sis());
    const double a = riccati_rhs(sys.model, 0.0, v1(0.0), v1(0.0), m1(0.0))(0, 0);
    CHECK(a == doctest::Approx(0.0725 - 0.0004 / 0.0275).epsilon(1e-12));
}

TEST_CASE("project_spd fixes dust and hard negatives") {
    bool clipped = true;
    const Mat fixed = project_spd(Mat::Identity(2, 2), 1e-12, &clipped).mat();
    CHECK_FALSE(clipped);
    CHECK((fixed - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);

    Mat dust(2, 2);
    dust << 1.0, 0.0, 0.0, -1e-15;
    const auto dusted = project_spd(dust, 1e-12, &clipped);
    CHECK_FALSE(clipped);  // within the dust band, repaired silently
    CHECK(matkit::min_eig(dusted.mat()) >= 1e-12 * 0.99);

    Mat hard(2, 2);
    hard << 1.0, 0.0, 0.0, -0.5;
    const auto repaired = project_spd(hard, 1e-12, &clipped);
    CHECK(clipped);  // counted by filter_run as a projection event
    CHECK(matkit::min_eig(repaired.mat()) > 0.0);

    CHECK_THROWS_AS(project_spd(Mat::Ones(2, 3), 1e-12), ValidationError);
}

TEST_CASE("filter tracks exactly on a zero-noise trajectory started at the truth") {
    const auto model = models::LinearCoeffs::scalar(-1.0, 1.0, 1.0, 0.5, 1.0).model();
    const long K = 1000;
    const auto traj = sde::simulate_with_increments(model, {v1(1.0), v1(0.0)}, 1e-2, 1e-3,
                                                    Mat::Zero(K, 1), Mat::Zero(K, 1));
    const auto run = filter_run(model, traj, v1(1.0), m1(1.0), 1e-2);
    double worst = 0.0;
    for (long k = 0; k <= K; ++k)
        worst = std::max(worst, std::abs(run.states[k].m(0) - traj.y_path[k](0)));
    CHECK(worst < 1e-12);
    CHECK(run.projection_events == 0);
}

TEST_CASE("scalar Riccati flow converges to the steady state from any start") {
    // a0 = 0, h = l = s = 1 family; Q* = 1.
    const auto model = models::LinearCoeffs::scalar(0.0, 1.0, 1.0, 0.0, 1.0).model();
    const double dt = 1e-4;
    for (double q0 : {0.1, 0.4, 0.9, 1.5, 4.0, 10.0}) {
        double q = q0;
        double prev_gap = std::abs(q - 1.0);
        for (long k = 0; k < 50000; ++k) {
            q += dt * riccati_rhs(model, 0.0, v1(0.0), v1(0.0), m1(q))(0, 0);
            const double gap = std::abs(q - 1.0);
            CHECK(gap <= prev_gap + 1e-14);  // monotone approach
            prev_gap = gap;
        }
        CHECK(std::abs(q - 1.0) < 1e-4);
    }
}

TEST_CASE("filter output is invariant under orthogonal reparametrization of W2") {
    Mat g(1, 2), l(1, 2);
    g << 0.5, 0.3;
    l << 1.0, -0.2;
    const double theta = 0.7;
    Mat rot(2, 2);
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);

    const auto model_a = models::linear_model(m1(-1.0), m1(1.0), m1(1.0), g, l);
    const auto model_b =
        models::linear_model(m1(-1.0), m1(1.0), m1(1.0), Mat(g * rot), Mat(l * rot));

    const auto traj = sde::simulate(model_a, {v1(0.0), v1(0.0)}, {1e-2, 1e-3, 1.0, 99});
    const auto run_a = filter_run(model_a, traj, v1(0.2), m1(1.0), 1e-2);
    const auto run_b = filter_run(model_b, traj, v1(0.2), m1(1.0), 1e-2);
    for (std::size_t k = 0; k < run_a.states.size(); ++k) {
        CHECK(std::abs(run_a.states[k].m(0) - run_b.states[k].m(0)) < 1e-10);
        CHECK(std::abs(run_a.states[k].q.mat()(0, 0) - run_b.states[k].q.mat()(0, 0)) < 1e-10);
    }
}

TEST_CASE("scaled error stays within the theorem envelope on SI+-S") {
    models::SisParams p = worked_sis();
    p.N = 1e6;
    const auto sys = models::sis_scaled_model(p);
    const double bound = 10.0 * std::sqrt(sys.epsilon);
    const int n_seeds = 500;

    mc::PathWorker<bool> worker = [&](long i) {
        const auto traj = sde::simulate(sys.model, sys.ic,
                                        {sys.epsilon, 1e-3, 5.0, sde::split_seed(2024, i)});
        const auto run = filter_run(sys.model, traj, sys.ic.y0, Mat::Identity(1, 1),
                                    sys.epsilon);
        for (const auto& err : run.scaled_errors)
            if (err.norm() > bound) return false;
        return true;
    };
    const auto outcomes = mc::run_batch(n_seeds, worker);
    int inside = 0;
    for (const auto& oc : outcomes) {
        REQUIRE(oc.ok);
        inside += oc.value ? 1 : 0;
    }
    CHECK(inside >= n_seeds * 95 / 100);
}

TEST_CASE("trace of the Riccati flow admits a concave quadratic envelope on SI+-S") {
    models::SisParams p = worked_sis();
    p.N = 1e4;
    const auto sys = models::sis_scaled_model(p);
    const auto traj =
        sde::simulate(sys.model, sys.ic, {sys.epsilon, 1e-3, 20.0, 31337});
    const auto run = filter_run(sys.model, traj, sys.ic.y0, m1(50.0), sys.epsilon);

    // Samples (p, dp/dt) along the run; a least-squares parabola must
    // open downward, yielding positive envelope constants.
    std::vector<double> ps, rhss;
    for (std::size_t k = 0; k < run.states.size(); k += 10) {
        const double pq = run.states[k].q.mat().trace();
        ps.push_back(pq);
        rhss.push_back(riccati_rhs(sys.model, run.states[k].t, run.states[k].m,
                                   traj.z_path[k], run.states[k].q.mat())
                           .trace());
    }
    // quadratic LS in (1, p, p^2)
    Mat design(ps.size(), 3);
    Vec target(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = ps[i];
        design(i, 2) = ps[i] * ps[i];
        target(i) = rhss[i];
    }
    const Vec coef = (design.transpose() * design).ldlt().solve(design.transpose() * target);
    REQUIRE(coef(2) < 0.0);
    const double c1 = -0.5 * coef(2);
    const double c2 = std::max(coef(1), 0.0) + 1.0;
    double c3 = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i)
        c3 = std::max(c3, rhss[i] + c1 * ps[i] * ps[i] - c2 * ps[i]);
    MESSAGE("trace envelope constants: C1=" << c1 << " C2=" << c2 << " C3=" << c3);
    CHECK(c1 > 0.0);
    CHECK(std::isfinite(c3));
    const auto mon = diag::trace_monitor(run);
    CHECK(mon.max_product < 1e6);
    CHECK(std::isfinite(mon.max_trace_q_inv));
}

TEST_CASE("filter rejects an inadmissible filter state with its step index") {
    models::SisParams p = worked_sis();
    p.N = 100.0;  // eps = 0.1 so a large wrong start exits the domain
    const auto sys = models::sis_scaled_model(p);
    const auto traj = sde::simulate(sys.model, sys.ic, {sys.epsilon, 1e-3, 1.0, 5});
    CHECK_THROWS_AS(filter_run(sys.model, traj, v1(-2.0), m1(1e6), sys.epsilon),
                    NumericalError);
}

TEST_CASE("filter run validates inputs") {
    const auto model = models::LinearCoeffs::scalar(-1.0, 1.0, 1.0, 0.0, 1.0).model();
    const auto traj = sde::simulate(model, {v1(0.0), v1(0.0)}, {1e-2, 1e-3, 0.1, 3});
    CHECK_THROWS_AS(filter_run(model, traj, v1(0.0), m1(-1.0), 1e-2), ValidationError);
    CHECK_THROWS_AS(filter_run(model, traj, Vec::Zero(2), m1(1.0), 1e-2), ValidationError);
}
