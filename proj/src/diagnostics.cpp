#include "smallnoise/diagnostics.hpp"

#include "smallnoise/matkit.hpp"
#include "smallnoise/sde.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace smallnoise::diag {

BoxDomain::BoxDomain(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size() || lo.size() == 0)
        throw ValidationError("BoxDomain: bounds must be non-empty and of equal size");
    for (Eigen::Index i = 0; i < lo.size(); ++i)
        if (!(lo(i) <= hi(i))) throw ValidationError("BoxDomain: lo must be <= hi");
}

Vec BoxDomain::sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec x(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) x(i) = lo(i) + (hi(i) - lo(i)) * u(rng);
    return x;
}

double almost_linearity_modulus(const VecFn& phi, const Mat& F, const BoxDomain& box,
                                int n_pairs, std::uint64_t seed) {
    if (n_pairs < 100)
        throw ValidationError("almost_linearity_modulus: need at least 100 pairs");
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    long usable = 0;
    for (int i = 0; i < n_pairs; ++i) {
        const Vec x1 = box.sample(rng);
        const Vec x2 = box.sample(rng);
        const double gap = (x1 - x2).norm();
        if (gap == 0.0) continue;
        ++usable;
        const double dev = (phi(x1) - phi(x2) - F * (x1 - x2)).norm();
        worst = std::max(worst, dev / gap);
    }
    if (usable == 0)
        throw ValidationError("almost_linearity_modulus: sampler yielded coincident points only");
    return worst;
}

double injectivity_constant(const VecFn& h, const BoxDomain& box, int n_pairs,
                            std::uint64_t seed) {
    if (n_pairs < 100) throw ValidationError("injectivity_constant: need at least 100 pairs");
    std::mt19937_64 rng(seed);
    double best = std::numeric_limits<double>::infinity();
    long usable = 0;
    for (int i = 0; i < n_pairs; ++i) {
        const Vec x1 = box.sample(rng);
        const Vec x2 = box.sample(rng);
        const double gap = (x1 - x2).norm();
        if (gap == 0.0) continue;
        ++usable;
        best = std::min(best, (h(x1) - h(x2)).norm() / gap);
    }
    if (usable == 0)
        throw ValidationError("injectivity_constant: sampler yielded coincident points only");
    return best;
}

std::vector<bool> check_kk_stable(const std::vector<Mat>& a_path, const std::vector<Mat>& k_mat,
                                  const std::vector<Mat>& k_dot, const std::vector<double>& k_fn,
                                  double tol) {
    const std::size_t n = a_path.size();
    if (k_mat.size() != n || k_dot.size() != n || k_fn.size() != n)
        throw ValidationError("check_kk_stable: paths must share one grid");
    std::vector<bool> ok(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Mat lhs = matkit::symmetrize(k_dot[i] - a_path[i] * k_mat[i] -
                                           k_mat[i] * a_path[i].transpose() - k_fn[i] * k_mat[i]);
        ok[i] = matkit::loewner_geq(lhs, Mat::Zero(lhs.rows(), lhs.cols()), tol);
    }
    return ok;
}

StabilityWitness exp_stability_fit(const std::vector<Mat>& a_path, double dt) {
    if (a_path.empty()) throw ValidationError("exp_stability_fit: empty path");
    if (!(dt > 0.0)) throw ValidationError("exp_stability_fit: dt must be > 0");
    const Eigen::Index n = a_path.front().rows();

    StabilityWitness w;
    std::vector<double> ts, log_norms;
    Mat zeta = Mat::Identity(n, n);
    ts.push_back(0.0);
    log_norms.push_back(std::log(zeta.norm()));
    for (std::size_t k = 0; k < a_path.size(); ++k) {
        zeta += dt * (a_path[k] * zeta);
        const double norm = zeta.norm();
        if (!std::isfinite(norm) || norm > 1e150) {
            w.overflowed = true;
            break;
        }
        ts.push_back(static_cast<double>(k + 1) * dt);
        log_norms.push_back(std::log(norm));
    }
    const LineFit fit = fit_line(ts, log_norms);
    w.c_hat = -fit.slope;
    w.c_big_hat = std::exp(fit.intercept);
    w.residual = fit.rms_residual;
    w.grid = std::move(ts);
    return w;
}

double c0_from_stability(const StabilityWitness& witness, double margin) {
    if (!(margin > 0.0 && margin < 1.0))
        throw ValidationError("c0_from_stability: margin must lie in (0, 1)");
    return witness.c_hat * (1.0 - margin);
}

MomentEstimate moment_norm(const std::vector<Vec>& samples, double q_order,
                           std::uint64_t bootstrap_seed, int n_boot) {
    if (samples.empty()) throw ValidationError("moment_norm: empty sample set");
    if (samples.size() < 2) throw ValidationError("moment_norm: need at least 2 samples");
    if (!(q_order >= 1.0)) throw ValidationError("moment_norm: q_order must be >= 1");

    const long n = static_cast<long>(samples.size());
    std::vector<double> powed(n);
    for (long i = 0; i < n; ++i) powed[i] = std::pow(samples[i].norm(), q_order);

    auto estimate = [&](auto&& value_at) {
        double acc = 0.0;
        for (long i = 0; i < n; ++i) acc += value_at(i);
        return std::pow(acc / static_cast<double>(n), 1.0 / q_order);
    };

    MomentEstimate out;
    out.q_order = q_order;
    out.n_samples = n;
    out.value = estimate([&](long i) { return powed[i]; });

    std::mt19937_64 rng(bootstrap_seed);
    std::uniform_int_distribution<long> pick(0, n - 1);
    double mean = 0.0, m2 = 0.0;
    for (int b = 0; b < n_boot; ++b) {
        const double v = estimate([&](long) { return powed[pick(rng)]; });
        const double delta = v - mean;
        mean += delta / static_cast<double>(b + 1);
        m2 += delta * (v - mean);
    }
    out.std_error = n_boot > 1 ? std::sqrt(m2 / static_cast<double>(n_boot - 1)) : 0.0;
    return out;
}

OrderFit order_fit(const std::vector<double>& eps_grid, const std::vector<double>& norms) {
    if (eps_grid.size() != norms.size())
        throw ValidationError("order_fit: grids must have equal size");
    if (eps_grid.size() < 3) throw ValidationError("order_fit: need at least 3 grid points");
    std::vector<double> xs, ys;
    xs.reserve(eps_grid.size());
    ys.reserve(norms.size());
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        if (!(eps_grid[i] > 0.0)) throw ValidationError("order_fit: eps must be positive");
        if (!(norms[i] > 0.0)) throw ValidationError("order_fit: non-positive norm");
        xs.push_back(std::log(eps_grid[i]));
        ys.push_back(std::log(norms[i]));
    }
    const LineFit fit = fit_line(xs, ys);
    return OrderFit{fit.slope, fit.intercept, fit.r2};
}

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw ValidationError("fit_line: need at least 2 points");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0) throw ValidationError("fit_line: degenerate abscissa");
    LineFit out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (out.slope * xs[i] + out.intercept);
        ss_res += r * r;
    }
    out.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    out.rms_residual = std::sqrt(ss_res / n);
    return out;
}

namespace {

Mat noise_intensity(const models::ModelCoefficients& model, double t, const Vec& y,
                    const Vec& z) {
    const Mat sig = model.sigma(t, y, z);
    const Mat g = model.g(t, y, z);
    const Mat ell = model.ell(t, y, z);
    const Mat llt = ell * ell.transpose();
    const Mat llt_inv = llt.llt().solve(Mat::Identity(llt.rows(), llt.cols()));
    const Mat proj =
        Mat::Identity(ell.cols(), ell.cols()) - ell.transpose() * llt_inv * ell;
    return matkit::symmetrize(sig * sig.transpose() + g * proj * g.transpose());
}

}  // namespace

AssumptionReport check_assumptions(const models::ModelCoefficients& model,
                                   const BoxDomain& y_box, const BoxDomain& z_box, const Mat& q0,
                                   int n_pairs, int n_z_samples, std::uint64_t seed,
                                   const AssumptionThresholds& thresholds) {
    if (n_z_samples < 1) throw ValidationError("check_assumptions: n_z_samples must be >= 1");
    AssumptionReport rep;
    rep.thresholds = thresholds;
    rep.n_pairs = n_pairs;
    rep.n_z_samples = n_z_samples;
    rep.seed = seed;
    rep.box_y_lo = y_box.lo;
    rep.box_y_hi = y_box.hi;
    rep.box_z_lo = z_box.lo;
    rep.box_z_hi = z_box.hi;

    const Vec y_center = y_box.center();
    std::mt19937_64 z_rng(sde::split_seed(seed, 0));

    rep.injectivity_c = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_z_samples; ++i) {
        const Vec z = z_box.sample(z_rng);
        const std::uint64_t pair_seed = sde::split_seed(seed, 100 + i);
        const Mat f_lin = model.grad_f(0.0, y_center, z);
        const Mat h_lin = model.grad_h(0.0, y_center, z);
        rep.mu_f = std::max(
            rep.mu_f, almost_linearity_modulus(
                          [&](const Vec& y) { return model.f(0.0, y, z); }, f_lin, y_box,
                          n_pairs, pair_seed));
        rep.mu_h = std::max(
            rep.mu_h, almost_linearity_modulus(
                          [&](const Vec& y) { return model.h(0.0, y, z); }, h_lin, y_box,
                          n_pairs, pair_seed));
        rep.injectivity_c = std::min(
            rep.injectivity_c,
            injectivity_constant([&](const Vec& y) { return model.h(0.0, y, z); }, y_box,
                                 n_pairs, pair_seed));
    }

    std::mt19937_64 pt_rng(sde::split_seed(seed, 1));
    rep.min_eig_a = std::numeric_limits<double>::infinity();
    rep.min_eig_llt_inv = std::numeric_limits<double>::infinity();
    bool all_finite = true;
    for (int i = 0; i < n_pairs; ++i) {
        const Vec y = y_box.sample(pt_rng);
        const Vec z = z_box.sample(pt_rng);
        if (!models::admissible(model, y, z)) {
            all_finite = false;
            continue;
        }
        const Mat sig = model.sigma(0.0, y, z);
        const Mat g = model.g(0.0, y, z);
        const Mat ell = model.ell(0.0, y, z);
        rep.coefficient_sup =
            std::max({rep.coefficient_sup, sig.norm(), g.norm(), ell.norm()});
        const Mat llt = ell * ell.transpose();
        const Mat llt_inv = llt.llt().solve(Mat::Identity(llt.rows(), llt.cols()));
        rep.min_eig_a = std::min(rep.min_eig_a, matkit::min_eig(noise_intensity(model, 0.0, y, z)));
        rep.min_eig_llt_inv = std::min(rep.min_eig_llt_inv, matkit::min_eig(matkit::symmetrize(llt_inv)));
    }

    rep.q0_eig_ratio = matkit::max_eig(q0) / matkit::min_eig(q0);

    rep.bounded = all_finite && std::isfinite(rep.coefficient_sup);
    rep.almost_linear = std::max(rep.mu_f, rep.mu_h) <= thresholds.almost_linear_max;
    rep.injective = rep.injectivity_c >= thresholds.injectivity_min;
    rep.elliptic = rep.min_eig_a >= thresholds.ellipticity_min &&
                   rep.min_eig_llt_inv >= thresholds.ellipticity_min;
    rep.q0_ratio_ok = rep.q0_eig_ratio <= thresholds.q0_ratio_max;
    return rep;
}

TraceMonitor trace_monitor(const ekf::FilterRun& run) {
    TraceMonitor mon;
    for (const auto& st : run.states) {
        const double p = st.q.mat().trace();
        const Mat q_inv = st.q.mat().llt().solve(Mat::Identity(st.q.dim(), st.q.dim()));
        const double pbar = q_inv.trace();
        mon.max_trace_q = std::max(mon.max_trace_q, p);
        mon.max_trace_q_inv = std::max(mon.max_trace_q_inv, pbar);
        mon.max_product = std::max(mon.max_product, p * pbar);
    }
    return mon;
}

}  // namespace smallnoise::diag
