#include "smallnoise/sde.hpp"

#include <cmath>
#include <random>

namespace smallnoise::sde {

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw ValidationError("SimConfig: dt must be > 0");
    if (!(t_end >= dt)) throw ValidationError("SimConfig: t_end must be >= dt");
    if (!(epsilon > 0.0 && epsilon <= 1.0))
        throw ValidationError("SimConfig: epsilon must be in (0, 1]");
}

long SimConfig::steps() const { return std::llround(t_end / dt); }

std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
    // splitmix64 finalizer on master advanced by the golden-gamma.
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Mat brownian_increments(std::uint64_t seed, long steps, int dim, double dt) {
    if (steps < 1 || dim < 1)
        throw ValidationError("brownian_increments: steps and dim must be >= 1");
    if (!(dt > 0.0)) throw ValidationError("brownian_increments: dt must be > 0");
    Mat out(steps, dim);
    const double sd = std::sqrt(dt);
    for (int j = 0; j < dim; ++j) {
        std::mt19937_64 rng(split_seed(seed, static_cast<std::uint64_t>(j)));
        std::normal_distribution<double> normal(0.0, sd);
        for (long k = 0; k < steps; ++k) out(k, j) = normal(rng);
    }
    return out;
}

Trajectory simulate_with_increments(const models::ModelCoefficients& model,
                                    const models::InitialCondition& ic, double epsilon,
                                    double dt, const Mat& w1, const Mat& w2) {
    if (!(dt > 0.0)) throw ValidationError("simulate: dt must be > 0");
    if (!(epsilon > 0.0)) throw ValidationError("simulate: epsilon must be > 0");
    if (ic.y0.size() != model.n || ic.z0.size() != model.d)
        throw ValidationError("simulate: initial condition dimension mismatch");
    if (w1.rows() != w2.rows() || w1.cols() != model.d1 || w2.cols() != model.d2)
        throw ValidationError("simulate: increment dimensions do not match the model");
    if (!models::admissible(model, ic.y0, ic.z0))
        throw NumericalError("simulate: initial condition inadmissible", 0);

    const long K = w1.rows();
    const double root_eps = std::sqrt(epsilon);

    Trajectory traj;
    traj.times.resize(K + 1);
    traj.y_path.resize(K + 1);
    traj.z_path.resize(K + 1);
    traj.w1_increments = w1;
    traj.w2_increments = w2;

    Vec y = ic.y0;
    Vec z = ic.z0;
    traj.times[0] = 0.0;
    traj.y_path[0] = y;
    traj.z_path[0] = z;

    for (long k = 0; k < K; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Vec dw1 = w1.row(k).transpose();
        const Vec dw2 = w2.row(k).transpose();

        Vec y_next = y + model.f(t, y, z) * dt + root_eps * (model.sigma(t, y, z) * dw1) +
                     root_eps * (model.g(t, y, z) * dw2);
        Vec z_next = z + model.h(t, y, z) * dt + root_eps * (model.ell(t, y, z) * dw2);

        if (!y_next.allFinite() || !z_next.allFinite())
            throw NumericalError("simulate: non-finite state", k + 1);
        if (!models::admissible(model, y_next, z_next))
            throw NumericalError("simulate: inadmissible state", k + 1);

        y = std::move(y_next);
        z = std::move(z_next);
        traj.times[k + 1] = static_cast<double>(k + 1) * dt;
        traj.y_path[k + 1] = y;
        traj.z_path[k + 1] = z;
    }
    return traj;
}

Trajectory simulate(const models::ModelCoefficients& model, const models::InitialCondition& ic,
                    const SimConfig& cfg) {
    cfg.validate();
    const long K = cfg.steps();
    const Mat w1 = brownian_increments(split_seed(cfg.seed, 1), K, model.d1, cfg.dt);
    const Mat w2 = brownian_increments(split_seed(cfg.seed, 2), K, model.d2, cfg.dt);
    return simulate_with_increments(model, ic, cfg.epsilon, cfg.dt, w1, w2);
}

}  // namespace smallnoise::sde
