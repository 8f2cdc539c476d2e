#pragma once

#include "smallnoise/models.hpp"
#include "smallnoise/types.hpp"

#include <cstdint>
#include <vector>

namespace smallnoise::sde {

struct SimConfig {
    double epsilon = 1.0;  // noise scale in (0, 1]
    double dt = 1e-3;
    double t_end = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    /// Number of Euler steps; the effective horizon is steps()*dt.
    long steps() const;
};

/// One realization of the coupled signal-observation system on a
/// uniform grid. Brownian increments are retained so that a filter
/// consumes exactly the observation noise the signal produced.
struct Trajectory {
    std::vector<double> times;  // size K+1
    std::vector<Vec> y_path;    // size K+1
    std::vector<Vec> z_path;    // size K+1
    Mat w1_increments;          // K x d1
    Mat w2_increments;          // K x d2

    long steps() const { return static_cast<long>(times.size()) - 1; }
    double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
};

/// splitmix64-based stream splitting: derives a child seed from a
/// master seed and an index. Used for per-path seeds
/// (hash(master_seed, path_index)) and for substreams within a path.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t index);

/// K x dim matrix of i.i.d. Normal(0, dt) increments. Column j is
/// drawn from its own substream split_seed(seed, j), so streams for
/// different dimensions (and for W1 vs W2, which use distinct seeds)
/// are independent by construction.
Mat brownian_increments(std::uint64_t seed, long steps, int dim, double dt);

/// Euler-Maruyama simulation of
///   Y_{k+1} = Y_k + f dt + sqrt(eps) sigma dW1 + sqrt(eps) g dW2
///   Z_{k+1} = Z_k + h dt + sqrt(eps) ell dW2.
/// Throws NumericalError (with step index) if an inadmissible or
/// non-finite state is reached; the step is never clamped or reflected.
Trajectory simulate(const models::ModelCoefficients& model, const models::InitialCondition& ic,
                    const SimConfig& cfg);

/// Same scheme driven by caller-supplied increments (rows = steps).
/// Used for zero-noise runs and for refining a fixed Brownian path.
Trajectory simulate_with_increments(const models::ModelCoefficients& model,
                                    const models::InitialCondition& ic, double epsilon,
                                    double dt, const Mat& w1, const Mat& w2);

}  // namespace smallnoise::sde
