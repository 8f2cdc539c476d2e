// Times the OpenMP path batch against the serial reference on a
// representative convergence workload and checks they agree bit-exactly.

#include "smallnoise/mc.hpp"
#include "smallnoise/studies.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>

using namespace smallnoise;

namespace {

studies::ConvergenceStudySpec workload(int n_paths, bool serial) {
    studies::ConvergenceStudySpec spec;
    spec.family = studies::linear_family(models::LinearCoeffs::scalar(-1.0, 1.0, 1.0, 0.5, 1.0),
                                         Vec::Zero(1), Vec::Zero(1));
    spec.family_label = "linear";
    spec.eps_grid = {1e-1, 1e-2, 1e-3};
    spec.n_paths = n_paths;
    spec.t_checkpoints = {1.0};
    spec.dt = 1e-3;
    spec.master_seed = 20240901;
    spec.q0 = Mat::Identity(1, 1);
    spec.force_serial = serial;
    return spec;
}

double run_once(int n_paths, bool serial, double* alpha_out) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = studies::run_convergence_study(workload(n_paths, serial));
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    *alpha_out = rep.fits.front().alpha_hat;
    return wall;
}

}  // namespace

int main(int argc, char** argv) {
    int n_paths = 200;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--paths") == 0 && i + 1 < argc) n_paths = std::atoi(argv[++i]);
    }

    std::printf("path batch benchmark: %d paths x 3 eps, dt=1e-3, t_end=1\n", n_paths);
    std::printf("threads available: %d\n", mc::max_threads());

    double alpha_serial = 0.0, alpha_parallel = 0.0;
    const double t_serial = run_once(n_paths, true, &alpha_serial);
    const double t_parallel = run_once(n_paths, false, &alpha_parallel);

    std::printf("serial reference : %8.3f s  (alpha_hat %.6f)\n", t_serial, alpha_serial);
    std::printf("openmp kernel    : %8.3f s  (alpha_hat %.6f)\n", t_parallel, alpha_parallel);
    std::printf("speedup          : %8.2fx\n", t_serial / t_parallel);

    if (alpha_serial != alpha_parallel) {
        std::printf("MISMATCH: serial and parallel results differ\n");
        return 1;
    }
    std::printf("serial and parallel results are identical\n");
    return 0;
}
