#include "smallnoise/mc.hpp"

#include <omp.h>

namespace smallnoise::mc {

void set_threads(int n_threads) {
    if (n_threads > 0) omp_set_num_threads(n_threads);
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace smallnoise::mc
