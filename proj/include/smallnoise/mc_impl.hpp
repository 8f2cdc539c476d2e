#pragma once

#include "smallnoise/types.hpp"

#include <exception>

namespace smallnoise::mc {

namespace detail {

template <typename T>
PathOutcome<T> run_one(const PathWorker<T>& worker, long index) {
    PathOutcome<T> out;
    try {
        out.value = worker(index);
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

}  // namespace detail

template <typename T>
std::vector<PathOutcome<T>> run_batch_serial(long n_paths, const PathWorker<T>& worker) {
    if (n_paths < 0) throw ValidationError("run_batch: negative path count");
    std::vector<PathOutcome<T>> out(static_cast<std::size_t>(n_paths));
    for (long i = 0; i < n_paths; ++i) out[static_cast<std::size_t>(i)] = detail::run_one(worker, i);
    return out;
}

template <typename T>
std::vector<PathOutcome<T>> run_batch_parallel(long n_paths, const PathWorker<T>& worker) {
    if (n_paths < 0) throw ValidationError("run_batch: negative path count");
    std::vector<PathOutcome<T>> out(static_cast<std::size_t>(n_paths));
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n_paths; ++i) out[static_cast<std::size_t>(i)] = detail::run_one(worker, i);
    return out;
}

template <typename T>
std::vector<PathOutcome<T>> run_batch(long n_paths, const PathWorker<T>& worker,
                                      bool force_serial) {
    return force_serial ? run_batch_serial(n_paths, worker)
                        : run_batch_parallel(n_paths, worker);
}

}  // namespace smallnoise::mc
