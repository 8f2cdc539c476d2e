#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace smallnoise::mc {

/// Outcome of one Monte Carlo path. Failed paths carry the reason and
/// are excluded from statistics by the caller, never silently trimmed.
template <typename T>
struct PathOutcome {
    bool ok = false;
    T value{};
    std::string error;
};

template <typename T>
using PathWorker = std::function<T(long path_index)>;

/// Serial reference implementation of a path batch. Kept alongside the
/// OpenMP kernel so the two can be compared bit-for-bit in tests.
template <typename T>
std::vector<PathOutcome<T>> run_batch_serial(long n_paths, const PathWorker<T>& worker);

/// OpenMP path batch. Each path derives its own seed from the path
/// index (inside `worker`), so results are index-addressed and agree
/// bit-exactly with the serial reference regardless of thread count.
template <typename T>
std::vector<PathOutcome<T>> run_batch_parallel(long n_paths, const PathWorker<T>& worker);

/// Dispatches to the parallel kernel; `force_serial` selects the
/// reference implementation.
template <typename T>
std::vector<PathOutcome<T>> run_batch(long n_paths, const PathWorker<T>& worker,
                                      bool force_serial = false);

void set_threads(int n_threads);  // 0 keeps the OpenMP default
int max_threads();

}  // namespace smallnoise::mc

#include "smallnoise/mc_impl.hpp"
