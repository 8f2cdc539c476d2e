#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace smallnoise {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Input or configuration violates a documented contract.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A computation failed at run time (NaN, lost positive definiteness,
/// inadmissible state, ...). Carries the step index where applicable.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what, long step = -1)
        : std::runtime_error(what), step_index(step) {}
    long step_index;
};

}  // namespace smallnoise
