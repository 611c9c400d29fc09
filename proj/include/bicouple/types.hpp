#pragma once

#include <Eigen/Dense>

namespace bicouple {

/// Dense Eigen aliases shared by every module.
template <typename Scalar>
struct Types {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
};

using Vector = Types<double>::Vector;
using Matrix = Types<double>::Matrix;

} // namespace bicouple
