#pragma once

#include <Eigen/Dense>

namespace hpl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Bounded-capacity vectors keep rollouts off the heap.
using State = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 8, 1>;
using Input = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;

}  // namespace hpl
