#pragma once

#include <Eigen/Dense>

namespace diffadjoint {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace diffadjoint
