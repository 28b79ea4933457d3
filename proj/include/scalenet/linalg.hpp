#pragma once

#include <Eigen/Dense>

namespace scalenet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace scalenet
