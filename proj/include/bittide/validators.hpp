#pragma once

#include <Eigen/Core>

#include "bittide/dynamics.hpp"

namespace bittide {

/// max over samples and cycle-basis columns u of |u^T (beta(t) - beta(0))|.
/// Zero in exact arithmetic for fluid traces and exactly zero for oracle traces.
double cycle_conservation_residual(const Trace& trace, const Eigen::MatrixXi& cycles);

/// max over samples of the least-squares residual of beta(t) - beta(0) against
/// range(B^T). Fluid traces start at beta = 0; oracle traces carry the offset.
double range_residual(const Trace& trace, const Eigen::MatrixXd& B);

}  // namespace bittide
