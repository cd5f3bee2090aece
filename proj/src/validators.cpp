#include "bittide/validators.hpp"

#include <algorithm>

#include <Eigen/QR>

namespace bittide {

double cycle_conservation_residual(const Trace& trace, const Eigen::MatrixXi& cycles) {
  if (trace.size() == 0 || cycles.cols() == 0) return 0.0;
  const Eigen::MatrixXd u = cycles.cast<double>();
  const Eigen::VectorXd reference = u.transpose() * trace.beta_tilde.front();
  double worst = 0.0;
  for (const auto& beta : trace.beta_tilde)
    worst = std::max(worst, (u.transpose() * beta - reference).cwiseAbs().maxCoeff());
  return worst;
}

double range_residual(const Trace& trace, const Eigen::MatrixXd& B) {
  if (trace.size() == 0) return 0.0;
  const Eigen::MatrixXd bt = B.transpose();
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(bt);
  double worst = 0.0;
  for (const auto& beta : trace.beta_tilde) {
    const Eigen::VectorXd shifted = beta - trace.beta_tilde.front();
    const Eigen::VectorXd x = cod.solve(shifted);
    worst = std::max(worst, (bt * x - shifted).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace bittide
