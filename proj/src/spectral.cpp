#include "bittide/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

#include "bittide/errors.hpp"

namespace bittide {

Laplacian laplacian(const IncidenceSet& incidence) {
  return Laplacian{incidence.D * incidence.B.transpose()};
}

Eigen::VectorXd metzler_left_eigenvector(const Laplacian& q) {
  const Eigen::Index n = q.Q.rows();
  Eigen::MatrixXd a = q.Q.transpose();
  a.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw SpectralError("Laplacian has a repeated zero eigenvalue (reducible graph)");
  Eigen::VectorXd z = lu.solve(rhs);
  z /= z.sum();
  const double residual = (z.transpose() * q.Q).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, q.Q.cwiseAbs().maxCoeff());
  if (!(residual <= 1e-10 * scale))
    throw SpectralError("stationary vector residual " + std::to_string(residual) + " too large");
  const double floor = 1e-14;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(z(i) > floor))
      throw SpectralError("stationary vector component " + std::to_string(i + 1) +
                          " is not positive (reducible graph)");
  }
  return z;
}

SpectralData projector_and_ginverse(const Laplacian& q, const Eigen::VectorXd& z) {
  const Eigen::Index n = q.Q.rows();
  SpectralData s;
  s.z = z;
  s.W = Eigen::VectorXd::Ones(n) * z.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(q.Q + s.W);
  if (!lu.isInvertible()) throw SpectralError("Q + W is singular");
  s.Qdagger = lu.inverse() - s.W;
  return s;
}

SpectralData spectral_data(const Laplacian& q) {
  return projector_and_ginverse(q, metzler_left_eigenvector(q));
}

double projector_horizon(double gap, int n, double tol) {
  if (!(gap > 0.0)) throw SpectralError("horizon needs a positive spectral gap");
  auto tail = [n](double x) {
    double term = std::exp(-x), sum = term;
    for (int j = 1; j < n; ++j) sum += (term *= x / j);
    return sum;
  };
  double x = 28.0;
  while (tail(x) >= tol) x += 1.0;
  return x / gap;
}

double spectral_gap(const Laplacian& q) {
  const Eigen::Index n = q.Q.rows();
  if (n < 2) return std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Eigen::MatrixXd> solver(q.Q, false);
  if (solver.info() != Eigen::Success) throw SpectralError("eigenvalue computation failed");
  const Eigen::VectorXcd ev = solver.eigenvalues();
  // drop the eigenvalue closest to zero; the rest have negative real part
  Eigen::Index zero = 0;
  for (Eigen::Index i = 1; i < n; ++i) {
    if (std::abs(ev(i)) < std::abs(ev(zero))) zero = i;
  }
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i != zero) gap = std::min(gap, -ev(i).real());
  }
  if (!(gap > 0.0)) throw SpectralError("Laplacian has a non-decaying mode (reducible graph)");
  return gap;
}

SteadyState steady_state(const SpectralData& spectral, const Eigen::MatrixXd& B, double k,
                         const Eigen::VectorXd& omega_u) {
  if (!(k > 0.0)) throw ConfigError("proportional gain must be positive");
  SteadyState ss;
  ss.omega = spectral.W * omega_u;
  ss.beta = -(B.transpose() * (spectral.Qdagger * omega_u)) / k;
  return ss;
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a) {
  return a.exp();
}

Eigen::VectorXd closed_form_theta(const SpectralData& spectral, const Laplacian& q, double k,
                                  const Eigen::VectorXd& omega_u, const Eigen::VectorXd& theta0, double t) {
  if (!(k > 0.0)) throw ConfigError("proportional gain must be positive");
  if (t < 0.0) throw ConfigError("time must be nonnegative");
  if (t == 0.0) return theta0;
  const Eigen::Index n = q.Q.rows();
  const Eigen::MatrixXd expm = matrix_exponential(k * t * q.Q);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  return (spectral.W * t + spectral.Qdagger * (expm - eye) / k) * omega_u + expm * theta0;
}

}  // namespace bittide
