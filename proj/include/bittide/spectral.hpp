#pragma once

#include <Eigen/Core>

#include "bittide/graph.hpp"

namespace bittide {

/// Directed Laplacian Q = D B^T: an irreducible rate matrix for a strongly
/// connected graph. Q(i, j) = 1 for every edge j -> i, Q(i, i) = -indegree(i).
struct Laplacian {
  Eigen::MatrixXd Q;
};

struct SpectralData {
  Eigen::VectorXd z;        // positive left null vector, sums to one
  Eigen::MatrixXd W;        // 1 z^T
  Eigen::MatrixXd Qdagger;  // group inverse: (Q + W)^{-1} - W
};

struct SteadyState {
  Eigen::VectorXd omega;  // every entry equals z^T omega_u
  Eigen::VectorXd beta;   // -k^{-1} B^T Q^dagger omega_u
};

Laplacian laplacian(const IncidenceSet& incidence);

/// Solves Q^T z = 0, 1^T z = 1 by replacing the last equation with the
/// normalisation. Throws SpectralError if the system is singular, the residual
/// is large, or a component is not strictly positive (reducible Q).
Eigen::VectorXd metzler_left_eigenvector(const Laplacian& q);

/// Throws SpectralError if Q + W is singular.
SpectralData projector_and_ginverse(const Laplacian& q, const Eigen::VectorXd& z);

/// Convenience: eigenvector, projector and generalized inverse in one call.
SpectralData spectral_data(const Laplacian& q);

/// Smallest decay rate of the non-zero modes: min over eigenvalues
/// lambda != 0 of -Re(lambda).
double spectral_gap(const Laplacian& q);

/// Time t at which e^{-gap t} sum_{j<n} (gap t)^j / j! < tol, with gap t >= 28.
/// Bounds the decay of e^{Qt} - W even when Q has Jordan blocks up to size n.
double projector_horizon(double gap, int n, double tol = 1e-14);

SteadyState steady_state(const SpectralData& spectral, const Eigen::MatrixXd& B, double k,
                         const Eigen::VectorXd& omega_u);

/// Dense matrix exponential e^{A}.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a);

/// Phase trajectory of the proportionally controlled system
///   theta(t) = (W t + k^{-1} Q^dagger (e^{kQt} - I)) omega_u + e^{kQt} theta(0).
Eigen::VectorXd closed_form_theta(const SpectralData& spectral, const Laplacian& q, double k,
                                  const Eigen::VectorXd& omega_u, const Eigen::VectorXd& theta0, double t);

}  // namespace bittide
