#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bittide/graph.hpp"

namespace bittide {

struct ModelParams {
  Eigen::VectorXd omega_u;  // uncontrolled frequencies, frames per unit time
  IncidenceSet incidence;
  std::optional<double> buffer_capacity;  // frames; only used for warnings

  /// Throws ConfigError on non-positive frequencies or mismatched sizes.
  void validate() const;
};

/// Normalized phase at time t; theta_tilde(0) = 0 is the feasible boot.
struct SystemState {
  double t = 0.0;
  Eigen::VectorXd theta_tilde;
};

/// What a control law sees at one instant.
struct Observation {
  double t;
  const Eigen::VectorXd& theta;
  const Eigen::VectorXd& beta_tilde;
  const Eigen::VectorXd& y;
};

struct TraceEvent {
  double t = 0.0;
  std::string label;
};

/// Average correction applied over one integration sub-step.
struct CorrectionSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  Eigen::VectorXd c;
};

struct Trace {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> theta_tilde;
  std::vector<Eigen::VectorXd> omega;
  std::vector<Eigen::VectorXd> beta_tilde;
  std::vector<TraceEvent> events;
  std::vector<CorrectionSegment> corrections;  // filled only on request

  std::size_t size() const { return times.size(); }
};

/// Frequency-correction law c(t).
///
/// The integrator calls `sample` once at the start of every step (and after
/// every located switching event) with the current observation; that is where
/// a law latches discrete decisions and advances its phase. `correction` is
/// then evaluated at every Runge-Kutta stage and must not change state.
class ControlLaw {
 public:
  virtual ~ControlLaw() = default;

  virtual void sample(const Observation& obs, std::vector<TraceEvent>& events) {
    (void)obs;
    (void)events;
  }
  virtual Eigen::VectorXd correction(const Observation& obs) const = 0;
  /// Scalar whose zero crossing ends the current latched mode, if any.
  virtual std::optional<double> switching_value(const Observation& obs) const {
    (void)obs;
    return std::nullopt;
  }
  virtual bool finished() const { return false; }
};

class NoControl final : public ControlLaw {
 public:
  Eigen::VectorXd correction(const Observation& obs) const override;
};

/// c = k y.
class ProportionalLaw final : public ControlLaw {
 public:
  explicit ProportionalLaw(double k);
  Eigen::VectorXd correction(const Observation& obs) const override;

 private:
  double k_;
};

/// beta = B^T theta.
Eigen::VectorXd buffer_occupancy(const Eigen::VectorXd& theta_tilde, const Eigen::MatrixXd& B);

/// y = D beta.
Eigen::VectorXd measurement(const Eigen::VectorXd& beta_tilde, const Eigen::MatrixXd& D);

struct SimulationOptions {
  double t_end = 100.0;
  double dt = 0.01;
  int sample_stride = 1;
  bool record_corrections = false;
};

/// Integrates d(theta)/dt = omega_u + c(t) from theta(0) = 0 with fixed-step RK4.
/// Zero crossings of the law's switching value are located inside a step and
/// the step is split there. Samples land on the dt grid every `sample_stride`
/// steps; the final state is always recorded. Stops early once the law
/// reports `finished`. Throws NumericError on a non-finite state; `trace`
/// keeps whatever was recorded before the failure.
void simulate_into(Trace& trace, const ModelParams& params, ControlLaw& law, const SimulationOptions& options);

Trace simulate(const ModelParams& params, ControlLaw& law, const SimulationOptions& options);

/// Edge endpoints as 0-based index arrays, for allocation-free B^T x and D x.
struct EdgeIndex {
  std::vector<int> src;
  std::vector<int> dst;
  int node_count = 0;

  explicit EdgeIndex(const IncidenceSet& incidence);
  void beta(const Eigen::VectorXd& theta, Eigen::VectorXd& out) const;
  void y(const Eigen::VectorXd& beta, Eigen::VectorXd& out) const;
};

}  // namespace bittide
