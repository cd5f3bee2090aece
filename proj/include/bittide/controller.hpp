#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bittide/dynamics.hpp"
#include "bittide/errors.hpp"
#include "bittide/graph.hpp"

namespace bittide {

enum class PhasePolicy {
  Adaptive,  // advance once the active edge sits in the dead zone for `margin`
  Fixed,     // advance at the configured phase times
};

struct RotationConfig {
  double k = 2e-3;
  double k2 = 5e-2;
  double epsilon = 1e-3;
  double convergence_tol = 1e-9;
  double convergence_window = 1.0;
  PhasePolicy policy = PhasePolicy::Adaptive;
  /// Fixed policy: t_1 < t_2 < ... < t_{p+1} for p pulses.
  std::vector<double> phase_times;
  double margin = 0.1;
  /// Time spent in Hold before the run stops.
  double hold_duration = 0.0;
  /// Final state is accepted when every |beta| <= final_factor * epsilon.
  double final_factor = 5.0;
  /// Test hook: flips the pulse direction.
  bool invert_pulse = false;

  /// Throws ConfigError. For the fixed policy `pulses` intervals are checked
  /// against the worst-case pulse length (capacity / 2) / k2 + margin.
  void validate(std::size_t pulses, std::optional<double> buffer_capacity) const;
};

/// Node `node` drives the occupancy of `edge` (whose destination it is).
struct PulseTarget {
  EdgeId edge = 0;
  NodeId node = 0;
};

/// Pulse targets for a tree schedule. Throws ScheduleError if a target is the root.
std::vector<PulseTarget> pulse_targets(const SpanningTree& tree, const EdgeSchedule& schedule);

enum class PhaseKind { Proportional, Pulse, Hold };

struct ControllerState {
  PhaseKind phase = PhaseKind::Proportional;
  std::size_t pulse_index = 0;  // 0-based index into targets while phase == Pulse
  std::optional<Eigen::VectorXd> frozen_y;
  std::vector<PulseTarget> targets;
  NodeId root = 0;
  bool allow_root_pulse = false;
};

/// Sign with a dead zone: 0 when |x| <= epsilon.
double dead_zone_sign(double x, double epsilon);

Eigen::VectorXd proportional_control(const Eigen::VectorXd& y, double k);

/// Pure evaluation of the frame-rotation law for a given phase.
/// Proportional: k y. Pulse(j): k y(t1) plus k2 sign_eps(beta_g) at dst(g).
/// Hold: k y(t1). Throws ScheduleError if the pulsing node is the root.
Eigen::VectorXd frame_rotation_control(double t, const ControllerState& state, const Eigen::VectorXd& beta_tilde,
                                       const Eigen::VectorXd& y, const RotationConfig& config);

/// Time for a pulse of strength k2 to drain |beta_g|.
double pulse_duration(double beta_g, double k2);

/// I + B^T D E^g: the effect of one completed pulse on edge g.
Eigen::MatrixXd single_pulse_map(const IncidenceSet& incidence, EdgeId g);

struct PhaseRecord {
  std::size_t index = 0;
  EdgeId edge = 0;
  NodeId node = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  Eigen::VectorXd beta_before;
  Eigen::VectorXd beta_after;
  Eigen::VectorXd predicted_after;  // single_pulse_map * beta_before
  Eigen::VectorXd omega_after;      // frequencies just before the next phase starts
  double map_error = 0.0;           // max |beta_after - predicted_after|
  std::vector<EdgeId> decentered;   // edges centered at an earlier boundary, no longer centered
};

struct CenteringReport {
  std::vector<PhaseRecord> phases;
  double t1 = 0.0;
  Eigen::VectorXd frozen_y;
  Eigen::VectorXd final_beta;
  double max_final_beta = 0.0;
  /// The stationarity test was met at t1 (false if a fixed t1 arrived first).
  bool proportional_converged = false;
  /// All pulses completed and max_final_beta <= final_factor * epsilon.
  bool converged = false;
};

/// Stateful frame-rotation controller driven by the integrator.
class FrameRotationLaw final : public ControlLaw {
 public:
  FrameRotationLaw(const IncidenceSet& incidence, const Eigen::VectorXd& omega_u, ControllerState state,
                   RotationConfig config);

  void sample(const Observation& obs, std::vector<TraceEvent>& events) override;
  Eigen::VectorXd correction(const Observation& obs) const override;
  std::optional<double> switching_value(const Observation& obs) const override;
  bool finished() const override { return finished_; }

  const ControllerState& state() const { return state_; }
  const CenteringReport& report() const { return report_; }
  /// Human-readable name of the current phase, for error messages.
  std::string phase_name() const;

 private:
  void freeze(const Observation& obs, bool converged, std::vector<TraceEvent>& events);
  void start_pulse(const Observation& obs, std::vector<TraceEvent>& events);
  void end_pulse(const Observation& obs, std::vector<TraceEvent>& events);

  IncidenceSet incidence_;
  Eigen::VectorXd omega_u_;
  ControllerState state_;
  RotationConfig config_;
  CenteringReport report_;
  std::deque<std::pair<double, Eigen::VectorXd>> history_;
  double pulse_sign_ = 0.0;  // latched at step starts; cleared when beta_g crosses zero
  double pulse_start_ = 0.0;
  double pulse_budget_ = 0.0;
  std::optional<double> centered_since_;
  double hold_start_ = 0.0;
  bool finished_ = false;
  std::vector<bool> centered_;
};

/// Raised when a centering run cannot finish; carries the partial trace.
class CenteringError : public Error {
 public:
  CenteringError(const std::string& what, std::string phase, Trace partial)
      : Error(what), phase_(std::move(phase)), partial_(std::move(partial)) {}
  const std::string& phase() const { return phase_; }
  const Trace& partial_trace() const { return partial_; }

 private:
  std::string phase_;
  Trace partial_;
};

struct CenteringResult {
  Trace trace;
  CenteringReport report;
};

/// Proportional phase until converged, one pulse per scheduled tree edge, then Hold.
/// `options.t_end` is the overall time budget. Throws ScheduleError for a
/// schedule inconsistent with the tree, CenteringError when the run cannot finish.
CenteringResult run_centering(const DirectedGraph& graph, const SpanningTree& tree, const EdgeSchedule& schedule,
                              const ModelParams& params, const RotationConfig& config,
                              const SimulationOptions& options);

/// Same pipeline with arbitrary pulse targets: any edge, any order, root allowed.
/// Used to show what goes wrong without the tree ordering.
CenteringResult run_unordered_centering(const DirectedGraph& graph, const std::vector<EdgeId>& edges,
                                        const ModelParams& params, const RotationConfig& config,
                                        const SimulationOptions& options);

}  // namespace bittide
