#include "bittide/controller.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bittide {

namespace {

double time_slack(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }

}  // namespace

void RotationConfig::validate(std::size_t pulses, std::optional<double> buffer_capacity) const {
  if (!(k > 0.0)) throw ConfigError("k must be positive");
  if (!(k2 > 0.0)) throw ConfigError("k2 must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(convergence_tol > 0.0)) throw ConfigError("convergence tolerance must be positive");
  if (!(convergence_window > 0.0)) throw ConfigError("convergence window must be positive");
  if (margin < 0.0) throw ConfigError("margin must be nonnegative");
  if (hold_duration < 0.0) throw ConfigError("hold duration must be nonnegative");
  if (policy != PhasePolicy::Fixed) return;
  if (phase_times.size() != pulses + 1)
    throw ConfigError("fixed policy needs " + std::to_string(pulses + 1) + " phase times, got " +
                      std::to_string(phase_times.size()));
  if (!(phase_times.front() > 0.0)) throw ConfigError("first phase time must be positive");
  if (!buffer_capacity) throw ConfigError("fixed policy needs a buffer capacity to bound pulse lengths");
  const double longest = pulse_duration(*buffer_capacity / 2.0, k2) + margin;
  for (std::size_t j = 0; j + 1 < phase_times.size(); ++j) {
    const double gap = phase_times[j + 1] - phase_times[j];
    if (!(gap > 0.0)) throw ConfigError("phase times must be strictly increasing");
    if (gap < longest) {
      std::ostringstream msg;
      msg << "phase interval " << (j + 1) << " is " << gap << ", shorter than the worst-case pulse " << longest;
      throw ConfigError(msg.str());
    }
  }
}

std::vector<PulseTarget> pulse_targets(const SpanningTree& tree, const EdgeSchedule& schedule) {
  std::vector<PulseTarget> targets;
  for (EdgeId g : schedule.ordering) {
    const NodeId node = tree.head(g);
    if (node == tree.root) throw ScheduleError("the root cannot be a pulse target");
    targets.push_back({g, node});
  }
  return targets;
}

double dead_zone_sign(double x, double epsilon) {
  if (std::abs(x) <= epsilon) return 0.0;
  return x > 0.0 ? 1.0 : -1.0;
}

Eigen::VectorXd proportional_control(const Eigen::VectorXd& y, double k) { return k * y; }

Eigen::VectorXd frame_rotation_control(double t, const ControllerState& state, const Eigen::VectorXd& beta_tilde,
                                       const Eigen::VectorXd& y, const RotationConfig& config) {
  (void)t;
  if (state.phase == PhaseKind::Proportional) return proportional_control(y, config.k);
  if (!state.frozen_y) throw ScheduleError("frozen measurement missing after the proportional phase");
  Eigen::VectorXd c = config.k * *state.frozen_y;
  if (state.phase == PhaseKind::Pulse) {
    const PulseTarget& target = state.targets.at(state.pulse_index);
    if (target.node == state.root && !state.allow_root_pulse)
      throw ScheduleError("the root node cannot pulse");
    const double s = dead_zone_sign(beta_tilde(target.edge - 1), config.epsilon);
    c(target.node - 1) += (config.invert_pulse ? -1.0 : 1.0) * config.k2 * s;
  }
  return c;
}

double pulse_duration(double beta_g, double k2) {
  if (!(k2 > 0.0)) throw ConfigError("k2 must be positive");
  return std::abs(beta_g) / k2;
}

Eigen::MatrixXd single_pulse_map(const IncidenceSet& incidence, EdgeId g) {
  const Eigen::Index m = incidence.edge_count();
  if (g < 1 || g > m) throw ConfigError("edge " + std::to_string(g) + " out of range");
  Eigen::MatrixXd map = Eigen::MatrixXd::Identity(m, m);
  // B^T D E^g only has column g, equal to B^T D e_g = B^T e_dst(g)
  map.col(g - 1) += incidence.B.transpose() * incidence.D.col(g - 1);
  return map;
}

FrameRotationLaw::FrameRotationLaw(const IncidenceSet& incidence, const Eigen::VectorXd& omega_u,
                                   ControllerState state, RotationConfig config)
    : incidence_(incidence), omega_u_(omega_u), state_(std::move(state)), config_(std::move(config)) {
  centered_.assign(static_cast<std::size_t>(incidence.edge_count()), false);
}

std::string FrameRotationLaw::phase_name() const {
  switch (state_.phase) {
    case PhaseKind::Proportional:
      return "proportional";
    case PhaseKind::Pulse:
      return "pulse " + std::to_string(state_.pulse_index + 1);
    case PhaseKind::Hold:
      return "hold";
  }
  return "unknown";
}

void FrameRotationLaw::sample(const Observation& obs, std::vector<TraceEvent>& events) {
  const double t = obs.t;
  const double slack = time_slack(t);
  switch (state_.phase) {
    case PhaseKind::Proportional: {
      Eigen::VectorXd c = proportional_control(obs.y, config_.k);
      while (history_.size() > 1 && history_[1].first <= t - config_.convergence_window + slack) history_.pop_front();
      bool stationary = false;
      if (!history_.empty() && history_.front().first <= t - config_.convergence_window + slack)
        stationary = (c - history_.front().second).cwiseAbs().maxCoeff() < config_.convergence_tol;
      history_.emplace_back(t, std::move(c));
      if (config_.policy == PhasePolicy::Fixed) {
        if (t >= config_.phase_times.front() - slack) freeze(obs, stationary, events);
      } else if (stationary) {
        freeze(obs, true, events);
      }
      break;
    }
    case PhaseKind::Pulse: {
      const PulseTarget& target = state_.targets[state_.pulse_index];
      const double beta_g = obs.beta_tilde(target.edge - 1);
      // Keep pushing until beta_g reaches zero; the dead zone only applies afterwards.
      if (pulse_sign_ != 0.0 && (beta_g == 0.0 || (beta_g > 0.0) != (pulse_sign_ > 0.0))) pulse_sign_ = 0.0;
      if (pulse_sign_ == 0.0) pulse_sign_ = dead_zone_sign(beta_g, config_.epsilon);
      if (config_.policy == PhasePolicy::Fixed) {
        if (t >= config_.phase_times[state_.pulse_index + 1] - slack) end_pulse(obs, events);
        break;
      }
      if (std::abs(beta_g) <= config_.epsilon) {
        if (!centered_since_) centered_since_ = t;
        if (t - *centered_since_ >= config_.margin - slack) end_pulse(obs, events);
      } else {
        centered_since_.reset();
        if (t - pulse_start_ > pulse_budget_) {
          std::ostringstream msg;
          msg << "pulse " << (state_.pulse_index + 1) << " on edge " << target.edge << " exceeded its budget of "
              << pulse_budget_ << " (|beta| = " << std::abs(beta_g) << ")";
          throw CenteringError(msg.str(), phase_name(), {});
        }
      }
      break;
    }
    case PhaseKind::Hold:
      if (t - hold_start_ >= config_.hold_duration - slack) finished_ = true;
      break;
  }
}

void FrameRotationLaw::freeze(const Observation& obs, bool converged, std::vector<TraceEvent>& events) {
  state_.frozen_y = obs.y;
  report_.t1 = obs.t;
  report_.frozen_y = obs.y;
  report_.proportional_converged = converged;
  history_.clear();
  for (Eigen::Index e = 0; e < obs.beta_tilde.size(); ++e)
    centered_[static_cast<std::size_t>(e)] = std::abs(obs.beta_tilde(e)) <= config_.epsilon;
  events.push_back({obs.t, converged ? "proportional phase converged" : "proportional phase ended"});
  state_.pulse_index = 0;
  if (state_.targets.empty()) {
    state_.phase = PhaseKind::Hold;
    hold_start_ = obs.t;
    report_.final_beta = obs.beta_tilde;
    report_.max_final_beta = obs.beta_tilde.size() ? obs.beta_tilde.cwiseAbs().maxCoeff() : 0.0;
    report_.converged = report_.max_final_beta <= config_.final_factor * config_.epsilon;
    events.push_back({obs.t, "hold"});
    return;
  }
  state_.phase = PhaseKind::Pulse;
  start_pulse(obs, events);
}

void FrameRotationLaw::start_pulse(const Observation& obs, std::vector<TraceEvent>& events) {
  const PulseTarget& target = state_.targets[state_.pulse_index];
  if (target.node == state_.root && !state_.allow_root_pulse) throw ScheduleError("the root node cannot pulse");
  pulse_start_ = obs.t;
  centered_since_.reset();
  const double beta_g = obs.beta_tilde(target.edge - 1);
  pulse_sign_ = dead_zone_sign(beta_g, config_.epsilon);
  const double needed = pulse_duration(beta_g, config_.k2);
  pulse_budget_ = 1.5 * needed + config_.margin + 1.0;
  if (config_.policy == PhasePolicy::Fixed) {
    const double window =
        config_.phase_times[state_.pulse_index + 1] - config_.phase_times[state_.pulse_index];
    if (needed + config_.margin > window) {
      std::ostringstream msg;
      msg << "pulse " << (state_.pulse_index + 1) << " needs " << needed << " but its interval is " << window;
      throw CenteringError(msg.str(), phase_name(), {});
    }
  }

  PhaseRecord rec;
  rec.index = state_.pulse_index;
  rec.edge = target.edge;
  rec.node = target.node;
  rec.t_start = obs.t;
  rec.beta_before = obs.beta_tilde;
  report_.phases.push_back(std::move(rec));

  std::ostringstream label;
  label << "pulse " << (state_.pulse_index + 1) << ": node " << target.node << " centers edge " << target.edge;
  events.push_back({obs.t, label.str()});
}

void FrameRotationLaw::end_pulse(const Observation& obs, std::vector<TraceEvent>& events) {
  PhaseRecord& rec = report_.phases.back();
  rec.t_end = obs.t;
  rec.beta_after = obs.beta_tilde;
  rec.predicted_after = single_pulse_map(incidence_, rec.edge) * rec.beta_before;
  rec.map_error = (rec.beta_after - rec.predicted_after).cwiseAbs().maxCoeff();
  rec.omega_after = omega_u_ + frame_rotation_control(obs.t, state_, obs.beta_tilde, obs.y, config_);
  for (Eigen::Index e = 0; e < obs.beta_tilde.size(); ++e) {
    const bool now = std::abs(obs.beta_tilde(e)) <= config_.epsilon;
    if (centered_[static_cast<std::size_t>(e)] && !now) rec.decentered.push_back(static_cast<EdgeId>(e + 1));
    centered_[static_cast<std::size_t>(e)] = now;
  }

  ++state_.pulse_index;
  if (state_.pulse_index < state_.targets.size()) {
    start_pulse(obs, events);
    return;
  }
  state_.phase = PhaseKind::Hold;
  hold_start_ = obs.t;
  report_.final_beta = obs.beta_tilde;
  report_.max_final_beta = obs.beta_tilde.cwiseAbs().maxCoeff();
  report_.converged = report_.max_final_beta <= config_.final_factor * config_.epsilon;
  events.push_back({obs.t, "hold"});
}

Eigen::VectorXd FrameRotationLaw::correction(const Observation& obs) const {
  if (state_.phase == PhaseKind::Pulse) {
    const PulseTarget& target = state_.targets[state_.pulse_index];
    Eigen::VectorXd c = config_.k * *state_.frozen_y;
    c(target.node - 1) += (config_.invert_pulse ? -1.0 : 1.0) * config_.k2 * pulse_sign_;
    return c;
  }
  return frame_rotation_control(obs.t, state_, obs.beta_tilde, obs.y, config_);
}

std::optional<double> FrameRotationLaw::switching_value(const Observation& obs) const {
  if (state_.phase != PhaseKind::Pulse || pulse_sign_ == 0.0) return std::nullopt;
  return obs.beta_tilde(state_.targets[state_.pulse_index].edge - 1);
}

namespace {

CenteringResult run_pipeline(const ModelParams& params, ControllerState state, const RotationConfig& config,
                             const SimulationOptions& options) {
  params.validate();
  config.validate(state.targets.size(), params.buffer_capacity);
  FrameRotationLaw law(params.incidence, params.omega_u, std::move(state), config);
  Trace trace;
  try {
    simulate_into(trace, params, law, options);
  } catch (const CenteringError& e) {
    throw CenteringError(e.what(), law.phase_name(), std::move(trace));
  } catch (const NumericError& e) {
    throw CenteringError(e.what(), law.phase_name(), std::move(trace));
  }
  if (law.state().phase != PhaseKind::Hold) {
    const std::string phase = law.phase_name();
    if (law.state().phase == PhaseKind::Proportional)
      throw CenteringError("proportional phase did not converge within the time budget", phase, std::move(trace));
    throw CenteringError("time budget exhausted during " + phase, phase, std::move(trace));
  }
  return CenteringResult{std::move(trace), law.report()};
}

}  // namespace

CenteringResult run_centering(const DirectedGraph& graph, const SpanningTree& tree, const EdgeSchedule& schedule,
                              const ModelParams& params, const RotationConfig& config,
                              const SimulationOptions& options) {
  if (!is_strongly_connected(graph)) throw TopologyError("graph is not strongly connected");
  if (!validate_ordering(tree, schedule)) throw ScheduleError("schedule is inconsistent with the tree order");
  ControllerState state;
  state.root = tree.root;
  state.targets = pulse_targets(tree, schedule);
  return run_pipeline(params, std::move(state), config, options);
}

CenteringResult run_unordered_centering(const DirectedGraph& graph, const std::vector<EdgeId>& edges,
                                        const ModelParams& params, const RotationConfig& config,
                                        const SimulationOptions& options) {
  if (!is_strongly_connected(graph)) throw TopologyError("graph is not strongly connected");
  ControllerState state;
  state.allow_root_pulse = true;
  for (EdgeId e : edges) {
    if (e < 1 || e > graph.edge_count()) throw ConfigError("edge " + std::to_string(e) + " out of range");
    state.targets.push_back({e, graph.edge(e).dst});
  }
  return run_pipeline(params, std::move(state), config, options);
}

}  // namespace bittide
