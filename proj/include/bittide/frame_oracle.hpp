#pragma once

#include <vector>

#include <Eigen/Core>

#include "bittide/dynamics.hpp"

namespace bittide {

/// Frame-accurate state: continuous clock phases and integer buffer counts.
struct OracleState {
  double t = 0.0;
  Eigen::VectorXd phase;
  std::vector<long long> occupancy;
};

struct OracleOptions {
  double t_end = 100.0;
  double dt = 0.01;
  int sample_stride = 1;
  long long capacity = 32;
};

/// Default boot: every buffer at the midpoint of its capacity.
std::vector<long long> centered_occupancy(int edge_count, long long capacity = 32);

/// Tick-level simulation with zero latency. Each step advances the phases by
/// (omega_u + c) dt with c held from the start of the step; when node i
/// crosses an integer it removes one frame from every incoming buffer and
/// sends one on every outgoing link. The law observes integer occupancies
/// minus `beta_init`. Trace beta columns hold the raw integer counts.
/// Reaching 0 or the capacity emits an underflow/overflow event. Throws
/// ConfigError if dt * max(omega_u) >= 1 and NumericError if a node would
/// tick twice within one step.
Trace oracle_simulate(const ModelParams& params, ControlLaw& law, const std::vector<long long>& beta_init,
                      const OracleOptions& options);

/// max over samples and edges of |oracle - offset - fluid|.
/// Throws ConfigError if the sampling grids or dimensions differ.
double compare_fluid_oracle(const Trace& fluid, const Trace& oracle, double offset);

/// Replays a correction signal recorded by `simulate` (record_corrections on):
/// at time t it returns the average recorded correction over [t, t + dt].
class ReplayLaw final : public ControlLaw {
 public:
  ReplayLaw(std::vector<CorrectionSegment> segments, double dt);
  Eigen::VectorXd correction(const Observation& obs) const override;

 private:
  std::vector<CorrectionSegment> segments_;
  double dt_;
};

}  // namespace bittide
