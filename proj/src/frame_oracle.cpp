#include "bittide/frame_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bittide/errors.hpp"

namespace bittide {

std::vector<long long> centered_occupancy(int edge_count, long long capacity) {
  return std::vector<long long>(static_cast<std::size_t>(edge_count), capacity / 2);
}

Trace oracle_simulate(const ModelParams& params, ControlLaw& law, const std::vector<long long>& beta_init,
                      const OracleOptions& options) {
  params.validate();
  const Eigen::Index n = params.omega_u.size();
  const Eigen::Index m = params.incidence.edge_count();
  if (static_cast<Eigen::Index>(beta_init.size()) != m) throw ConfigError("beta_init has the wrong length");
  if (!(options.dt > 0.0)) throw ConfigError("dt must be positive");
  if (options.sample_stride < 1) throw ConfigError("sample stride must be at least 1");
  if (options.dt * params.omega_u.maxCoeff() >= 1.0)
    throw ConfigError("dt * max(omega_u) must be below 1 so that a node ticks at most once per step");

  const EdgeIndex index(params.incidence);
  std::vector<std::vector<int>> in(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
  for (Eigen::Index e = 0; e < m; ++e) {
    out[static_cast<std::size_t>(index.src[static_cast<std::size_t>(e)])].push_back(static_cast<int>(e));
    in[static_cast<std::size_t>(index.dst[static_cast<std::size_t>(e)])].push_back(static_cast<int>(e));
  }

  OracleState state;
  state.phase = Eigen::VectorXd::Zero(n);
  state.occupancy = beta_init;
  std::vector<bool> flagged(static_cast<std::size_t>(m), false);

  Eigen::VectorXd beta(m), y(n);
  auto observe = [&] {
    for (Eigen::Index e = 0; e < m; ++e)
      beta(e) = static_cast<double>(state.occupancy[static_cast<std::size_t>(e)] - beta_init[static_cast<std::size_t>(e)]);
    index.y(beta, y);
  };

  Trace trace;
  const double dt = options.dt;
  const auto total_steps = static_cast<long long>(std::ceil(options.t_end / dt - 1e-9));
  long long last_recorded = -1;
  auto record = [&](long long step, const Eigen::VectorXd& omega) {
    trace.times.push_back(state.t);
    trace.theta_tilde.push_back(state.phase);
    trace.omega.push_back(omega);
    Eigen::VectorXd occ(m);
    for (Eigen::Index e = 0; e < m; ++e) occ(e) = static_cast<double>(state.occupancy[static_cast<std::size_t>(e)]);
    trace.beta_tilde.push_back(std::move(occ));
    last_recorded = step;
  };

  for (long long step = 0;; ++step) {
    state.t = static_cast<double>(step) * dt;
    observe();
    const Observation obs{state.t, state.phase, beta, y};
    law.sample(obs, trace.events);
    const Eigen::VectorXd omega = params.omega_u + law.correction(obs);
    if (step % options.sample_stride == 0) record(step, omega);
    if (law.finished() || step >= total_steps) {
      if (last_recorded != step) record(step, omega);
      break;
    }
    if (!omega.allFinite()) throw NumericError("non-finite frequency in oracle");

    const Eigen::VectorXd next = state.phase + dt * omega;
    // ascending node id; increments and decrements commute
    for (Eigen::Index i = 0; i < n; ++i) {
      const double before = std::floor(state.phase(i));
      const double after = std::floor(next(i));
      if (after == before) continue;
      if (after - before != 1.0) {
        std::ostringstream msg;
        msg << "node " << (i + 1) << " ticked " << (after - before) << " times in one step at t=" << state.t;
        throw NumericError(msg.str());
      }
      for (int e : in[static_cast<std::size_t>(i)]) --state.occupancy[static_cast<std::size_t>(e)];
      for (int e : out[static_cast<std::size_t>(i)]) ++state.occupancy[static_cast<std::size_t>(e)];
    }
    state.phase = next;
    for (Eigen::Index e = 0; e < m; ++e) {
      const long long occ = state.occupancy[static_cast<std::size_t>(e)];
      const bool bad = occ <= 0 || occ >= options.capacity;
      if (bad && !flagged[static_cast<std::size_t>(e)]) {
        std::ostringstream label;
        label << (occ <= 0 ? "underflow" : "overflow") << ": edge " << (e + 1);
        trace.events.push_back({static_cast<double>(step + 1) * dt, label.str()});
      }
      flagged[static_cast<std::size_t>(e)] = bad;
    }
  }
  return trace;
}

double compare_fluid_oracle(const Trace& fluid, const Trace& oracle, double offset) {
  if (fluid.size() != oracle.size()) throw ConfigError("traces have different sample counts");
  double worst = 0.0;
  for (std::size_t s = 0; s < fluid.size(); ++s) {
    if (std::abs(fluid.times[s] - oracle.times[s]) > 1e-9 * std::max(1.0, std::abs(fluid.times[s])))
      throw ConfigError("traces are sampled on different time grids");
    if (fluid.beta_tilde[s].size() != oracle.beta_tilde[s].size())
      throw ConfigError("traces have different edge counts");
    const double dev = (oracle.beta_tilde[s].array() - offset - fluid.beta_tilde[s].array()).abs().maxCoeff();
    worst = std::max(worst, dev);
  }
  return worst;
}

ReplayLaw::ReplayLaw(std::vector<CorrectionSegment> segments, double dt) : segments_(std::move(segments)), dt_(dt) {
  if (segments_.empty()) throw ConfigError("no recorded corrections to replay");
}

Eigen::VectorXd ReplayLaw::correction(const Observation& obs) const {
  const double a = obs.t;
  const double b = obs.t + dt_;
  auto it = std::upper_bound(segments_.begin(), segments_.end(), a,
                             [](double t, const CorrectionSegment& s) { return t < s.t_end; });
  if (it == segments_.end()) return segments_.back().c;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(it->c.size());
  double covered = 0.0;
  for (; it != segments_.end() && it->t_start < b; ++it) {
    const double lo = std::max(a, it->t_start);
    const double hi = std::min(b, it->t_end);
    if (hi > lo) {
      sum += (hi - lo) * it->c;
      covered += hi - lo;
    }
  }
  if (covered <= 0.0) return segments_.back().c;
  return sum / covered;
}

}  // namespace bittide
