#include "bittide/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "bittide/errors.hpp"

namespace bittide {

void ModelParams::validate() const {
  if (omega_u.size() != incidence.node_count())
    throw ConfigError("omega_u has " + std::to_string(omega_u.size()) + " entries for " +
                      std::to_string(incidence.node_count()) + " nodes");
  for (Eigen::Index i = 0; i < omega_u.size(); ++i) {
    if (!(omega_u(i) > 0.0) || !std::isfinite(omega_u(i)))
      throw ConfigError("omega_u[" + std::to_string(i + 1) + "] must be positive");
  }
  if (buffer_capacity && !(*buffer_capacity > 0.0)) throw ConfigError("buffer capacity must be positive");
}

Eigen::VectorXd NoControl::correction(const Observation& obs) const {
  return Eigen::VectorXd::Zero(obs.y.size());
}

ProportionalLaw::ProportionalLaw(double k) : k_(k) {
  if (!(k > 0.0)) throw ConfigError("proportional gain must be positive");
}

Eigen::VectorXd ProportionalLaw::correction(const Observation& obs) const { return k_ * obs.y; }

Eigen::VectorXd buffer_occupancy(const Eigen::VectorXd& theta_tilde, const Eigen::MatrixXd& B) {
  return B.transpose() * theta_tilde;
}

Eigen::VectorXd measurement(const Eigen::VectorXd& beta_tilde, const Eigen::MatrixXd& D) {
  return D * beta_tilde;
}

EdgeIndex::EdgeIndex(const IncidenceSet& incidence) {
  const int m = incidence.edge_count();
  node_count = incidence.node_count();
  src.resize(static_cast<std::size_t>(m));
  dst.resize(static_cast<std::size_t>(m));
  for (int e = 0; e < m; ++e) {
    const Edge ends = incidence.endpoints(e + 1);
    src[static_cast<std::size_t>(e)] = ends.src - 1;
    dst[static_cast<std::size_t>(e)] = ends.dst - 1;
  }
}

void EdgeIndex::beta(const Eigen::VectorXd& theta, Eigen::VectorXd& out) const {
  out.resize(static_cast<Eigen::Index>(src.size()));
  for (std::size_t e = 0; e < src.size(); ++e) out(static_cast<Eigen::Index>(e)) = theta(src[e]) - theta(dst[e]);
}

void EdgeIndex::y(const Eigen::VectorXd& beta, Eigen::VectorXd& out) const {
  out.setZero(node_count);
  for (std::size_t e = 0; e < dst.size(); ++e) out(dst[e]) += beta(static_cast<Eigen::Index>(e));
}

namespace {

class Integrator {
 public:
  Integrator(const ModelParams& params, ControlLaw& law)
      : params_(params), law_(law), index_(params.incidence) {
    const Eigen::Index n = params.omega_u.size();
    beta_.resize(static_cast<Eigen::Index>(index_.src.size()));
    y_.resize(n);
    k1_.resize(n);
    k2_.resize(n);
    k3_.resize(n);
    k4_.resize(n);
    tmp_.resize(n);
  }

  void observe(const Eigen::VectorXd& theta) {
    index_.beta(theta, beta_);
    index_.y(beta_, y_);
  }

  Observation observation(double t, const Eigen::VectorXd& theta) const { return Observation{t, theta, beta_, y_}; }

  void rhs(double t, const Eigen::VectorXd& theta, Eigen::VectorXd& out) {
    observe(theta);
    out = params_.omega_u + law_.correction(observation(t, theta));
  }

  Eigen::VectorXd rk4(double t, const Eigen::VectorXd& theta, double h) {
    rhs(t, theta, k1_);
    tmp_ = theta + 0.5 * h * k1_;
    rhs(t + 0.5 * h, tmp_, k2_);
    tmp_ = theta + 0.5 * h * k2_;
    rhs(t + 0.5 * h, tmp_, k3_);
    tmp_ = theta + h * k3_;
    rhs(t + h, tmp_, k4_);
    return theta + (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
  }

  std::optional<double> switching(double t, const Eigen::VectorXd& theta) {
    observe(theta);
    return law_.switching_value(observation(t, theta));
  }

  const Eigen::VectorXd& beta() const { return beta_; }
  const Eigen::VectorXd& y() const { return y_; }

 private:
  const ModelParams& params_;
  ControlLaw& law_;
  EdgeIndex index_;
  Eigen::VectorXd beta_, y_, k1_, k2_, k3_, k4_, tmp_;
};

bool crosses(double from, double to) { return from != 0.0 && (to == 0.0 || std::signbit(from) != std::signbit(to)); }

}  // namespace

void simulate_into(Trace& trace, const ModelParams& params, ControlLaw& law, const SimulationOptions& options) {
  params.validate();
  if (!(options.dt > 0.0)) throw ConfigError("dt must be positive");
  if (options.sample_stride < 1) throw ConfigError("sample stride must be at least 1");
  if (!(options.t_end >= 0.0)) throw ConfigError("t_end must be nonnegative");

  const Eigen::Index n = params.omega_u.size();
  const Eigen::Index m = params.incidence.edge_count();
  const double dt = options.dt;
  const auto total_steps = static_cast<long long>(std::ceil(options.t_end / dt - 1e-9));
  const double half_capacity = params.buffer_capacity ? *params.buffer_capacity / 2.0 : 0.0;
  std::vector<bool> over(static_cast<std::size_t>(m), false);

  Integrator integ(params, law);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  long long step = 0;
  long long last_recorded = -1;

  auto record = [&](double t) {
    integ.observe(theta);
    trace.times.push_back(t);
    trace.theta_tilde.push_back(theta);
    trace.beta_tilde.push_back(integ.beta());
    trace.omega.push_back(params.omega_u + law.correction(integ.observation(t, theta)));
    last_recorded = step;
  };

  for (;;) {
    const double t = static_cast<double>(step) * dt;
    integ.observe(theta);
    law.sample(integ.observation(t, theta), trace.events);

    if (params.buffer_capacity) {
      for (Eigen::Index e = 0; e < m; ++e) {
        const bool now = std::abs(integ.beta()(e)) > half_capacity;
        if (now && !over[static_cast<std::size_t>(e)]) {
          std::ostringstream label;
          label << "warning: edge " << (e + 1) << " occupancy beyond half capacity";
          trace.events.push_back({t, label.str()});
        }
        over[static_cast<std::size_t>(e)] = now;
      }
    }

    if (step % options.sample_stride == 0) record(t);
    if (law.finished() || step >= total_steps) {
      if (last_recorded != step) record(t);
      break;
    }

    const double target = static_cast<double>(step + 1) * dt;
    double t_cur = t;
    while (t_cur < target) {
      const double h = target - t_cur;
      const std::optional<double> sw0 = integ.switching(t_cur, theta);
      Eigen::VectorXd next = integ.rk4(t_cur, theta, h);
      double taken = h;
      if (sw0) {
        const std::optional<double> sw1 = integ.switching(t_cur + h, next);
        if (sw1 && crosses(*sw0, *sw1)) {
          // Illinois regula falsi on the sub-step length.
          double lo = 0.0, flo = *sw0;
          double hi = h, fhi = *sw1;
          int side = 0;
          double mid = h;
          for (int it = 0; it < 60; ++it) {
            mid = (lo * fhi - hi * flo) / (fhi - flo);
            if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
            const Eigen::VectorXd probe = integ.rk4(t_cur, theta, mid);
            const double fmid = *integ.switching(t_cur + mid, probe);
            if (fmid == 0.0 || std::abs(fmid) < 1e-15 * (1.0 + std::abs(*sw0))) break;
            if (std::signbit(fmid) == std::signbit(flo)) {
              lo = mid;
              flo = fmid;
              if (side == -1) fhi *= 0.5;
              side = -1;
            } else {
              hi = mid;
              fhi = fmid;
              if (side == 1) flo *= 0.5;
              side = 1;
            }
            if (hi - lo < 1e-15 * h) break;
          }
          if (mid > 0.0 && mid < h) {
            taken = mid;
            next = integ.rk4(t_cur, theta, mid);
          }
        }
      }
      if (!next.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite phase at t=" << t_cur;
        throw NumericError(msg.str());
      }
      if (options.record_corrections)
        trace.corrections.push_back({t_cur, t_cur + taken, (next - theta) / taken - params.omega_u});
      theta = std::move(next);
      if (taken < h) {
        t_cur += taken;
        integ.observe(theta);
        law.sample(integ.observation(t_cur, theta), trace.events);
      } else {
        t_cur = target;
      }
    }
    ++step;
  }
}

Trace simulate(const ModelParams& params, ControlLaw& law, const SimulationOptions& options) {
  Trace trace;
  simulate_into(trace, params, law, options);
  return trace;
}

}  // namespace bittide
