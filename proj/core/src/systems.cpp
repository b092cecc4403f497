#include "dynoid/systems.hpp"

#include <cmath>
#include <random>

#include "dynoid/errors.hpp"

namespace dynoid {

Eigen::Vector2d tank_step(const Eigen::Vector2d& x, double u,
                          const TankParams& p) {
  const double r1 = std::sqrt(std::max(x(0), 0.0));
  const double r2 = std::sqrt(std::max(x(1), 0.0));
  Eigen::Vector2d next;
  next(0) = std::max(x(0) - p.k1 * r1 + p.k2 * u, 0.0);
  next(1) = std::max(x(1) + p.k3 * r1 - p.k4 * r2, 0.0);
  return next;
}

double tank_observe(const Eigen::Vector2d& x, double w) { return x(1) + w; }

DroneState drone_step(const DroneState& s, const Eigen::Vector2d& rotor_speeds,
                      const DroneParams& p) {
  const double o1 = rotor_speeds(0);
  const double o2 = rotor_speeds(1);
  const double thrust_accel = p.thrust / p.mass * (o1 * o1 + o2 * o2);
  const double drag = p.friction / p.mass * (o1 + o2);
  const double theta = s(2);

  const double ax = -thrust_accel * std::sin(theta) - drag * s(3);
  const double az = thrust_accel * std::cos(theta) - drag * s(4) - p.gravity;
  const double alpha = p.thrust * p.arm_length / p.inertia * (o2 * o2 - o1 * o1);

  DroneState next;
  next(3) = s(3) + p.dt * ax;
  next(4) = s(4) + p.dt * az;
  next(5) = s(5) + p.dt * alpha;
  next(0) = s(0) + p.dt * next(3);
  next(1) = s(1) + p.dt * next(4);
  next(2) = s(2) + p.dt * next(5);
  if (!next.allFinite()) throw NumericError("drone_step: non-finite state");
  return next;
}

Eigen::Vector3d drone_observe(const DroneState& s) { return s.head<3>(); }

double drone_hover_speed(const DroneParams& p) {
  return std::sqrt(p.mass * p.gravity / (2.0 * p.thrust));
}

Eigen::VectorXd TankPlant::step(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& u) const {
  return tank_step(x, u(0), params_);
}

Eigen::VectorXd TankPlant::observe(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd&) const {
  Eigen::VectorXd y(1);
  y(0) = x(1);
  return y;
}

Eigen::VectorXd DronePlant::step(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& u) const {
  return drone_step(x, u, params_);
}

Eigen::VectorXd DronePlant::observe(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd&) const {
  return x.head(3);
}

Eigen::MatrixXd spline_reference(const Eigen::MatrixXd& waypoints, int horizon) {
  const int n_knots = static_cast<int>(waypoints.rows());
  const int n_channels = static_cast<int>(waypoints.cols());
  if (n_knots < 2) throw UsageError("spline_reference: need >= 2 waypoints");
  if (horizon < 2) throw UsageError("spline_reference: horizon must be >= 2");

  // Knot times evenly distributed over the horizon.
  Eigen::VectorXd knot_t(n_knots);
  for (int j = 0; j < n_knots; ++j) {
    knot_t(j) = static_cast<double>(j) * (horizon - 1) / (n_knots - 1);
  }

  Eigen::MatrixXd out(horizon, n_channels);
  for (int c = 0; c < n_channels; ++c) {
    const Eigen::VectorXd vals = waypoints.col(c);
    // Natural spline: solve for interior second derivatives.
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n_knots);
    if (n_knots > 2) {
      const int n = n_knots - 2;
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
      Eigen::VectorXd rhs(n);
      for (int i = 0; i < n; ++i) {
        const double h0 = knot_t(i + 1) - knot_t(i);
        const double h1 = knot_t(i + 2) - knot_t(i + 1);
        a(i, i) = 2.0 * (h0 + h1);
        if (i > 0) a(i, i - 1) = h0;
        if (i + 1 < n) a(i, i + 1) = h1;
        rhs(i) = 6.0 * ((vals(i + 2) - vals(i + 1)) / h1 -
                        (vals(i + 1) - vals(i)) / h0);
      }
      m.segment(1, n) = a.partialPivLu().solve(rhs);
    }
    for (int t = 0; t < horizon; ++t) {
      const double tt = static_cast<double>(t);
      int j = static_cast<int>((tt / (horizon - 1)) * (n_knots - 1));
      if (j >= n_knots - 1) j = n_knots - 2;
      while (j > 0 && tt < knot_t(j)) --j;
      while (j < n_knots - 2 && tt > knot_t(j + 1)) ++j;
      const double h = knot_t(j + 1) - knot_t(j);
      const double u = (tt - knot_t(j)) / h;
      const double a3 = h * h / 6.0;
      out(t, c) = (1.0 - u) * vals(j) + u * vals(j + 1) +
                  a3 * ((std::pow(1.0 - u, 3) - (1.0 - u)) * m(j) +
                        (std::pow(u, 3) - u) * m(j + 1));
    }
  }
  return out;
}

double pid_control(double reference, double measurement, PidState& state,
                   const PidGains& gains) {
  const double error = reference - measurement;
  const double delta = state.has_prev ? error - state.prev_error : 0.0;
  const double integral_candidate = state.integral + error;
  const double raw =
      gains.kp * error + gains.ki * integral_candidate + gains.kd * delta;
  double u = raw;
  if (raw > gains.u_max) {
    u = gains.u_max;
  } else if (raw < gains.u_min) {
    u = gains.u_min;
  } else {
    state.integral = integral_candidate;
  }
  state.prev_error = error;
  state.has_prev = true;
  return u;
}

namespace {

struct DroneLinearization {
  Eigen::Matrix<double, 6, 6> a;
  Eigen::Matrix<double, 6, 2> b;
};

// Euler discretization of the dynamics linearized at hover.
DroneLinearization linearize_about_hover(const DroneParams& p) {
  const double omega_h = drone_hover_speed(p);
  Eigen::Matrix<double, 6, 6> ac = Eigen::Matrix<double, 6, 6>::Zero();
  ac(0, 3) = 1.0;
  ac(1, 4) = 1.0;
  ac(2, 5) = 1.0;
  ac(3, 2) = -p.gravity;  // k_T/m * 2 omega_h^2 = g
  ac(3, 3) = -p.friction / p.mass * 2.0 * omega_h;
  ac(4, 4) = -p.friction / p.mass * 2.0 * omega_h;
  Eigen::Matrix<double, 6, 2> bc = Eigen::Matrix<double, 6, 2>::Zero();
  const double thrust_gain = 2.0 * p.thrust * omega_h / p.mass;
  bc(4, 0) = thrust_gain;
  bc(4, 1) = thrust_gain;
  const double torque_gain = 2.0 * p.thrust * p.arm_length * omega_h / p.inertia;
  bc(5, 0) = -torque_gain;
  bc(5, 1) = torque_gain;
  DroneLinearization lin;
  lin.a = Eigen::Matrix<double, 6, 6>::Identity() + p.dt * ac;
  lin.b = p.dt * bc;
  return lin;
}

}  // namespace

Eigen::Vector2d lq_tracker(const Eigen::Matrix<double, 6, Eigen::Dynamic>& reference,
                           const DroneState& state, const DroneParams& p,
                           const LqTrackerConfig& cfg) {
  if (reference.cols() < 1) throw UsageError("lq_tracker: empty reference");
  if (cfg.horizon < 1) throw UsageError("lq_tracker: horizon must be >= 1");

  const DroneLinearization lin = linearize_about_hover(p);
  const double omega_h = drone_hover_speed(p);
  DroneState hover = DroneState::Zero();

  const Eigen::Matrix<double, 6, 6> q = cfg.state_weights.asDiagonal();
  const Eigen::Matrix2d r = cfg.input_weights.asDiagonal();

  auto ref_at = [&](int t) -> Eigen::Matrix<double, 6, 1> {
    const int col = t < reference.cols() ? t : static_cast<int>(reference.cols()) - 1;
    return reference.col(col) - hover;
  };

  // Backward Riccati recursion with the affine reference term.
  const int horizon = cfg.horizon;
  Eigen::Matrix<double, 6, 6> value_quad = q;
  Eigen::Matrix<double, 6, 1> value_lin = -q * ref_at(horizon - 1);
  Eigen::Matrix<double, 2, 6> gain = Eigen::Matrix<double, 2, 6>::Zero();
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();
  for (int t = horizon - 2; t >= 0; --t) {
    const Eigen::Matrix2d m = r + lin.b.transpose() * value_quad * lin.b;
    const Eigen::Matrix2d m_inv = m.inverse();
    gain = m_inv * lin.b.transpose() * value_quad * lin.a;
    offset = m_inv * lin.b.transpose() * value_lin;
    const Eigen::Matrix<double, 6, 6> closed = lin.a - lin.b * gain;
    value_quad = q + lin.a.transpose() * value_quad * closed;
    value_lin = -q * ref_at(t) + closed.transpose() * value_lin;
    if (!value_quad.allFinite() || !value_lin.allFinite()) {
      throw NumericError("lq_tracker: Riccati recursion diverged");
    }
  }
  if (horizon == 1) {
    const Eigen::Matrix2d m = r + lin.b.transpose() * value_quad * lin.b;
    const Eigen::Matrix2d m_inv = m.inverse();
    gain = m_inv * lin.b.transpose() * value_quad * lin.a;
    offset = m_inv * lin.b.transpose() * value_lin;
  }

  const Eigen::Matrix<double, 6, 1> deviation = state - hover;
  Eigen::Vector2d u = Eigen::Vector2d::Constant(omega_h) - gain * deviation - offset;
  u = u.cwiseMax(0.0).cwiseMin(p.omega_max);
  return u;
}

Eigen::MatrixXd add_noise(const Eigen::MatrixXd& outputs,
                          const Eigen::VectorXd& sigma, std::uint64_t seed) {
  if (sigma.size() != outputs.cols()) {
    throw UsageError("add_noise: sigma must have one entry per channel");
  }
  for (int c = 0; c < sigma.size(); ++c) {
    if (sigma(c) < 0.0) throw UsageError("add_noise: sigma must be >= 0");
  }
  if (sigma.isZero(0.0)) return outputs;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd noisy = outputs;
  for (Eigen::Index t = 0; t < outputs.rows(); ++t) {
    for (Eigen::Index c = 0; c < outputs.cols(); ++c) {
      noisy(t, c) += sigma(c) * dist(rng);
    }
  }
  return noisy;
}

}  // namespace dynoid
