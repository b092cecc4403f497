#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>

namespace dynoid {

// ---------------------------------------------------------------------------
// Plants
// ---------------------------------------------------------------------------

/// Discrete-update gains of the two-tank cascade.
struct TankParams {
  double k1 = 0.5;
  double k2 = 0.4;
  double k3 = 0.2;
  double k4 = 0.3;
};

/// Planar two-propeller drone, integrated at 30 Hz.
struct DroneParams {
  double thrust = 4e-4;      // k_T, N s^2
  double friction = 1e-9;    // gamma
  double arm_length = 0.15;  // L, m
  double mass = 1.0;         // m, kg
  double inertia = 2.7e-3;   // J, kg m^2
  double gravity = 9.81;     // m/s^2
  double dt = 1.0 / 30.0;    // s
  double omega_max = 300.0;  // admissible propeller speed, rad/s
};

/// One tank update. Square-root arguments and the resulting levels are
/// clamped at zero (an empty tank cannot drain further).
Eigen::Vector2d tank_step(const Eigen::Vector2d& x, double u,
                          const TankParams& p);

/// Tank output: lower-tank level plus measurement noise w.
double tank_observe(const Eigen::Vector2d& x, double w);

/// Drone state (p_x, p_z, theta, v_x, v_z, omega).
using DroneState = Eigen::Matrix<double, 6, 1>;

/// One Euler step at p.dt: accelerations from the current state, then
/// velocities, then positions from the updated velocities.
DroneState drone_step(const DroneState& s, const Eigen::Vector2d& rotor_speeds,
                      const DroneParams& p);

/// Drone output (p_x, p_z, theta).
Eigen::Vector3d drone_observe(const DroneState& s);

/// Propeller speed that exactly cancels gravity at theta = 0.
double drone_hover_speed(const DroneParams& p);

/// Uniform view of a simulated plant, used by data generation and the
/// observability diagnostics. observe() is the noiseless output map.
class Plant {
 public:
  virtual ~Plant() = default;
  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  virtual Eigen::VectorXd step(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u) const = 0;
  virtual Eigen::VectorXd observe(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u) const = 0;
};

class TankPlant final : public Plant {
 public:
  explicit TankPlant(const TankParams& params = {}) : params_(params) {}
  int state_dim() const override { return 2; }
  int input_dim() const override { return 1; }
  int output_dim() const override { return 1; }
  Eigen::VectorXd step(const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u) const override;
  Eigen::VectorXd observe(const Eigen::VectorXd& x,
                          const Eigen::VectorXd& u) const override;
  const TankParams& params() const { return params_; }

 private:
  TankParams params_;
};

class DronePlant final : public Plant {
 public:
  explicit DronePlant(const DroneParams& params = {}) : params_(params) {}
  int state_dim() const override { return 6; }
  int input_dim() const override { return 2; }
  int output_dim() const override { return 3; }
  Eigen::VectorXd step(const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u) const override;
  Eigen::VectorXd observe(const Eigen::VectorXd& x,
                          const Eigen::VectorXd& u) const override;
  const DroneParams& params() const { return params_; }

 private:
  DroneParams params_;
};

// ---------------------------------------------------------------------------
// References and controllers
// ---------------------------------------------------------------------------

/// Natural cubic spline through the waypoints (one row each), with knots
/// evenly distributed over [0, horizon-1]. Returns horizon samples per
/// channel; the curve passes through every waypoint exactly.
Eigen::MatrixXd spline_reference(const Eigen::MatrixXd& waypoints, int horizon);

struct PidGains {
  double kp = 2.0;
  double ki = 0.3;
  double kd = 0.1;
  double u_min = 0.0;
  double u_max = 5.0;
};

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  bool has_prev = false;
};

/// u = Kp e + Ki sum(e) + Kd (e - e_prev), saturated to [u_min, u_max].
/// The integrator freezes while the raw command is saturated.
double pid_control(double reference, double measurement, PidState& state,
                   const PidGains& gains);

struct LqTrackerConfig {
  int horizon = 40;
  Eigen::Matrix<double, 6, 1> state_weights =
      (Eigen::Matrix<double, 6, 1>() << 20.0, 20.0, 2.0, 1.0, 1.0, 0.1)
          .finished();
  Eigen::Vector2d input_weights = Eigen::Vector2d::Constant(1e-4);
};

/// Receding-horizon linear-quadratic tracker about hover. reference is a
/// 6 x H block of desired states (H >= 1); shorter than cfg.horizon means
/// the tail holds the last column. Returns the first input, clamped to
/// [0, omega_max].
Eigen::Vector2d lq_tracker(const Eigen::Matrix<double, 6, Eigen::Dynamic>& reference,
                           const DroneState& state, const DroneParams& p,
                           const LqTrackerConfig& cfg);

// ---------------------------------------------------------------------------
// Measurement noise
// ---------------------------------------------------------------------------

/// Adds i.i.d. zero-mean Gaussian noise, one sigma per channel (column).
/// outputs is T x n_y. Deterministic per seed.
Eigen::MatrixXd add_noise(const Eigen::MatrixXd& outputs,
                          const Eigen::VectorXd& sigma, std::uint64_t seed);

}  // namespace dynoid
