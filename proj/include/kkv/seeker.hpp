#pragma once

#include <utility>

#include <Eigen/Dense>

#include "kkv/quat.hpp"
#include "kkv/rng.hpp"

namespace kkv {

// Sensor corruption and filtering parameters for one episode.
struct SensorErrorConfig {
  double e_theta = 0.0;      // seeker angle scale factor error
  double e_omega = 0.0;      // rate gyro scale factor error
  double sigma_theta = 0.0;  // rad
  double sigma_omega = 0.0;  // rad/s
  double tau_theta = 0.020;  // s; 0 bypasses the angle filter
  // Zero-initializing the angle filter reproduces the startup transient seen
  // when the filter charges from rest; default latches the first measurement.
  bool zero_init_filter = false;
};

struct SeekerAngles {
  double u = 0.0;  // rad, arcsin of the y-projection
  double v = 0.0;  // rad, arcsin of the z-projection
};

struct CorruptedMeasurement {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();  // rad/s
  SeekerAngles angles;                              // body-frame, rad
};

// The 11-element policy observation.
struct Observation {
  double dtheta_u = 0.0;
  double dtheta_v = 0.0;
  double rate_u = 0.0;
  double rate_v = 0.0;
  Quat dq;
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();

  static constexpr int kDim = 11;

  Eigen::Matrix<double, kDim, 1> vector() const {
    Eigen::Matrix<double, kDim, 1> o;
    o << dtheta_u, dtheta_v, rate_u, rate_v, dq.w, dq.x, dq.y, dq.z, omega.x(), omega.y(),
        omega.z();
    return o;
  }
};

// Ground-truth body-frame seeker angles for the current geometry.
SeekerAngles true_seeker_angles(const Eigen::Vector3d& missile_position,
                                const Eigen::Vector3d& target_position, const Quat& attitude);

// Scale factor error plus Gaussian noise on rotational velocity and angles.
CorruptedMeasurement corrupt(const Eigen::Vector3d& omega_true, const SeekerAngles& angles_true,
                             const SensorErrorConfig& cfg, RngStream& rng);

// Body-frame line-of-sight unit vector from measured angles. Throws FovFault
// when sin^2(u) + sin^2(v) > 1.
Eigen::Vector3d reconstruct_los(const SeekerAngles& measured);

// Rotate the reconstructed line of sight back to the homing-start frame.
SeekerAngles stabilize(const Eigen::Vector3d& los_body, const Quat& dq);

// Filter and attitude-integrator state owned by one episode.
struct SeekerState {
  SeekerAngles filtered;
  SeekerAngles prev_filtered;
  Quat dq;                 // estimated attitude change since homing start
  Quat homing_start_attitude;
  SeekerAngles initial;    // latched theta_u0 / theta_v0
  bool initialized = false;
};

// Advance the first-order angle filter across one guidance interval (RK4 on
// 20 ms substeps, measured input held) and form the 40 ms rate difference.
// The first call latches the initial angles and defines the rate as zero.
std::pair<SeekerAngles, SeekerAngles> filter_and_rate(SeekerState& state,
                                                      const SeekerAngles& stabilized,
                                                      const SensorErrorConfig& cfg,
                                                      double guidance_dt = 0.040,
                                                      double substep = 0.020);

// Advance the attitude-change estimate with measured rotational velocity,
// RK4 at 20 ms substeps with renormalization. `interval` must be a multiple
// of the substep.
Quat integrate_dq(const Quat& dq, const Eigen::Vector3d& omega_meas, double interval,
                  double substep = 0.020);

Observation build_observation(const SeekerState& state, const SeekerAngles& filtered,
                              const SeekerAngles& rates, const Eigen::Vector3d& omega_meas);

}  // namespace kkv
