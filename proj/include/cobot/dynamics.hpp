#pragma once

#include "cobot/types.hpp"

namespace cobot {

/// Joint-space mass matrix by the composite-rigid-body algorithm. Symmetric
/// positive definite for any valid model.
MatX mass_matrix(const RobotModel& model, const VecX& q);

/// Coriolis/centrifugal matrix from Christoffel symbols of the mass matrix,
/// with dM/dq_k taken by central differences of step fd_step. Satisfies the
/// passivity identity qd' (dM/dt - 2C) qd = 0.
MatX coriolis_matrix(const RobotModel& model, const VecX& q, const VecX& qd,
                     double fd_step = 1e-6);

/// Gravity torque, equals the gradient of potential_energy in q.
VecX gravity_vector(const RobotModel& model, const VecX& q);

/// Gravitational potential of all bodies (base included) for the model's
/// gravity vector.
double potential_energy(const RobotModel& model, const VecX& q);

/// 0.5 qd' M qd.
double kinetic_energy(const RobotModel& model, const VecX& q, const VecX& qd);

/// Recursive Newton-Euler: joint torque that realizes qdd at (q, qd) against
/// gravity plus an external joint-side load tau_ext. Friction is not
/// included here; it belongs to the actuation layer.
VecX inverse_dynamics(const RobotModel& model, const JointState& state,
                      const VecX& qdd, const VecX& tau_ext);
VecX inverse_dynamics(const RobotModel& model, const JointState& state,
                      const VecX& qdd);

/// C(q,qd) qd + g(q) in one O(n) sweep (RNEA with qdd = 0); the simulator's
/// bias-torque path.
VecX bias_torque(const RobotModel& model, const VecX& q, const VecX& qd);

/// New model with mass and inertia of body k multiplied by lambda[k],
/// k = 0 (base) .. n (last link). Centers of mass are unchanged and the end
/// effector is left untouched.
RobotModel scale_inertial(const RobotModel& model, const VecX& lambda);

} // namespace cobot
