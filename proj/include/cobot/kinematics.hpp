#pragma once

#include <vector>

#include "cobot/types.hpp"

namespace cobot {

/// Rigid transform, world rotation plus world translation.
struct Frame {
    Mat3 R = Mat3::Identity();
    Vec3 p = Vec3::Zero();
};

/// Frames along the chain for configuration q.
///
/// Entry k (k = 0..n-1) is the frame of link k+1, origin at joint k+1.
/// Entry n is the tool frame: same orientation as the last link, origin at
/// the tool tip (end-effector offset included). Size is always n+1.
std::vector<Frame> forward_kinematics(const RobotModel& model, const VecX& q);

/// Tool-frame geometric Jacobian, 6 x n. Rows 0..2 are linear velocity,
/// rows 3..5 angular velocity; column j is [axis_j x (p_tcp - p_j); axis_j].
MatX jacobian(const RobotModel& model, const VecX& q);

struct IkOptions {
    double tolerance = 1e-8;   // combined position (m) + orientation (rad) norm
    int max_iterations = 200;
    double damping = 1e-3;     // base damped-least-squares factor
};

struct IkResult {
    VecX q;
    int iterations = 0;
    double residual = 0.0;
};

/// Damped least-squares inverse kinematics from q_seed. Joint limits are
/// enforced by clamping every iterate. Throws IkError when the pose cannot
/// be reached; the message names pinned joints when a limit is the cause.
IkResult inverse_kinematics(const RobotModel& model,
                            const Frame& target,
                            const VecX& q_seed,
                            const IkOptions& opts = {});

/// Pose error target vs current as [translation; rotation log], the residual
/// minimized by inverse_kinematics.
Eigen::Matrix<double, 6, 1> pose_error(const Frame& target, const Frame& current);

/// Nearest rotation matrix (polar decomposition); used to keep long
/// composition chains orthonormal.
Mat3 orthonormalized(const Mat3& R);

} // namespace cobot
