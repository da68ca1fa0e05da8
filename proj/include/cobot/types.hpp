#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cobot/errors.hpp"

namespace cobot {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Rigid body attached to one segment of the chain.
/// com and inertia are expressed in the segment's own frame; the inertia
/// tensor is taken about the com. joint_offset is the position of the next
/// joint (or of the tool tip, for the end effector) in this frame.
struct LinkParams {
    double mass = 0.0;          // kg
    Vec3 com = Vec3::Zero();    // m
    Mat3 inertia = Mat3::Zero();// kg m^2, about com
    Vec3 joint_offset = Vec3::Zero(); // m
};

/// Revolute joint: unit rotation axis in the parent segment's frame plus
/// motion limits.
struct JointParams {
    Vec3 axis = Vec3::UnitZ();
    double position_min = -3.1415926535897931; // rad
    double position_max = 3.1415926535897931;  // rad
    double velocity_limit = 2.0;               // rad/s
};

/// Joint-side positions and velocities.
struct JointState {
    VecX q;
    VecX qd;

    explicit JointState(int n) : q(VecX::Zero(n)), qd(VecX::Zero(n)) {}
    JointState(VecX q_, VecX qd_) : q(std::move(q_)), qd(std::move(qd_)) {}
};

/// Serial chain: fixed base body, n joint/link pairs, and a tool body rigidly
/// attached past the last link. Gravity is expressed in the base frame so a
/// tilted mounting is described by the gravity vector alone.
///
/// Validated on construction; immutable afterwards. Dynamics treat the last
/// link and the end effector as one composite rigid body.
class RobotModel {
public:
    RobotModel(std::string name,
               LinkParams base,
               std::vector<JointParams> joints,
               std::vector<LinkParams> links,
               LinkParams end_effector,
               Vec3 gravity = Vec3(0.0, 0.0, -9.81));

    int n() const { return static_cast<int>(joints_.size()); }
    const std::string& name() const { return name_; }
    const LinkParams& base() const { return base_; }
    const JointParams& joint(int k) const { return joints_.at(k); }   // k in [0, n)
    const LinkParams& link(int k) const { return links_.at(k); }      // k in [0, n)
    const LinkParams& end_effector() const { return end_effector_; }
    const Vec3& gravity() const { return gravity_; }

    /// Link k with the end effector folded into the last one; this is what
    /// the dynamics algorithms iterate over.
    const LinkParams& body(int k) const { return bodies_.at(k); }

    /// Base plus chain links, excluding the tool.
    double arm_mass() const;
    /// Everything, tool included.
    double total_mass() const;

    /// Same chain with gravity replaced (used for mounting studies).
    RobotModel with_gravity(const Vec3& g) const;

private:
    std::string name_;
    LinkParams base_;
    std::vector<JointParams> joints_;
    std::vector<LinkParams> links_;
    LinkParams end_effector_;
    Vec3 gravity_;
    std::vector<LinkParams> bodies_;

    void validate() const;
    void build_bodies();
};

/// Throws ValidationError naming the first violated invariant. `where`
/// identifies the link in messages ("link 3", "end effector", ...).
void validate_link(const LinkParams& link, const std::string& where);
void validate_joint(const JointParams& joint, const std::string& where);

} // namespace cobot
