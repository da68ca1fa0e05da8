#pragma once

#include <vector>

#include "cobot/kinematics.hpp"
#include "cobot/types.hpp"

namespace cobot::detail {

/// World pose of every link, shared by kinematics and dynamics sweeps.
struct ChainPose {
    std::vector<Mat3> R;    // orientation of link k+1
    std::vector<Vec3> p;    // origin of joint k+1
    std::vector<Vec3> axis; // world axis of joint k+1
    Vec3 p_tool;            // tool tip position
};

inline ChainPose chain_pose(const RobotModel& model, const VecX& q) {
    const int n = model.n();
    ChainPose out;
    out.R.resize(n);
    out.p.resize(n);
    out.axis.resize(n);

    Mat3 R = Mat3::Identity();
    Vec3 p = model.base().joint_offset;
    int compositions = 0;
    for (int k = 0; k < n; ++k) {
        out.p[k] = p;
        out.axis[k] = R * model.joint(k).axis;
        R = R * Eigen::AngleAxisd(q[k], model.joint(k).axis).toRotationMatrix();
        // Long chains accumulate drift; project back onto SO(3) periodically.
        if (++compositions > 100) {
            R = orthonormalized(R);
            compositions = 0;
        }
        out.R[k] = R;
        p = p + R * model.link(k).joint_offset;
    }
    out.p_tool = out.p[n - 1] +
                 out.R[n - 1] * (model.link(n - 1).joint_offset +
                                 model.end_effector().joint_offset);
    return out;
}

} // namespace cobot::detail
