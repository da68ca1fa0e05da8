#include "cobot/kinematics.hpp"

#include <cmath>
#include <sstream>

#include "cobot/detail/chain_pose.hpp"

namespace cobot {

Mat3 orthonormalized(const Mat3& R) {
    Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 out = svd.matrixU() * svd.matrixV().transpose();
    if (out.determinant() < 0.0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1.0;
        out = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return out;
}

std::vector<Frame> forward_kinematics(const RobotModel& model, const VecX& q) {
    if (q.size() != model.n()) {
        throw ValidationError("forward_kinematics: q has size " + std::to_string(q.size()) +
                              ", expected " + std::to_string(model.n()));
    }
    const detail::ChainPose cp = detail::chain_pose(model, q);
    std::vector<Frame> frames(model.n() + 1);
    for (int k = 0; k < model.n(); ++k) {
        frames[k].R = cp.R[k];
        frames[k].p = cp.p[k];
    }
    frames[model.n()].R = cp.R[model.n() - 1];
    frames[model.n()].p = cp.p_tool;
    return frames;
}

MatX jacobian(const RobotModel& model, const VecX& q) {
    const detail::ChainPose cp = detail::chain_pose(model, q);
    MatX J(6, model.n());
    for (int k = 0; k < model.n(); ++k) {
        J.col(k).head<3>() = cp.axis[k].cross(cp.p_tool - cp.p[k]);
        J.col(k).tail<3>() = cp.axis[k];
    }
    return J;
}

Eigen::Matrix<double, 6, 1> pose_error(const Frame& target, const Frame& current) {
    Eigen::Matrix<double, 6, 1> e;
    e.head<3>() = target.p - current.p;
    const Eigen::AngleAxisd aa(Mat3(target.R * current.R.transpose()));
    e.tail<3>() = aa.angle() * aa.axis();
    return e;
}

IkResult inverse_kinematics(const RobotModel& model,
                            const Frame& target,
                            const VecX& q_seed,
                            const IkOptions& opts) {
    const int n = model.n();
    if (q_seed.size() != n) {
        throw ValidationError("inverse_kinematics: seed has wrong size");
    }

    auto clamp = [&](VecX& q) {
        for (int k = 0; k < n; ++k) {
            q[k] = std::clamp(q[k], model.joint(k).position_min, model.joint(k).position_max);
        }
    };

    VecX q = q_seed;
    clamp(q);

    auto tool = [&](const VecX& qq) {
        auto frames = forward_kinematics(model, qq);
        return frames.back();
    };

    Eigen::Matrix<double, 6, 1> e = pose_error(target, tool(q));
    double err = e.norm();
    if (err <= opts.tolerance) {
        return IkResult{q, 0, err};
    }

    for (int it = 1; it <= opts.max_iterations; ++it) {
        const MatX J = jacobian(model, q);
        // Damping grows with the residual so far targets stay well behaved.
        const double lambda = opts.damping * (1.0 + err);
        Eigen::Matrix<double, 6, 6> JJt = (J * J.transpose()).eval();
        JJt.diagonal().array() += lambda * lambda;
        VecX dq = J.transpose() * JJt.ldlt().solve(e);
        const double step_cap = 0.5;
        if (dq.norm() > step_cap) dq *= step_cap / dq.norm();
        q += dq;
        clamp(q);

        e = pose_error(target, tool(q));
        err = e.norm();
        if (err <= opts.tolerance) {
            return IkResult{q, it, err};
        }
    }

    std::ostringstream msg;
    msg << "inverse_kinematics: no convergence after " << opts.max_iterations
        << " iterations, residual " << err;
    bool limited = false;
    for (int k = 0; k < n; ++k) {
        const double lo = model.joint(k).position_min;
        const double hi = model.joint(k).position_max;
        if (q[k] <= lo + 1e-12 || q[k] >= hi - 1e-12) {
            msg << (limited ? ", " : "; pinned at limit: ") << "joint " << (k + 1);
            limited = true;
        }
    }
    throw IkError(msg.str());
}

} // namespace cobot
