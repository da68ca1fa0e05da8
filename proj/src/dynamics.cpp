#include "cobot/dynamics.hpp"

#include <vector>

#include "cobot/detail/chain_pose.hpp"

namespace cobot {

namespace {

struct BodyKin {
    Mat3 R;
    Vec3 p;     // joint origin
    Vec3 axis;  // world
    Vec3 com;   // world
    Mat3 I_w;   // about com, world axes
    double mass;
};

std::vector<BodyKin> body_kinematics(const RobotModel& model, const VecX& q) {
    const detail::ChainPose cp = detail::chain_pose(model, q);
    std::vector<BodyKin> bodies(model.n());
    for (int k = 0; k < model.n(); ++k) {
        const LinkParams& b = model.body(k);
        bodies[k].R = cp.R[k];
        bodies[k].p = cp.p[k];
        bodies[k].axis = cp.axis[k];
        bodies[k].com = cp.p[k] + cp.R[k] * b.com;
        bodies[k].I_w = cp.R[k] * b.inertia * cp.R[k].transpose();
        bodies[k].mass = b.mass;
    }
    return bodies;
}

} // namespace

VecX inverse_dynamics(const RobotModel& model, const JointState& state,
                      const VecX& qdd, const VecX& tau_ext) {
    const int n = model.n();
    if (state.q.size() != n || state.qd.size() != n || qdd.size() != n ||
        tau_ext.size() != n) {
        throw ValidationError("inverse_dynamics: dimension mismatch");
    }
    const auto bodies = body_kinematics(model, state.q);

    // Forward sweep. Gravity enters as a fictitious base acceleration.
    std::vector<Vec3> w(n), wd(n), a_com(n);
    Vec3 w_prev = Vec3::Zero();
    Vec3 wd_prev = Vec3::Zero();
    Vec3 a_prev = -model.gravity(); // base joint-origin acceleration
    Vec3 p_prev = model.base().joint_offset;
    for (int k = 0; k < n; ++k) {
        const Vec3& a_k = bodies[k].axis;
        const Vec3 r = bodies[k].p - p_prev; // rigid in the parent
        const Vec3 a_origin = a_prev + wd_prev.cross(r) + w_prev.cross(w_prev.cross(r));

        w[k] = w_prev + a_k * state.qd[k];
        wd[k] = wd_prev + a_k * qdd[k] + w_prev.cross(a_k * state.qd[k]);

        const Vec3 rc = bodies[k].com - bodies[k].p;
        a_com[k] = a_origin + wd[k].cross(rc) + w[k].cross(w[k].cross(rc));

        w_prev = w[k];
        wd_prev = wd[k];
        a_prev = a_origin;
        p_prev = bodies[k].p;
    }

    // Backward sweep: accumulate wrenches toward the base.
    VecX tau(n);
    Vec3 f_child = Vec3::Zero();
    Vec3 n_child = Vec3::Zero(); // about child joint origin
    Vec3 p_child = Vec3::Zero();
    for (int k = n - 1; k >= 0; --k) {
        const Vec3 F = bodies[k].mass * a_com[k];
        const Vec3 N = bodies[k].I_w * wd[k] + w[k].cross(bodies[k].I_w * w[k]);

        Vec3 f = F + f_child;
        Vec3 nn = N + (bodies[k].com - bodies[k].p).cross(F);
        if (k < n - 1) {
            nn += n_child + (p_child - bodies[k].p).cross(f_child);
        }
        tau[k] = bodies[k].axis.dot(nn);

        f_child = f;
        n_child = nn;
        p_child = bodies[k].p;
    }
    return tau + tau_ext;
}

VecX inverse_dynamics(const RobotModel& model, const JointState& state, const VecX& qdd) {
    return inverse_dynamics(model, state, qdd, VecX::Zero(model.n()));
}

VecX bias_torque(const RobotModel& model, const VecX& q, const VecX& qd) {
    return inverse_dynamics(model, JointState(q, qd), VecX::Zero(model.n()));
}

VecX gravity_vector(const RobotModel& model, const VecX& q) {
    return bias_torque(model, q, VecX::Zero(model.n()));
}

MatX mass_matrix(const RobotModel& model, const VecX& q) {
    const int n = model.n();
    const auto bodies = body_kinematics(model, q);

    // Composite body distal of each joint: mass, com, inertia about the com.
    double m_c = 0.0;
    Vec3 com_c = Vec3::Zero();
    Mat3 I_c = Mat3::Zero();
    auto shift = [](const Mat3& I_com, double m, const Vec3& d) {
        return Mat3(I_com + m * (d.squaredNorm() * Mat3::Identity() - d * d.transpose()));
    };

    MatX M = MatX::Zero(n, n);
    for (int k = n - 1; k >= 0; --k) {
        const double m_new = m_c + bodies[k].mass;
        const Vec3 com_new = (m_c * com_c + bodies[k].mass * bodies[k].com) / m_new;
        I_c = shift(I_c, m_c, com_c - com_new) +
              shift(bodies[k].I_w, bodies[k].mass, bodies[k].com - com_new);
        m_c = m_new;
        com_c = com_new;

        // Unit acceleration of joint k acting on the composite.
        const Vec3 alpha = bodies[k].axis;
        const Vec3 a_com = alpha.cross(com_c - bodies[k].p);
        const Vec3 F = m_c * a_com;
        const Vec3 N = I_c * alpha;
        for (int j = k; j >= 0; --j) {
            M(j, k) = bodies[j].axis.dot(N + (com_c - bodies[j].p).cross(F));
            M(k, j) = M(j, k);
        }
    }
    return M;
}

MatX coriolis_matrix(const RobotModel& model, const VecX& q, const VecX& qd,
                     double fd_step) {
    const int n = model.n();
    std::vector<MatX> dM(n);
    VecX qp = q;
    for (int k = 0; k < n; ++k) {
        qp[k] = q[k] + fd_step;
        const MatX Mp = mass_matrix(model, qp);
        qp[k] = q[k] - fd_step;
        const MatX Mm = mass_matrix(model, qp);
        qp[k] = q[k];
        dM[k] = (Mp - Mm) / (2.0 * fd_step);
    }
    MatX C = MatX::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double cij = 0.0;
            for (int k = 0; k < n; ++k) {
                cij += (dM[k](i, j) + dM[j](i, k) - dM[i](j, k)) * qd[k];
            }
            C(i, j) = 0.5 * cij;
        }
    }
    return C;
}

double potential_energy(const RobotModel& model, const VecX& q) {
    const auto bodies = body_kinematics(model, q);
    double U = -model.base().mass * model.gravity().dot(model.base().com);
    for (const auto& b : bodies) {
        U -= b.mass * model.gravity().dot(b.com);
    }
    return U;
}

double kinetic_energy(const RobotModel& model, const VecX& q, const VecX& qd) {
    return 0.5 * qd.dot(mass_matrix(model, q) * qd);
}

RobotModel scale_inertial(const RobotModel& model, const VecX& lambda) {
    const int n = model.n();
    if (lambda.size() != n + 1) {
        throw ValidationError("scale_inertial: expected " + std::to_string(n + 1) +
                              " coefficients, got " + std::to_string(lambda.size()));
    }
    LinkParams base = model.base();
    base.mass *= lambda[0];
    base.inertia *= lambda[0];
    std::vector<LinkParams> links;
    std::vector<JointParams> joints;
    links.reserve(n);
    joints.reserve(n);
    for (int k = 0; k < n; ++k) {
        LinkParams l = model.link(k);
        l.mass *= lambda[k + 1];
        l.inertia *= lambda[k + 1];
        links.push_back(std::move(l));
        joints.push_back(model.joint(k));
    }
    return RobotModel(model.name(), std::move(base), std::move(joints), std::move(links),
                      model.end_effector(), model.gravity());
}

} // namespace cobot
