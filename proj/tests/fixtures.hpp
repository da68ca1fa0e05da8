#pragma once

// Hand-built chains with closed-form dynamics, used as oracles. The analytic
// expressions here are derived independently of the library algorithms.

#include <random>

#include "cobot/types.hpp"

namespace fixtures {

using cobot::JointParams;
using cobot::LinkParams;
using cobot::Mat3;
using cobot::MatX;
using cobot::RobotModel;
using cobot::Vec3;
using cobot::VecX;

// A tiny but valid body; folded into oracles wherever it carries mass.
inline LinkParams ghost_tool(const Vec3& com) {
    LinkParams ee;
    ee.mass = 1e-9;
    ee.com = com;
    ee.inertia = 1e-12 * Mat3::Identity();
    ee.joint_offset = Vec3::Zero();
    return ee;
}

// -------------------------------------------------------------------------
// Point-mass pendulum: axis y, hanging along -z at q = 0, gravity -z.
struct Pendulum {
    double m, l, izz;      // bob mass, arm length, rod inertia about com
    double m_eff, i_eff;   // with the ghost tool folded in
    RobotModel model;

    Pendulum(double mass, double length, double inertia)
        : m(mass), l(length), izz(inertia),
          m_eff(mass + 1e-9), i_eff(inertia + 1e-12), model(build()) {}

    RobotModel build() const {
        LinkParams base;
        base.mass = 1.0;
        base.inertia = 1e-3 * Mat3::Identity();
        base.joint_offset = Vec3::Zero();

        JointParams j;
        j.axis = Vec3::UnitY();
        j.position_min = -10.0;
        j.position_max = 10.0;
        j.velocity_limit = 50.0;

        LinkParams link;
        link.mass = m;
        link.com = Vec3(0, 0, -l);
        link.inertia = izz * Mat3::Identity();
        link.joint_offset = Vec3(0, 0, -l);

        return RobotModel("pendulum", base, {j}, {link},
                          ghost_tool(Vec3(0, 0, 0)), Vec3(0, 0, -9.81));
    }

    double mass_matrix() const { return m_eff * l * l + i_eff; }
    double gravity(double q) const { return 9.81 * m_eff * l * std::sin(q); }
    double torque(double q, double qd, double qdd) const {
        (void)qd; // no Coriolis with one joint
        return mass_matrix() * qdd + gravity(q);
    }
};

// -------------------------------------------------------------------------
// Planar 2R arm: both axes z, motion in the xy plane, gravity -y.
struct TwoLink {
    double m1, m2, l1, l2, lc1, lc2, i1, i2;
    double m2e, i2e; // link 2 with ghost tool folded in
    RobotModel model;

    TwoLink()
        : m1(3.1), m2(1.7), l1(0.45), l2(0.33), lc1(0.21), lc2(0.17),
          i1(0.062), i2(0.018), m2e(m2 + 1e-9), i2e(i2 + 1e-12), model(build()) {}

    RobotModel build() const {
        LinkParams base;
        base.mass = 2.0;
        base.inertia = 1e-3 * Mat3::Identity();

        JointParams jz;
        jz.axis = Vec3::UnitZ();
        jz.position_min = -10.0;
        jz.position_max = 10.0;
        jz.velocity_limit = 50.0;

        LinkParams link1;
        link1.mass = m1;
        link1.com = Vec3(lc1, 0, 0);
        link1.inertia = i1 * Mat3::Identity();
        link1.joint_offset = Vec3(l1, 0, 0);

        LinkParams link2;
        link2.mass = m2;
        link2.com = Vec3(lc2, 0, 0);
        link2.inertia = i2 * Mat3::Identity();
        link2.joint_offset = Vec3(l2, 0, 0);

        // Ghost tool placed exactly on link 2's com so the composite com is
        // unchanged and the oracle stays closed form.
        return RobotModel("two_link", base, {jz, jz}, {link1, link2},
                          ghost_tool(Vec3(lc2 - l2, 0, 0)), Vec3(0, -9.81, 0));
    }

    MatX mass_matrix(const VecX& q) const {
        const double c2 = std::cos(q[1]);
        MatX M(2, 2);
        M(0, 0) = i1 + i2e + m1 * lc1 * lc1 +
                  m2e * (l1 * l1 + lc2 * lc2 + 2 * l1 * lc2 * c2);
        M(0, 1) = i2e + m2e * (lc2 * lc2 + l1 * lc2 * c2);
        M(1, 0) = M(0, 1);
        M(1, 1) = i2e + m2e * lc2 * lc2;
        return M;
    }

    MatX coriolis(const VecX& q, const VecX& qd) const {
        const double h = -m2e * l1 * lc2 * std::sin(q[1]);
        MatX C(2, 2);
        C(0, 0) = h * qd[1];
        C(0, 1) = h * (qd[0] + qd[1]);
        C(1, 0) = -h * qd[0];
        C(1, 1) = 0.0;
        return C;
    }

    VecX gravity(const VecX& q) const {
        const double g = 9.81;
        VecX gv(2);
        gv[0] = (m1 * lc1 + m2e * l1) * g * std::cos(q[0]) +
                m2e * lc2 * g * std::cos(q[0] + q[1]);
        gv[1] = m2e * lc2 * g * std::cos(q[0] + q[1]);
        return gv;
    }

    VecX torque(const VecX& q, const VecX& qd, const VecX& qdd) const {
        return mass_matrix(q) * qdd + coriolis(q, qd) * qd + gravity(q);
    }
};

// -------------------------------------------------------------------------
// Random valid chain for property tests.
inline RobotModel random_chain(int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto vec = [&](double s) { return Vec3(s * u(rng), s * u(rng), s * u(rng)); };

    auto body = [&]() {
        LinkParams l;
        l.mass = 0.5 + 2.5 * std::abs(u(rng));
        l.com = vec(0.15);
        // principal moments obeying the triangle inequality, random axes
        const double a = 0.01 + 0.04 * std::abs(u(rng));
        const double b = 0.01 + 0.04 * std::abs(u(rng));
        std::uniform_real_distribution<double> uc(std::abs(a - b) * 1.01, (a + b) * 0.99);
        const double c = uc(rng);
        Eigen::Quaterniond quat(u(rng), u(rng), u(rng), u(rng));
        quat.normalize();
        const Mat3 R = quat.toRotationMatrix();
        l.inertia = R * Vec3(a, b, c).asDiagonal() * R.transpose();
        l.joint_offset = vec(0.3);
        return l;
    };

    LinkParams base = body();
    std::vector<JointParams> joints(n);
    std::vector<LinkParams> links(n);
    for (int k = 0; k < n; ++k) {
        JointParams j;
        j.axis = vec(1.0);
        while (j.axis.norm() < 0.2) j.axis = vec(1.0);
        j.axis.normalize();
        j.position_min = -3.0;
        j.position_max = 3.0;
        j.velocity_limit = 10.0;
        joints[k] = j;
        links[k] = body();
    }
    LinkParams ee = body();
    ee.mass = 0.3;
    return RobotModel("random_chain", base, joints, links, ee, Vec3(0, 0, -9.81));
}

inline VecX random_config(const RobotModel& model, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    VecX q(model.n());
    for (int k = 0; k < model.n(); ++k) q[k] = u(rng);
    return q;
}

} // namespace fixtures
