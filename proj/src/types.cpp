#include "cobot/types.hpp"

#include <cmath>

namespace cobot {

namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

} // namespace

void validate_link(const LinkParams& link, const std::string& where) {
    if (!(link.mass > 0.0) || !std::isfinite(link.mass)) {
        throw ValidationError(where + ": mass must be positive, got " +
                              std::to_string(link.mass));
    }
    if (!finite(link.com) || !finite(link.joint_offset) || !link.inertia.allFinite()) {
        throw ValidationError(where + ": non-finite geometry");
    }
    const Mat3& I = link.inertia;
    if ((I - I.transpose()).norm() > 1e-9 * std::max(1.0, I.norm())) {
        throw ValidationError(where + ": inertia tensor not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(I);
    const Vec3 ev = es.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    if (ev.minCoeff() <= -1e-12 * scale) {
        throw ValidationError(where + ": inertia tensor not positive definite");
    }
    // Principal moments of a real body obey the triangle inequality.
    const double slack = 1e-9 * scale;
    if (ev[0] + ev[1] < ev[2] - slack) {
        throw ValidationError(where + ": inertia eigenvalues violate the triangle inequality");
    }
}

void validate_joint(const JointParams& joint, const std::string& where) {
    if (!finite(joint.axis)) {
        throw ValidationError(where + ": non-finite axis");
    }
    if (std::abs(joint.axis.norm() - 1.0) > 1e-9) {
        throw ValidationError(where + ": axis must be a unit vector, norm is " +
                              std::to_string(joint.axis.norm()));
    }
    if (!(joint.position_min < joint.position_max)) {
        throw ValidationError(where + ": position limits must satisfy min < max");
    }
    if (!(joint.velocity_limit > 0.0)) {
        throw ValidationError(where + ": velocity limit must be positive");
    }
}

RobotModel::RobotModel(std::string name,
                       LinkParams base,
                       std::vector<JointParams> joints,
                       std::vector<LinkParams> links,
                       LinkParams end_effector,
                       Vec3 gravity)
    : name_(std::move(name)),
      base_(std::move(base)),
      joints_(std::move(joints)),
      links_(std::move(links)),
      end_effector_(std::move(end_effector)),
      gravity_(std::move(gravity)) {
    validate();
    build_bodies();
}

void RobotModel::validate() const {
    if (joints_.empty()) {
        throw ValidationError("model '" + name_ + "': needs at least one joint");
    }
    if (joints_.size() != links_.size()) {
        throw ValidationError("model '" + name_ + "': " + std::to_string(joints_.size()) +
                              " joints but " + std::to_string(links_.size()) + " links");
    }
    if (!gravity_.allFinite()) {
        throw ValidationError("model '" + name_ + "': non-finite gravity");
    }
    validate_link(base_, "base link");
    for (size_t k = 0; k < joints_.size(); ++k) {
        validate_joint(joints_[k], "joint " + std::to_string(k + 1));
        validate_link(links_[k], "link " + std::to_string(k + 1));
    }
    validate_link(end_effector_, "end effector");
}

void RobotModel::build_bodies() {
    bodies_ = links_;
    // Fold the rigidly attached tool into the last link: same frame, summed
    // mass, combined com, inertias shifted to the combined com.
    LinkParams& last = bodies_.back();
    const LinkParams& ee = end_effector_;
    const Vec3 ee_com = last.joint_offset + ee.com; // ee frame = last frame translated
    const double m_total = last.mass + ee.mass;
    const Vec3 c_total = (last.mass * last.com + ee.mass * ee_com) / m_total;

    auto shift = [](const Mat3& I_com, double m, const Vec3& d) {
        return Mat3(I_com + m * (d.squaredNorm() * Mat3::Identity() - d * d.transpose()));
    };
    const Mat3 I_total = shift(last.inertia, last.mass, last.com - c_total) +
                         shift(ee.inertia, ee.mass, ee_com - c_total);

    last.mass = m_total;
    last.com = c_total;
    last.inertia = I_total;
    // joint_offset of the composite keeps pointing at the tool mount; the
    // tool tip offset stays in end_effector().joint_offset.
}

double RobotModel::arm_mass() const {
    double m = base_.mass;
    for (const auto& l : links_) m += l.mass;
    return m;
}

double RobotModel::total_mass() const { return arm_mass() + end_effector_.mass; }

RobotModel RobotModel::with_gravity(const Vec3& g) const {
    return RobotModel(name_, base_, joints_, links_, end_effector_, g);
}

} // namespace cobot
