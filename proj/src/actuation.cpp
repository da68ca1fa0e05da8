#include "cobot/actuation.hpp"

#include <cmath>
#include <utility>

#include "cobot/errors.hpp"

namespace cobot {

ActuationSet::ActuationSet(std::vector<JointActuation> joints)
    : joints_(std::move(joints)) {}

double friction_torque(const FrictionParams& p, double qd) {
    if (qd == 0.0) return 0.0;
    const double v = std::abs(qd);
    const double sgn = qd > 0.0 ? 1.0 : -1.0;
    double level = p.coulomb;
    if (v <= p.stribeck_velocity) {
        level += (p.stiction - p.coulomb) * (p.stribeck_velocity - v) /
                 p.stribeck_velocity;
    }
    return sgn * level + p.viscous * qd;
}

double motor_current_derivative(const MotorParams& p, double I, double V,
                                double qd_m) {
    return (V - p.resistance * I - p.back_emf * qd_m) / p.inductance;
}

double motor_torque(const MotorParams& p, double I) {
    return p.torque_constant * I;
}

double transmission_torque(const TransmissionParams& p, double ratio,
                           double q_m, double qd_m, double q, double qd) {
    return p.stiffness * (q_m / ratio - q) + p.damping * (qd_m / ratio - qd);
}

double controller_output(const ControllerParams& p, double integ, double q_err) {
    return p.kp * (p.tz * q_err + integ);
}

double command_voltage(const MotorParams& p, CommandMode mode, double u,
                       double qd_m) {
    if (mode == CommandMode::VoltageCommand) return u;
    return p.resistance * (u / p.torque_constant) + p.back_emf * qd_m;
}

namespace {

void require(bool ok, const std::string& where, const char* what) {
    if (!ok) throw ValidationError(where + ": " + what);
}

} // namespace

void validate_friction(const FrictionParams& p, const std::string& where) {
    require(std::isfinite(p.stiction) && std::isfinite(p.coulomb) &&
                std::isfinite(p.stribeck_velocity) && std::isfinite(p.viscous),
            where, "friction parameters must be finite");
    require(p.coulomb >= 0.0, where, "coulomb level must be >= 0");
    require(p.stiction >= p.coulomb, where, "stiction level must be >= coulomb level");
    require(p.viscous >= 0.0, where, "viscous coefficient must be >= 0");
    require(p.stribeck_velocity > 0.0, where, "stribeck velocity must be > 0");
}

void validate_motor(const MotorParams& p, const std::string& where) {
    require(p.resistance > 0.0, where, "resistance must be > 0");
    require(p.inductance > 0.0, where, "inductance must be > 0");
    require(p.torque_constant > 0.0, where, "torque constant must be > 0");
    require(p.back_emf > 0.0, where, "back-emf constant must be > 0");
    require(p.rotor_inertia > 0.0, where, "rotor inertia must be > 0");
    require(p.ratio > 0.0, where, "transmission ratio must be > 0");
}

void validate_transmission(const TransmissionParams& p, const std::string& where) {
    require(p.stiffness > 0.0, where, "stiffness must be > 0");
    require(p.damping >= 0.0, where, "damping must be >= 0");
}

void validate_controller(const ControllerParams& p, const std::string& where) {
    require(p.kp > 0.0, where, "proportional-integral gain kp must be > 0");
    require(p.tz > 0.0, where, "zero time constant tz must be > 0");
}

void validate_actuation(const ActuationSet& set, int n) {
    if (set.n() != n) {
        throw ValidationError("actuation set has " + std::to_string(set.n()) +
                              " joints, arm has " + std::to_string(n));
    }
    for (int k = 0; k < n; ++k) {
        const std::string where = "joint " + std::to_string(k + 1);
        validate_friction(set.joint(k).friction, where + " friction");
        validate_motor(set.joint(k).motor, where + " motor");
        validate_transmission(set.joint(k).transmission, where + " transmission");
        validate_controller(set.joint(k).controller, where + " controller");
    }
}

MotorParams default_motor(bool wrist) {
    MotorParams p;
    p.resistance = 1.0;
    p.inductance = 1e-3; // 1 ms electrical time constant
    p.torque_constant = 1.0;
    p.back_emf = 1.0;
    p.rotor_inertia = wrist ? 0.1 : 1.0;
    p.ratio = 1.0;
    return p;
}

TransmissionParams default_transmission(bool wrist) {
    TransmissionParams p;
    p.stiffness = wrist ? 1e3 : 1.5e4;
    p.damping = wrist ? 1.0 : 5.0;
    return p;
}

} // namespace cobot
