#pragma once

#include <vector>

#include "cobot/types.hpp"

namespace cobot {

// Joint friction: Stribeck band blending linearly from the stiction level
// down to the Coulomb level over [0, stribeck_velocity], plus a viscous term.
struct FrictionParams {
    double stiction = 0.0;          // F_s, Nm
    double coulomb = 0.0;           // F_c, Nm
    double stribeck_velocity = 1.0; // v_s, rad/s; width of the transition band
    double viscous = 0.0;           // F_v, Nm s/rad
};

// DC motor electrical and rotor-side constants.
struct MotorParams {
    double resistance = 1.0;      // R, ohm
    double inductance = 1e-3;     // L, H
    double torque_constant = 1.0; // K_t, Nm/A
    double back_emf = 1.0;        // K_b, V s/rad
    double rotor_inertia = 1.0;   // J_m, kg m^2
    double ratio = 1.0;           // transmission ratio r (motor:link)

    double electrical_time_constant() const { return inductance / resistance; }
};

// Spring-damper coupling between rotor angle (reflected by the ratio) and
// link angle.
struct TransmissionParams {
    double stiffness = 1e4; // K_s, Nm/rad
    double damping = 1.0;   // K_c, Nm s/rad
};

enum class CommandMode {
    TorqueCommand,  // PI output is a motor-torque demand, realized through an
                    // ideal current loop (back-emf feedforward on the voltage)
    VoltageCommand, // PI output drives the armature voltage directly
};

// PI position controller u = kp*tz*err + kp*integral(err).
struct ControllerParams {
    double kp = 1000.0; // integral-path gain
    double tz = 0.1;    // s, zero time constant; kp*tz is the proportional gain
    CommandMode mode = CommandMode::TorqueCommand;
};

struct JointActuation {
    FrictionParams friction;
    MotorParams motor;
    TransmissionParams transmission;
    ControllerParams controller;
};

// Per-joint actuator stacks for a whole arm; immutable after construction.
class ActuationSet {
public:
    ActuationSet() = default;
    explicit ActuationSet(std::vector<JointActuation> joints);

    int n() const { return static_cast<int>(joints_.size()); }
    const JointActuation& joint(int k) const { return joints_.at(k); }
    const std::vector<JointActuation>& joints() const { return joints_; }

private:
    std::vector<JointActuation> joints_;
};

/// Friction torque opposing the motion at link velocity qd. Odd in qd,
/// sign(0) = 0; continuous at |qd| = stribeck_velocity.
double friction_torque(const FrictionParams& p, double qd);

/// dI/dt from the armature circuit: (V - R I - K_b qd_m) / L.
double motor_current_derivative(const MotorParams& p, double I, double V,
                                double qd_m);

/// Motor torque K_t I.
double motor_torque(const MotorParams& p, double I);

/// Spring-damper transmission torque
/// K_s (q_m / r - q) + K_c (qd_m / r - qd), positive when the rotor leads.
double transmission_torque(const TransmissionParams& p, double ratio,
                           double q_m, double qd_m, double q, double qd);

/// PI output for the current integral state (d integ/dt = q_err is owned by
/// the simulator): u = kp*tz*q_err + kp*integ.
double controller_output(const ControllerParams& p, double integ, double q_err);

/// Armature voltage realizing command u. TorqueCommand: back-emf feedforward
/// plus the resistive drop of the target current u / K_t, which turns the
/// electrical pole into a pure first-order lag of tau_m toward u with time
/// constant L / R. VoltageCommand: u verbatim.
double command_voltage(const MotorParams& p, CommandMode mode, double u,
                       double qd_m);

void validate_friction(const FrictionParams& p, const std::string& where);
void validate_motor(const MotorParams& p, const std::string& where);
void validate_transmission(const TransmissionParams& p, const std::string& where);
void validate_controller(const ControllerParams& p, const std::string& where);

/// Checks every joint's parameter block and the set length against the arm.
void validate_actuation(const ActuationSet& set, int n);

/// Drive-train values typical for a desk-scale cobot: stiff main axes, wrist
/// axes one decade lighter; 1 ms electrical pole; unit ratio with motor-side
/// quantities pre-scaled.
MotorParams default_motor(bool wrist);
TransmissionParams default_transmission(bool wrist);

} // namespace cobot
