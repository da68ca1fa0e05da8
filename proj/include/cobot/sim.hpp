#pragma once

#include "cobot/actuation.hpp"
#include "cobot/trajectory.hpp"
#include "cobot/types.hpp"

namespace cobot {

// Full closed-loop state of an n-joint arm: link side, rotor side, armature
// current and controller integrator (6n scalars), plus time.
struct SimState {
    VecX q;     // rad, link positions
    VecX qd;    // rad/s
    VecX q_m;   // rad, rotor positions
    VecX qd_m;  // rad/s
    VecX I;     // A
    VecX integ; // rad s, PI integral state
    double t = 0.0;

    explicit SimState(int n)
        : q(VecX::Zero(n)), qd(VecX::Zero(n)), q_m(VecX::Zero(n)),
          qd_m(VecX::Zero(n)), I(VecX::Zero(n)), integ(VecX::Zero(n)) {}
};

enum class IntegrationMethod {
    RungeKutta4,  // explicit 4th order, dt around 5e-5 s
    SemiImplicit, // symplectic Euler + exact electrical-pole update, dt up to 1e-3 s
};

struct SimOptions {
    double dt = 5e-5;          // requested step; snapped to divide the log period
    IntegrationMethod method = IntegrationMethod::RungeKutta4;
    double log_rate = 300.0;   // Hz
    double divergence_cap = 1e8;
};

// Uniformly sampled recording of every loop signal; rows are samples,
// columns are joints.
struct SimLog {
    double sample_rate = 0.0; // Hz
    std::vector<double> t;    // s, uniform
    MatX q, qd, q_m, qd_m, I;            // states
    MatX tau_m, tau_f, tau_trans, tau_ext; // torques, Nm
    MatX q_ref;                          // rad
    MatX tcp;                            // m, 3 columns

    int joints() const { return static_cast<int>(q.cols()); }
    int samples() const { return static_cast<int>(t.size()); }
};

/// Time derivative of every state (the t field of the result is unused).
/// Link accelerations solve M(q) qdd = tau_trans - C qd - g - tau_f - tau_ext;
/// rotors follow J_m qdd_m = tau_m - tau_trans / r; the armature and the PI
/// integrator contribute dI/dt and q_err.
SimState state_derivative(const RobotModel& model, const ActuationSet& act,
                          const SimState& s, const VecX& q_ref,
                          const VecX& tau_ext);

/// Rest state at q0 with the transmission wound up against gravity. With
/// preload the integrator and current are set so the loop starts exactly at
/// equilibrium; without it they start at zero and the controller has to pull
/// the arm up itself.
SimState init_state(const RobotModel& model, const ActuationSet& act,
                    const VecX& q0, bool preload);

/// State on the quasi-steady sliding solution for single-joint motion at
/// constant rate (joint at `rate`, others resting): torque balance including
/// friction, first-order corrections for the gravity drift along the sweep
/// (rotor creep, current-lag lead, tracking-error offset). Starting here
/// removes the spin-up transient, which matters below the friction
/// transition band where steady sliding is not self-stabilizing.
SimState steady_slide_state(const RobotModel& model, const ActuationSet& act,
                            int joint, const VecX& q0, double rate);

/// Fixed-step closed-loop integration from an explicit initial state,
/// following the reference until its end time and logging at the configured
/// rate. Throws SimDivergedError naming the first runaway state.
SimLog integrate_from(const RobotModel& model, const ActuationSet& act,
                      SimState s0, const ReferenceTrajectory& traj,
                      const DisturbanceProfile& dist,
                      const SimOptions& opts = {});

/// integrate_from with a preloaded rest start at the reference's first pose.
SimLog integrate(const RobotModel& model, const ActuationSet& act,
                 const ReferenceTrajectory& traj,
                 const DisturbanceProfile& dist, const SimOptions& opts = {});

} // namespace cobot
