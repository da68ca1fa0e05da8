#include "cobot/sim.hpp"

#include <cmath>
#include <cstdio>

#include "cobot/dynamics.hpp"
#include "cobot/errors.hpp"
#include "cobot/kinematics.hpp"

namespace cobot {

namespace {

VecX transmission_torques(const ActuationSet& act, const SimState& s) {
    const int n = static_cast<int>(s.q.size());
    VecX tau(n);
    for (int k = 0; k < n; ++k) {
        const auto& a = act.joint(k);
        tau[k] = transmission_torque(a.transmission, a.motor.ratio, s.q_m[k],
                                     s.qd_m[k], s.q[k], s.qd[k]);
    }
    return tau;
}

VecX friction_torques(const ActuationSet& act, const VecX& qd) {
    VecX tau(qd.size());
    for (int k = 0; k < qd.size(); ++k) {
        tau[k] = friction_torque(act.joint(k).friction, qd[k]);
    }
    return tau;
}

SimState add_scaled(const SimState& base, const SimState& d, double a) {
    SimState out = base;
    out.q += a * d.q;
    out.qd += a * d.qd;
    out.q_m += a * d.q_m;
    out.qd_m += a * d.qd_m;
    out.I += a * d.I;
    out.integ += a * d.integ;
    out.t = base.t + a;
    return out;
}

void check_divergence(const SimState& s, double cap) {
    const struct {
        const char* name;
        const VecX* v;
    } fields[] = {{"q", &s.q},     {"qd", &s.qd}, {"q_m", &s.q_m},
                  {"qd_m", &s.qd_m}, {"I", &s.I},   {"integ", &s.integ}};
    for (const auto& f : fields) {
        for (int k = 0; k < f.v->size(); ++k) {
            const double x = (*f.v)[k];
            if (!(std::abs(x) <= cap)) {
                char buf[160];
                std::snprintf(buf, sizeof(buf),
                              "simulation diverged at t = %.6f s: |%s[%d]| = "
                              "%.3e exceeds %.1e",
                              s.t, f.name, k + 1, x, cap);
                throw SimDivergedError(buf);
            }
        }
    }
}

} // namespace

SimState state_derivative(const RobotModel& model, const ActuationSet& act,
                          const SimState& s, const VecX& q_ref,
                          const VecX& tau_ext) {
    const int n = model.n();
    SimState d(n);

    const VecX tau_trans = transmission_torques(act, s);
    const VecX tau_f = friction_torques(act, s.qd);

    VecX tau_m(n);
    for (int k = 0; k < n; ++k) {
        const auto& a = act.joint(k);
        const double q_err = q_ref[k] - s.q[k];
        const double u = controller_output(a.controller, s.integ[k], q_err);
        const double V =
            command_voltage(a.motor, a.controller.mode, u, s.qd_m[k]);
        tau_m[k] = motor_torque(a.motor, s.I[k]);
        d.I[k] = motor_current_derivative(a.motor, s.I[k], V, s.qd_m[k]);
        d.qd_m[k] = (tau_m[k] - tau_trans[k] / a.motor.ratio) /
                    a.motor.rotor_inertia;
        d.integ[k] = q_err;
    }

    const VecX rhs =
        tau_trans - bias_torque(model, s.q, s.qd) - tau_f - tau_ext;
    d.qd = mass_matrix(model, s.q).ldlt().solve(rhs);
    d.q = s.qd;
    d.q_m = s.qd_m;
    d.t = 1.0;
    return d;
}

SimState init_state(const RobotModel& model, const ActuationSet& act,
                    const VecX& q0, bool preload) {
    const int n = model.n();
    for (int k = 0; k < n; ++k) {
        const auto& j = model.joint(k);
        if (q0[k] < j.position_min || q0[k] > j.position_max) {
            throw ValidationError("initial pose violates the position limits of joint " +
                                  std::to_string(k + 1));
        }
    }
    SimState s(n);
    s.q = q0;
    const VecX g0 = gravity_vector(model, q0);
    for (int k = 0; k < n; ++k) {
        const auto& a = act.joint(k);
        // Wind the transmission up so the spring already carries gravity.
        s.q_m[k] = a.motor.ratio * (q0[k] + g0[k] / a.transmission.stiffness);
        if (preload) {
            const double tau_m = g0[k] / a.motor.ratio;
            s.I[k] = tau_m / a.motor.torque_constant;
            const double u = a.controller.mode == CommandMode::TorqueCommand
                                 ? tau_m
                                 : a.motor.resistance * s.I[k];
            s.integ[k] = u / a.controller.kp;
        }
    }
    return s;
}

SimState steady_slide_state(const RobotModel& model, const ActuationSet& act,
                            int joint, const VecX& q0, double rate) {
    const int n = model.n();
    VecX qd = VecX::Zero(n);
    qd[joint] = rate;

    VecX q_act = q0;
    VecX tau_trans(n), dtau_trans(n), tau_m(n), dtau_m(n), u(n), q_err(n);
    const double h = 1e-5;
    for (int pass = 0; pass < 2; ++pass) {
        tau_trans = bias_torque(model, q_act, qd) + friction_torques(act, qd);
        VecX qp = q_act, qm = q_act;
        qp[joint] += h;
        qm[joint] -= h;
        dtau_trans = rate *
                     (bias_torque(model, qp, qd) - bias_torque(model, qm, qd)) /
                     (2.0 * h);
        for (int k = 0; k < n; ++k) {
            const auto& a = act.joint(k);
            tau_m[k] = tau_trans[k] / a.motor.ratio;
            dtau_m[k] = dtau_trans[k] / a.motor.ratio;
            const double te = a.motor.electrical_time_constant();
            if (a.controller.mode == CommandMode::TorqueCommand) {
                // Command leads the lagged torque by one electrical pole.
                u[k] = tau_m[k] + te * dtau_m[k];
                q_err[k] = dtau_m[k] / a.controller.kp;
            } else {
                const double I0 = tau_m[k] / a.motor.torque_constant;
                const double dI = dtau_m[k] / a.motor.torque_constant;
                const double qd_m = a.motor.ratio *
                                    (qd[k] + dtau_trans[k] / a.transmission.stiffness);
                u[k] = a.motor.resistance * I0 + a.motor.back_emf * qd_m +
                       a.motor.inductance * dI;
                q_err[k] = a.motor.resistance * dI / a.controller.kp;
            }
        }
        q_act = q0 - q_err;
    }

    SimState s(n);
    s.q = q_act;
    s.qd = qd;
    for (int k = 0; k < n; ++k) {
        const auto& a = act.joint(k);
        s.qd_m[k] = a.motor.ratio *
                    (qd[k] + dtau_trans[k] / a.transmission.stiffness);
        const double damper = a.transmission.damping *
                              (s.qd_m[k] / a.motor.ratio - qd[k]);
        s.q_m[k] = a.motor.ratio *
                   (q_act[k] + (tau_trans[k] - damper) / a.transmission.stiffness);
        s.I[k] = tau_m[k] / a.motor.torque_constant;
        s.integ[k] = u[k] / a.controller.kp - a.controller.tz * q_err[k];
    }
    return s;
}

namespace {

void record_sample(const RobotModel& model, const ActuationSet& act,
                   const ReferenceTrajectory& traj,
                   const DisturbanceProfile& dist, const SimState& s,
                   double t_nominal, int row, SimLog& log) {
    const int n = model.n();
    log.t[row] = t_nominal;
    log.q.row(row) = s.q.transpose();
    log.qd.row(row) = s.qd.transpose();
    log.q_m.row(row) = s.q_m.transpose();
    log.qd_m.row(row) = s.qd_m.transpose();
    log.I.row(row) = s.I.transpose();
    const VecX tau_trans = transmission_torques(act, s);
    const VecX tau_f = friction_torques(act, s.qd);
    log.tau_trans.row(row) = tau_trans.transpose();
    log.tau_f.row(row) = tau_f.transpose();
    for (int k = 0; k < n; ++k) {
        log.tau_m(row, k) = motor_torque(act.joint(k).motor, s.I[k]);
    }
    log.tau_ext.row(row) = dist.sample(t_nominal).transpose();
    log.q_ref.row(row) = traj.position(t_nominal).transpose();
    log.tcp.row(row) = forward_kinematics(model, s.q).back().p.transpose();
}

void rk4_step(const RobotModel& model, const ActuationSet& act, SimState& s,
              const ReferenceTrajectory& traj, const DisturbanceProfile& dist,
              double dt) {
    VecX q_ref, qd_ref;
    traj.sample(s.t, q_ref, qd_ref);
    const SimState k1 = state_derivative(model, act, s, q_ref, dist.sample(s.t));

    const double t_half = s.t + 0.5 * dt;
    traj.sample(t_half, q_ref, qd_ref);
    const VecX ext_half = dist.sample(t_half);
    const SimState k2 =
        state_derivative(model, act, add_scaled(s, k1, 0.5 * dt), q_ref, ext_half);
    const SimState k3 =
        state_derivative(model, act, add_scaled(s, k2, 0.5 * dt), q_ref, ext_half);

    const double t_full = s.t + dt;
    traj.sample(t_full, q_ref, qd_ref);
    const SimState k4 =
        state_derivative(model, act, add_scaled(s, k3, dt), q_ref, dist.sample(t_full));

    const double w = dt / 6.0;
    s.q += w * (k1.q + 2 * k2.q + 2 * k3.q + k4.q);
    s.qd += w * (k1.qd + 2 * k2.qd + 2 * k3.qd + k4.qd);
    s.q_m += w * (k1.q_m + 2 * k2.q_m + 2 * k3.q_m + k4.q_m);
    s.qd_m += w * (k1.qd_m + 2 * k2.qd_m + 2 * k3.qd_m + k4.qd_m);
    s.I += w * (k1.I + 2 * k2.I + 2 * k3.I + k4.I);
    s.integ += w * (k1.integ + 2 * k2.integ + 2 * k3.integ + k4.integ);
    s.t = t_full;
}

void semi_implicit_step(const RobotModel& model, const ActuationSet& act,
                        SimState& s, const ReferenceTrajectory& traj,
                        const DisturbanceProfile& dist, double dt) {
    const int n = model.n();
    VecX q_ref, qd_ref;
    traj.sample(s.t, q_ref, qd_ref);
    const VecX tau_ext = dist.sample(s.t);

    const VecX tau_trans = transmission_torques(act, s);
    const VecX tau_f = friction_torques(act, s.qd);
    const VecX q_err = q_ref - s.q;

    // Electrical pole integrated exactly against frozen inputs; stiffest
    // time scale handled unconditionally stably.
    VecX tau_m(n);
    for (int k = 0; k < n; ++k) {
        const auto& a = act.joint(k);
        const double u = controller_output(a.controller, s.integ[k], q_err[k]);
        const double te = a.motor.electrical_time_constant();
        double I_ss;
        if (a.controller.mode == CommandMode::TorqueCommand) {
            I_ss = u / a.motor.torque_constant;
        } else {
            I_ss = (u - a.motor.back_emf * s.qd_m[k]) / a.motor.resistance;
        }
        s.I[k] = I_ss + (s.I[k] - I_ss) * std::exp(-dt / te);
        tau_m[k] = motor_torque(a.motor, s.I[k]);
    }

    const VecX rhs = tau_trans - bias_torque(model, s.q, s.qd) - tau_f - tau_ext;
    const VecX qdd = mass_matrix(model, s.q).ldlt().solve(rhs);
    for (int k = 0; k < n; ++k) {
        const auto& a = act.joint(k);
        s.qd_m[k] += dt * (tau_m[k] - tau_trans[k] / a.motor.ratio) /
                     a.motor.rotor_inertia;
    }
    s.qd += dt * qdd;
    // Positions advance with the updated rates (symplectic ordering).
    s.q += dt * s.qd;
    s.q_m += dt * s.qd_m;
    s.integ += dt * q_err;
    s.t += dt;
}

} // namespace

SimLog integrate_from(const RobotModel& model, const ActuationSet& act,
                      SimState s0, const ReferenceTrajectory& traj,
                      const DisturbanceProfile& dist, const SimOptions& opts) {
    const int n = model.n();
    validate_actuation(act, n);
    if (traj.n() != n) throw ValidationError("trajectory dimension mismatch");
    if (dist.n() != n) throw ValidationError("disturbance dimension mismatch");
    if (opts.dt <= 0.0 || opts.log_rate <= 0.0) {
        throw ValidationError("step size and log rate must be > 0");
    }

    const double period = 1.0 / opts.log_rate;
    const int substeps = std::max(1, static_cast<int>(std::ceil(period / opts.dt - 1e-9)));
    const double dt = period / substeps;

    const double horizon = traj.end_time() - s0.t;
    if (horizon < 0.0) throw ValidationError("initial state starts past the trajectory end");
    const int logged_periods = static_cast<int>(std::floor(horizon / period + 1e-9));

    SimLog log;
    log.sample_rate = opts.log_rate;
    const int rows = logged_periods + 1;
    log.t.resize(rows);
    log.q.resize(rows, n);
    log.qd.resize(rows, n);
    log.q_m.resize(rows, n);
    log.qd_m.resize(rows, n);
    log.I.resize(rows, n);
    log.tau_m.resize(rows, n);
    log.tau_f.resize(rows, n);
    log.tau_trans.resize(rows, n);
    log.tau_ext.resize(rows, n);
    log.q_ref.resize(rows, n);
    log.tcp.resize(rows, 3);

    SimState s = std::move(s0);
    const double t0 = s.t;
    record_sample(model, act, traj, dist, s, t0, 0, log);

    for (int m = 1; m <= logged_periods; ++m) {
        for (int k = 0; k < substeps; ++k) {
            if (opts.method == IntegrationMethod::RungeKutta4) {
                rk4_step(model, act, s, traj, dist, dt);
            } else {
                semi_implicit_step(model, act, s, traj, dist, dt);
            }
        }
        // Pin time to the sample grid; prevents drift over long runs.
        s.t = t0 + m * period;
        check_divergence(s, opts.divergence_cap);
        record_sample(model, act, traj, dist, s, s.t, m, log);
    }

    // Trailing fraction of a period: simulated so the state reaches the
    // trajectory end, but not logged (the grid stays uniform).
    const double remainder = horizon - logged_periods * period;
    if (remainder > 1e-9) {
        const int extra = static_cast<int>(std::ceil(remainder / dt - 1e-9));
        const double dt_r = remainder / extra;
        for (int k = 0; k < extra; ++k) {
            if (opts.method == IntegrationMethod::RungeKutta4) {
                rk4_step(model, act, s, traj, dist, dt_r);
            } else {
                semi_implicit_step(model, act, s, traj, dist, dt_r);
            }
        }
        check_divergence(s, opts.divergence_cap);
    }
    return log;
}

SimLog integrate(const RobotModel& model, const ActuationSet& act,
                 const ReferenceTrajectory& traj,
                 const DisturbanceProfile& dist, const SimOptions& opts) {
    SimState s0 = init_state(model, act, traj.position(traj.start_time()), true);
    s0.t = traj.start_time();
    return integrate_from(model, act, std::move(s0), traj, dist, opts);
}

} // namespace cobot
