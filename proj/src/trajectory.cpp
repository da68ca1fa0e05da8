#include "cobot/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "cobot/errors.hpp"

namespace cobot {

ReferenceTrajectory ReferenceTrajectory::from_samples(std::vector<double> t,
                                                      std::vector<VecX> q,
                                                      std::vector<VecX> qd) {
    if (t.size() < 2) throw ValidationError("trajectory needs at least two knots");
    if (t.size() != q.size() || t.size() != qd.size()) {
        throw ValidationError("trajectory knot arrays differ in length");
    }
    const auto dim = q.front().size();
    for (size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i])) throw ValidationError("trajectory time not finite");
        if (i > 0 && t[i] <= t[i - 1]) {
            throw ValidationError("trajectory times must be strictly increasing");
        }
        if (q[i].size() != dim || qd[i].size() != dim) {
            throw ValidationError("trajectory knot dimensions differ");
        }
    }
    ReferenceTrajectory traj;
    traj.t_ = std::move(t);
    traj.q_ = std::move(q);
    traj.qd_ = std::move(qd);
    return traj;
}

void ReferenceTrajectory::sample(double t, VecX& q_ref, VecX& qd_ref) const {
    if (t <= t_.front()) {
        q_ref = q_.front();
        qd_ref = qd_.front();
        return;
    }
    if (t >= t_.back()) {
        q_ref = q_.back();
        qd_ref = qd_.back();
        return;
    }
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const size_t hi = static_cast<size_t>(it - t_.begin());
    const size_t lo = hi - 1;
    const double h = t_[hi] - t_[lo];
    const double s = (t - t_[lo]) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    q_ref = h00 * q_[lo] + h10 * h * qd_[lo] + h01 * q_[hi] + h11 * h * qd_[hi];
    const double d00 = (6 * s2 - 6 * s) / h;
    const double d10 = 3 * s2 - 4 * s + 1;
    const double d01 = (6 * s - 6 * s2) / h;
    const double d11 = 3 * s2 - 2 * s;
    qd_ref = d00 * q_[lo] + d10 * qd_[lo] + d01 * q_[hi] + d11 * qd_[hi];
}

VecX ReferenceTrajectory::position(double t) const {
    VecX q, qd;
    sample(t, q, qd);
    return q;
}

VecX ReferenceTrajectory::velocity(double t) const {
    VecX q, qd;
    sample(t, q, qd);
    return qd;
}

ReferenceTrajectory dwell(const VecX& q0, double duration) {
    if (duration <= 0.0) throw ValidationError("dwell duration must be > 0");
    const VecX zero = VecX::Zero(q0.size());
    return ReferenceTrajectory::from_samples({0.0, duration}, {q0, q0},
                                             {zero, zero});
}

ReferenceTrajectory joint_ramp(const VecX& q0, int joint, double rate,
                               double duration) {
    if (duration <= 0.0) throw ValidationError("ramp duration must be > 0");
    VecX q1 = q0;
    q1[joint] += rate * duration;
    VecX v = VecX::Zero(q0.size());
    v[joint] = rate;
    return ReferenceTrajectory::from_samples({0.0, duration}, {q0, q1}, {v, v});
}

ReferenceTrajectory joint_phases(const VecX& q0, int joint,
                                 const std::vector<MotionPhase>& phases) {
    if (phases.empty()) throw ValidationError("phase list is empty");
    std::vector<double> t{0.0};
    std::vector<VecX> q{q0};
    VecX v0 = VecX::Zero(q0.size());
    std::vector<VecX> qd{v0};
    double pos = q0[joint], vel = 0.0, time = 0.0;
    for (const auto& ph : phases) {
        if (ph.duration <= 0.0) throw ValidationError("phase duration must be > 0");
        pos += vel * ph.duration + 0.5 * ph.accel * ph.duration * ph.duration;
        vel += ph.accel * ph.duration;
        time += ph.duration;
        VecX qk = q0;
        qk[joint] = pos;
        VecX vk = VecX::Zero(q0.size());
        vk[joint] = vel;
        t.push_back(time);
        q.push_back(qk);
        qd.push_back(vk);
    }
    return ReferenceTrajectory::from_samples(std::move(t), std::move(q),
                                             std::move(qd));
}

DisturbanceProfile DisturbanceProfile::zero(int n) {
    DisturbanceProfile p;
    p.n_ = n;
    return p;
}

DisturbanceProfile DisturbanceProfile::from_samples(std::vector<double> t,
                                                    std::vector<VecX> tau,
                                                    double cap) {
    if (t.size() != tau.size() || t.size() < 2) {
        throw ValidationError("disturbance needs matching sample arrays (>= 2)");
    }
    DisturbanceProfile p;
    p.n_ = static_cast<int>(tau.front().size());
    p.cap_ = cap;
    for (size_t i = 0; i < t.size(); ++i) {
        if (i > 0 && t[i] <= t[i - 1]) {
            throw ValidationError("disturbance times must be strictly increasing");
        }
        if (tau[i].size() != p.n_) {
            throw ValidationError("disturbance sample dimensions differ");
        }
        const double peak = tau[i].cwiseAbs().maxCoeff();
        if (peak > cap) {
            throw ValidationError("disturbance magnitude " + std::to_string(peak) +
                                  " Nm exceeds the " + std::to_string(cap) +
                                  " Nm cap");
        }
    }
    p.t_ = std::move(t);
    p.tau_ = std::move(tau);
    return p;
}

VecX DisturbanceProfile::sample(double t) const {
    if (t_.empty() || t < t_.front() || t > t_.back()) return VecX::Zero(n_);
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    if (it == t_.end()) return tau_.back();
    const size_t hi = static_cast<size_t>(it - t_.begin());
    const size_t lo = hi - 1;
    const double s = (t - t_[lo]) / (t_[hi] - t_[lo]);
    return (1.0 - s) * tau_[lo] + s * tau_[hi];
}

DisturbanceProfile multi_sine(int n, int joint,
                              const std::vector<double>& amplitude,
                              const std::vector<double>& omega,
                              const std::vector<double>& phase,
                              double duration, double sample_rate, double cap) {
    if (amplitude.size() != omega.size() || amplitude.size() != phase.size() ||
        amplitude.empty()) {
        throw ValidationError("multi-sine needs matching non-empty component arrays");
    }
    const int samples = static_cast<int>(std::ceil(duration * sample_rate)) + 1;
    std::vector<double> t(samples);
    std::vector<VecX> tau(samples, VecX::Zero(n));
    for (int i = 0; i < samples; ++i) {
        t[i] = i / sample_rate;
        double v = 0.0;
        for (size_t k = 0; k < amplitude.size(); ++k) {
            v += amplitude[k] * std::sin(omega[k] * t[i] + phase[k]);
        }
        tau[i][joint] = v;
    }
    return DisturbanceProfile::from_samples(std::move(t), std::move(tau), cap);
}

} // namespace cobot
