#pragma once

#include <vector>

#include "cobot/types.hpp"

namespace cobot {

// Joint-space reference as (time, position, velocity) knots with cubic
// Hermite interpolation. Exact for piecewise-quadratic motion whenever the
// knots sit on the segment boundaries.
class ReferenceTrajectory {
public:
    static ReferenceTrajectory from_samples(std::vector<double> t,
                                            std::vector<VecX> q,
                                            std::vector<VecX> qd);

    int n() const { return q_.empty() ? 0 : static_cast<int>(q_.front().size()); }
    double start_time() const { return t_.front(); }
    double end_time() const { return t_.back(); }
    double duration() const { return t_.back() - t_.front(); }

    /// Interpolated reference; clamps to the end knots outside the range.
    void sample(double t, VecX& q_ref, VecX& qd_ref) const;
    VecX position(double t) const;
    VecX velocity(double t) const;

    const std::vector<double>& knot_times() const { return t_; }

private:
    std::vector<double> t_;
    std::vector<VecX> q_;
    std::vector<VecX> qd_;
};

/// Constant hold at q0 for the given duration.
ReferenceTrajectory dwell(const VecX& q0, double duration);

/// Constant-rate sweep of one joint starting at q0, others held.
ReferenceTrajectory joint_ramp(const VecX& q0, int joint, double rate,
                               double duration);

// One constant-acceleration segment of a single-joint profile.
struct MotionPhase {
    double duration; // s
    double accel;    // rad/s^2 applied to the moving joint
};

/// Piecewise-constant-acceleration profile for one joint, starting at rest at
/// q0; knots are placed exactly on phase boundaries so interpolation
/// reproduces the quadratic arcs.
ReferenceTrajectory joint_phases(const VecX& q0, int joint,
                                 const std::vector<MotionPhase>& phases);

// Per-joint external torque over time, stored as piecewise-linear samples and
// zero outside the sampled range. A magnitude cap (default 15 Nm) mimics the
// supervisory trip level of a collaborative arm.
class DisturbanceProfile {
public:
    static DisturbanceProfile zero(int n);
    static DisturbanceProfile from_samples(std::vector<double> t,
                                           std::vector<VecX> tau,
                                           double cap = 15.0);

    int n() const { return n_; }
    double cap() const { return cap_; }
    VecX sample(double t) const;

private:
    int n_ = 0;
    double cap_ = 15.0;
    std::vector<double> t_;
    std::vector<VecX> tau_;
};

/// Sum of sinusoids injected on a single joint: sum_k amplitude[k] *
/// sin(omega[k] t + phase[k]); rejected if the peak exceeds the cap.
DisturbanceProfile multi_sine(int n, int joint,
                              const std::vector<double>& amplitude,
                              const std::vector<double>& omega,
                              const std::vector<double>& phase,
                              double duration, double sample_rate = 500.0,
                              double cap = 15.0);

} // namespace cobot
