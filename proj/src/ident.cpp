#include "cobot/ident.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <Eigen/SVD>
#include <json.hpp>

#include "cobot/dynamics.hpp"
#include "cobot/kinematics.hpp"
#include "cobot/log_io.hpp"

namespace cobot {

namespace {

std::string strf(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    char buf[512];
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    return buf;
}

constexpr double kPi = 3.14159265358979323846;

// Span floor of a friction plateau: twice the default measurement window so
// the central window never touches the ramp transients.
constexpr double kSpanFloor = 0.12;

LinkParams part_to_link(const CadPart& part, double mass) {
    LinkParams link;
    link.mass = mass;
    link.com = part.com;
    link.inertia = mass * part.gyration;
    link.joint_offset = part.joint_offset;
    return link;
}

// First-joint angle at which that joint's own gravity torque vanishes.
// tau_1(q1) is a pure sinusoid (rotating the whole arm about the first axis
// against a fixed gravity vector), so a half-turn bracket always holds a
// root and bisection lands on it to machine precision.
double balance_first_joint(const RobotModel& model, VecX q) {
    auto tau1 = [&](double q1) {
        q(0) = q1;
        return gravity_vector(model, q)(0);
    };
    const auto& jp = model.joint(0);
    for (auto [a, b] : {std::pair{0.0, kPi}, std::pair{-kPi, 0.0}}) {
        double lo = std::max(a, jp.position_min), hi = std::min(b, jp.position_max);
        if (!(lo < hi)) continue;
        double fl = tau1(lo), fh = tau1(hi);
        if (fl * fh > 0.0) continue;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi), fm = tau1(mid);
            if (fl * fm <= 0.0) {
                hi = mid;
            } else {
                lo = mid;
                fl = fm;
            }
        }
        return 0.5 * (lo + hi);
    }
    return std::clamp(0.0, jp.position_min, jp.position_max);
}

// Stacked free columns (base excluded) of the gravity regressor for a pose
// subset; rows are poses x joints.
MatX stacked_regressor(const std::vector<MatX>& blocks, const std::vector<int>& sel) {
    const int n = static_cast<int>(blocks.front().rows());
    MatX a(n * static_cast<int>(sel.size()), blocks.front().cols());
    for (size_t i = 0; i < sel.size(); ++i)
        a.middleRows(n * static_cast<int>(i), n) = blocks[sel[i]];
    return a;
}

std::string weakest_direction_names(const MatX& a) {
    Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeThinV);
    const VecX v = svd.matrixV().col(a.cols() - 1).cwiseAbs();
    const double top = v.maxCoeff();
    std::string names;
    for (int k = 0; k < v.size(); ++k) {
        if (v(k) >= 0.4 * top) {
            if (!names.empty()) names += ", ";
            names += "lambda_" + std::to_string(k + 1);
        }
    }
    return names;
}

struct PlateauRun {
    const SimLog* log = nullptr;
    int first = 0, last = 0; // inclusive sample range
    double speed = 0.0;      // signed, rad/s
    double q_lo = 0.0, q_hi = 0.0;
    bool paired = false;
};

// Maximal constant-speed reference segments of one joint across the logs.
// The reference is piecewise quadratic, so a plateau shows a vanishing
// second difference and a steady nonzero first difference.
std::vector<PlateauRun> plateau_runs(const std::vector<SimLog>& logs, int joint,
                                     double min_seconds) {
    std::vector<PlateauRun> runs;
    for (const auto& log : logs) {
        const int m = log.samples();
        if (m < 3 || joint >= log.joints()) continue;
        const double rate = log.sample_rate;
        auto vel = [&](int i) {
            return 0.5 * rate * (log.q_ref(i + 1, joint) - log.q_ref(i - 1, joint));
        };
        auto acc = [&](int i) {
            return rate * rate *
                   (log.q_ref(i + 1, joint) - 2.0 * log.q_ref(i, joint) +
                    log.q_ref(i - 1, joint));
        };
        const int min_len = std::max(3, static_cast<int>(min_seconds * rate));
        int start = -1;
        double v_ref = 0.0;
        auto flush = [&](int end) {
            if (start < 0) return;
            if (end - start + 1 >= min_len) {
                PlateauRun r;
                r.log = &log;
                r.first = start;
                r.last = end;
                r.speed = v_ref;
                r.q_lo = r.q_hi = log.q_ref(start, joint);
                for (int i = start; i <= end; ++i) {
                    r.q_lo = std::min(r.q_lo, log.q_ref(i, joint));
                    r.q_hi = std::max(r.q_hi, log.q_ref(i, joint));
                }
                runs.push_back(r);
            }
            start = -1;
        };
        for (int i = 1; i + 1 < m; ++i) {
            const double v = vel(i);
            const bool flat = std::abs(acc(i)) < 1e-6 && std::abs(v) > 1e-7;
            const bool same = start >= 0 && std::abs(v - v_ref) < 1e-6 * std::max(1.0, std::abs(v_ref));
            if (flat && (start < 0 || same)) {
                if (start < 0) {
                    start = i;
                    v_ref = v;
                }
            } else {
                flush(i - 1);
                if (flat) {
                    start = i;
                    v_ref = v;
                }
            }
        }
        flush(m - 2);
    }
    return runs;
}

// Mean of tau_m over the samples whose logged position sits inside the
// window. Window on position, not velocity: the logged velocity aliases the
// fast stick-slip chatter of the loop while the position stays clean.
double window_mean(const PlateauRun& r, int joint, double center, double width,
                   int min_samples, int* count_out) {
    double sum = 0.0;
    int count = 0;
    for (int i = r.first; i <= r.last; ++i) {
        if (std::abs(r.log->q(i, joint) - center) > 0.5 * width) continue;
        sum += r.log->tau_m(i, joint);
        ++count;
    }
    if (count_out) *count_out = count;
    if (count < min_samples) {
        throw IdentDataError(strf(
            "plateau window at %.4f rad/s holds %d samples, need %d; lengthen the "
            "plateau or widen the window",
            std::abs(r.speed), count, min_samples));
    }
    return sum / count;
}

// Friction magnitude predicted by the four-parameter model at speed v > 0.
double friction_level(const FrictionParams& p, double v) {
    return std::abs(friction_torque(p, v));
}

// First-order-hold discretization of a unit first-order lag, exact for
// piecewise-linear input between samples.
void lag_filter(VecX& x, double dt, double tau) {
    if (!(tau > 0.0) || x.size() == 0) return;
    const double al = std::exp(-dt / tau);
    const double r = tau / dt;
    const double c1 = 1.0 - r * (1.0 - al);
    const double c0 = r * (1.0 - al) - al;
    double prev_x = x(0), y = x(0);
    for (int i = 1; i < x.size(); ++i) {
        const double xi = x(i);
        y = al * y + c1 * xi + c0 * prev_x;
        prev_x = xi;
        x(i) = y;
    }
}

VecX default_rest_pose(int n, int joint) {
    VecX pose = VecX::Zero(n);
    if (n == 6) {
        pose << 0.3, -0.45, 0.7, 0.2, 0.55, -0.4;
        // Sweeping joint 2 at the base pose drags its neighbours through
        // stick-slip via the gravity slope; this shape flattens those slopes
        // inside the measurement window.
        if (joint == 1) pose << 0.3, 0.6, 0.3, 0.2, 0.55, -0.4;
    }
    return pose;
}

// One log of an arm resting in torque balance at the pose: every logged
// signal sits exactly on the static equilibrium of the balance model.
SimLog equilibrium_rest_log(const ModelBundle& truth, const VecX& pose, double dwell) {
    const int n = truth.model.n();
    const int m = std::max(2, static_cast<int>(std::llround(dwell * 300.0)));
    const VecX g = gravity_vector(truth.model, pose);
    const Vec3 tip = forward_kinematics(truth.model, pose).back().p;

    SimLog log;
    log.sample_rate = 300.0;
    log.t.resize(m);
    log.q = log.qd = log.q_m = log.qd_m = log.I = MatX::Zero(m, n);
    log.tau_m = log.tau_f = log.tau_trans = log.tau_ext = MatX::Zero(m, n);
    log.q_ref = MatX::Zero(m, n);
    log.tcp = MatX::Zero(m, 3);
    for (int i = 0; i < m; ++i) {
        log.t[i] = i / 300.0;
        for (int j = 0; j < n; ++j) {
            const auto& a = truth.actuation.joint(j);
            const double r = a.motor.ratio;
            log.q(i, j) = log.q_ref(i, j) = pose(j);
            log.tau_trans(i, j) = g(j);
            log.tau_m(i, j) = g(j) / r;
            log.q_m(i, j) = r * (pose(j) + g(j) / a.transmission.stiffness);
            log.I(i, j) = log.tau_m(i, j) / a.motor.torque_constant;
        }
        log.tcp.row(i) = tip.transpose();
    }
    return log;
}

// One quasi-steady slide of a single joint across a symmetric span: torque
// balance with the friction level at the commanded rate. Valid at any speed,
// including below the breakaway band where the discrete closed loop cannot
// hold the slide. Both legs walk the same precomputed position grid (the -v
// leg in reverse), so every position-dependent torque cancels in the pair to
// machine precision.
SimLog equilibrium_slide_log(const ModelBundle& truth, int joint, double rate,
                             const VecX& q0, double span) {
    const int n = truth.model.n();
    const double v = std::abs(rate);
    const int steps = std::max(2, static_cast<int>(std::llround(span * 300.0 / v)));
    const double s = v * steps / 300.0; // snapped to the sample grid
    const int m = steps + 1;

    SimLog log;
    log.sample_rate = 300.0;
    log.t.resize(m);
    log.q = log.qd = log.q_m = log.qd_m = log.I = MatX::Zero(m, n);
    log.tau_m = log.tau_f = log.tau_trans = log.tau_ext = MatX::Zero(m, n);
    log.q_ref = MatX::Zero(m, n);
    log.tcp = MatX::Zero(m, 3);

    VecX q = q0;
    const double f = friction_torque(truth.actuation.joint(joint).friction, rate);
    for (int i = 0; i < m; ++i) {
        log.t[i] = i / 300.0;
        const int k = rate > 0 ? i : steps - i;
        q(joint) = q0(joint) - 0.5 * s + (s * k) / steps;
        const VecX g = gravity_vector(truth.model, q);
        for (int j = 0; j < n; ++j) {
            const auto& a = truth.actuation.joint(j);
            const double r = a.motor.ratio;
            const double qd = (j == joint) ? rate : 0.0;
            const double tau = g(j) + ((j == joint) ? f : 0.0);
            log.q(i, j) = log.q_ref(i, j) = q(j);
            log.qd(i, j) = qd;
            log.tau_trans(i, j) = tau;
            log.tau_f(i, j) = (j == joint) ? f : 0.0;
            log.tau_m(i, j) = tau / r;
            log.q_m(i, j) = r * (q(j) + tau / a.transmission.stiffness);
            log.qd_m(i, j) = r * qd;
            log.I(i, j) = log.tau_m(i, j) / a.motor.torque_constant;
        }
        log.tcp.row(i) = forward_kinematics(truth.model, q).back().p.transpose();
    }
    return log;
}

template <class Fn>
auto run_stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        throw ValidationError(name + ": " + e.what());
    } catch (const IdentDataError& e) {
        throw IdentDataError(name + ": " + e.what());
    } catch (const SimDivergedError& e) {
        throw IdentDataError(name + ": " + e.what());
    }
}

} // namespace

void validate_static_measurement(const StaticMeasurement& m, int n) {
    if (m.q.size() != n || m.tau.size() != n) {
        throw ValidationError(strf("static measurement: expected %d joints, got pose %d / torque %d",
                                   n, static_cast<int>(m.q.size()),
                                   static_cast<int>(m.tau.size())));
    }
    if (!m.q.allFinite() || !m.tau.allFinite()) {
        throw ValidationError("static measurement: non-finite values");
    }
    if (m.dwell < 1.0 - 1e-9) {
        throw ValidationError(strf("static measurement: averaged over %.3f s, need at least 1 s",
                                   m.dwell));
    }
}

VecX uniform_density_masses(const CadExport& cad, double total_mass, double* density) {
    if (cad.parts.empty()) throw ValidationError("cad export: no parts");
    if (!(total_mass > 0.0) || !std::isfinite(total_mass)) {
        throw ValidationError("cad export: total mass must be positive");
    }
    double volume = 0.0;
    for (size_t k = 0; k < cad.parts.size(); ++k) {
        const double v = cad.parts[k].volume;
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ValidationError(strf("cad export: part %zu ('%s') has degenerate volume %g",
                                       k, cad.parts[k].name.c_str(), v));
        }
        volume += v;
    }
    const double rho = total_mass / volume;
    if (density) *density = rho;
    VecX masses(static_cast<int>(cad.parts.size()));
    for (size_t k = 0; k < cad.parts.size(); ++k) {
        masses(static_cast<int>(k)) = rho * cad.parts[k].volume;
    }
    return masses;
}

Step1Result step1_build_model(const CadExport& cad, double total_mass) {
    if (cad.parts.size() != cad.joints.size() + 1) {
        throw ValidationError(strf("cad export: %zu parts need %zu joints, got %zu",
                                   cad.parts.size(), cad.parts.size() - 1,
                                   cad.joints.size()));
    }
    double rho = 0.0;
    const VecX masses = uniform_density_masses(cad, total_mass, &rho);

    const LinkParams base = part_to_link(cad.parts[0], masses(0));
    std::vector<LinkParams> links;
    for (size_t k = 1; k < cad.parts.size(); ++k) {
        links.push_back(part_to_link(cad.parts[k], masses(static_cast<int>(k))));
    }
    const int n = static_cast<int>(cad.joints.size());
    Step1Result out{RobotModel(cad.name, base, cad.joints, links, cad.end_effector,
                               cad.gravity),
                    masses, rho, 3 * n + 3 * static_cast<int>(cad.parts.size()),
                    10 * n};
    return out;
}

void gravity_regressor(const RobotModel& model, const VecX& q, MatX& cols,
                       VecX& tool_col) {
    const int n = model.n();
    if (q.size() != n) {
        throw ValidationError(strf("gravity_regressor: pose has %d entries, model has %d joints",
                                   static_cast<int>(q.size()), n));
    }
    const auto frames = forward_kinematics(model, q);
    const Vec3 g = model.gravity();
    cols = MatX::Zero(n, n + 1); // column 0 is the fixed base: identically zero
    tool_col = VecX::Zero(n);

    std::vector<Vec3> axis(n), origin(n);
    for (int i = 0; i < n; ++i) {
        axis[i] = frames[i].R * model.joint(i).axis;
        origin[i] = frames[i].p;
    }
    auto torque = [&](int i, double mass, const Vec3& p) {
        return -mass * g.dot(axis[i].cross(p - origin[i]));
    };
    for (int k = 0; k < n; ++k) {
        const LinkParams& link = model.link(k);
        const Vec3 p = frames[k].p + frames[k].R * link.com;
        for (int i = 0; i <= k; ++i) cols(i, k + 1) = torque(i, link.mass, p);
    }
    const LinkParams& ee = model.end_effector();
    const Vec3 p_ee = frames[n - 1].p +
                      frames[n - 1].R * (model.link(n - 1).joint_offset + ee.com);
    for (int i = 0; i < n; ++i) tool_col(i) = torque(i, ee.mass, p_ee);
}

std::vector<VecX> static_pose_candidates(const RobotModel& model, int count,
                                         unsigned long long seed) {
    if (count < 1) throw ValidationError("static_pose_candidates: count must be positive");
    const int n = model.n();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    // Level grids on the mid-chain joints spread the regressor directions;
    // the exact values matter less than hitting both gravity signs.
    const double l2[4] = {-1.0, -0.35, 0.35, 1.0};
    const double l3[4] = {-1.1, -0.35, 0.4, 1.1};
    const double l5[4] = {-1.3, -0.45, 0.45, 1.3};
    auto clamp_to = [&](double v, int j) {
        const auto& jp = model.joint(j);
        return std::clamp(v, jp.position_min + 0.05, jp.position_max - 0.05);
    };
    std::vector<VecX> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        VecX q = VecX::Zero(n);
        for (int j = 1; j < n; ++j) q(j) = clamp_to(u(rng), j);
        if (n >= 2) q(1) = clamp_to(l2[i % 4], 1);
        if (n >= 3) q(2) = clamp_to(l3[(i / 4) % 4], 2);
        if (n >= 5) q(4) = clamp_to(l5[(i / 16) % 4], 4);
        if (n > 1) q(0) = balance_first_joint(model, q);
        out.push_back(q);
    }
    return out;
}

std::vector<int> select_static_poses(const RobotModel& model,
                                     const std::vector<VecX>& candidates,
                                     int count, const IdentConfig& config) {
    const int n = model.n();
    if (candidates.empty()) throw ValidationError("select_static_poses: no candidates");
    if (count < 1 || count > static_cast<int>(candidates.size())) {
        throw ValidationError(strf("select_static_poses: count %d outside 1..%zu",
                                   count, candidates.size()));
    }
    std::vector<MatX> blocks;
    blocks.reserve(candidates.size());
    for (size_t c = 0; c < candidates.size(); ++c) {
        const VecX& q = candidates[c];
        if (q.size() != n) {
            throw ValidationError(strf("select_static_poses: candidate %zu has wrong size", c));
        }
        for (int j = 0; j < n; ++j) {
            if (q(j) < model.joint(j).position_min - 1e-9 ||
                q(j) > model.joint(j).position_max + 1e-9) {
                throw ValidationError(strf(
                    "select_static_poses: candidate %zu puts joint %d at %.3f rad, outside [%.3f, %.3f]",
                    c, j + 1, q(j), model.joint(j).position_min,
                    model.joint(j).position_max));
            }
        }
        MatX cols;
        VecX tool;
        gravity_regressor(model, q, cols, tool);
        blocks.push_back(cols.rightCols(n));
    }

    auto smallest_sigma = [&](const std::vector<int>& sel) {
        Eigen::JacobiSVD<MatX> svd(stacked_regressor(blocks, sel));
        return svd.singularValues()(n - 1);
    };

    std::vector<int> sel;
    std::vector<char> used(candidates.size(), 0);
    for (int pick = 0; pick < count; ++pick) {
        int best = -1;
        double best_sigma = -1.0;
        for (size_t c = 0; c < candidates.size(); ++c) {
            if (used[c]) continue;
            sel.push_back(static_cast<int>(c));
            const double s = smallest_sigma(sel);
            sel.pop_back();
            if (s > best_sigma) {
                best_sigma = s;
                best = static_cast<int>(c);
            }
        }
        used[best] = 1;
        sel.push_back(best);
    }

    const MatX stack = stacked_regressor(blocks, sel);
    Eigen::JacobiSVD<MatX> svd(stack);
    const double s_max = svd.singularValues()(0);
    const double s_min = svd.singularValues()(n - 1);
    if (!(s_min > 0.0) || s_max / s_min > config.max_condition) {
        throw ValidationError(strf(
            "static pose set is rank deficient for identification: condition number %.3g "
            "exceeds %.3g; the weakest direction loads %s; add poses where those bodies' "
            "gravity torque varies",
            s_min > 0.0 ? s_max / s_min : std::numeric_limits<double>::infinity(),
            config.max_condition, weakest_direction_names(stack).c_str()));
    }
    return sel;
}

StaticMeasurement average_static_logs(const std::vector<SimLog>& logs,
                                      double gear_ratio) {
    if (logs.empty()) throw IdentDataError("average_static_logs: no logs");
    const int n = logs.front().joints();
    for (const auto& log : logs) {
        if (log.joints() != n || log.samples() < 2) {
            throw IdentDataError("average_static_logs: inconsistent or empty logs");
        }
    }

    bool any_moving = false;
    for (const auto& log : logs) {
        for (int i = 1; i < log.samples() && !any_moving; ++i) {
            any_moving = (log.q_ref.row(i) - log.q_ref.row(i - 1)).cwiseAbs().maxCoeff() > 1e-12;
        }
    }

    StaticMeasurement meas;
    meas.q = VecX::Zero(n);
    meas.tau = VecX::Zero(n);

    if (!any_moving) {
        // Plain rest dwell: every sample is equilibrium data.
        double seconds = 0.0;
        long total = 0;
        for (const auto& log : logs) {
            meas.q += log.q.colwise().sum().transpose();
            meas.tau += log.tau_m.colwise().sum().transpose();
            total += log.samples();
            seconds += log.samples() / log.sample_rate;
        }
        meas.q /= static_cast<double>(total);
        meas.tau *= gear_ratio / static_cast<double>(total);
        meas.dwell = seconds;
        return meas;
    }

    // Sweep-pair form: each joint crosses the pose slowly in both directions;
    // the pair mean cancels the friction each direction carries.
    meas.dwell = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
        auto runs = plateau_runs(logs, j, 0.2);
        std::vector<const PlateauRun*> fwd, bwd;
        for (const auto& r : runs) (r.speed > 0 ? fwd : bwd).push_back(&r);
        if (fwd.empty() || bwd.empty()) {
            // This joint rested throughout: read its pose from any reference.
            meas.q(j) = logs.front().q_ref(0, j);
            double sum = 0.0;
            long cnt = 0;
            for (const auto& log : logs) {
                sum += log.tau_m.col(j).sum();
                cnt += log.samples();
            }
            meas.tau(j) = gear_ratio * sum / static_cast<double>(cnt);
            continue;
        }
        const PlateauRun& f = *fwd.front();
        const PlateauRun& b = *bwd.front();
        const double lo = std::max(f.q_lo, b.q_lo), hi = std::min(f.q_hi, b.q_hi);
        if (!(hi > lo)) throw IdentDataError(strf("sweep pair of joint %d never overlaps", j + 1));
        const double center = 0.5 * (lo + hi), width = 0.5 * (hi - lo);
        int cf = 0, cb = 0;
        const double mf = window_mean(f, j, center, width, 2, &cf);
        const double mb = window_mean(b, j, center, width, 2, &cb);
        meas.q(j) = center;
        meas.tau(j) = gear_ratio * 0.5 * (mf + mb);
        meas.dwell = std::min(meas.dwell, (cf + cb) / logs.front().sample_rate);
    }
    return meas;
}

Step2Result step2_identify_lambda(const RobotModel& model,
                                  const std::vector<StaticMeasurement>& meas,
                                  const IdentConfig& config) {
    const int n = model.n();
    if (meas.empty()) throw IdentDataError("step2: no static measurements");
    for (const auto& m : meas) validate_static_measurement(m, n);

    const int rows = n * static_cast<int>(meas.size());
    MatX a(rows, n);
    VecX b(rows), w(rows);
    for (size_t j = 0; j < meas.size(); ++j) {
        MatX cols;
        VecX tool;
        gravity_regressor(model, meas[j].q, cols, tool);
        const int r0 = n * static_cast<int>(j);
        a.middleRows(r0, n) = cols.rightCols(n);
        b.segment(r0, n) = meas[j].tau - tool - cols.col(0);
        const double samples = std::max(1.0, meas[j].dwell * config.static_sample_rate);
        for (int i = 0; i < n; ++i) {
            // Sigma of one averaged torque channel: relative level over the
            // sample count, floored so noiseless runs stay finite.
            const double sigma = config.noise_level * std::abs(meas[j].tau(i)) /
                                     std::sqrt(samples) +
                                 config.weight_floor;
            w(r0 + i) = 1.0 / sigma;
        }
    }

    const MatX aw = w.asDiagonal() * a;
    const VecX bw = w.asDiagonal() * b;
    Eigen::JacobiSVD<MatX> svd(aw, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double s_max = svd.singularValues()(0);
    const double s_min = svd.singularValues()(n - 1);
    const double cond = s_min > 0.0 ? s_max / s_min : std::numeric_limits<double>::infinity();
    if (!(cond <= config.max_condition)) {
        throw ValidationError(strf(
            "static regressor condition number %.3g exceeds %.3g; the weakest direction "
            "loads %s; add poses where those bodies' gravity torque varies",
            cond, config.max_condition, weakest_direction_names(aw).c_str()));
    }

    const VecX lam_free = svd.solve(bw);
    VecX lambda(n + 1);
    lambda(0) = 1.0; // the base never reaches a joint torque
    lambda.tail(n) = lam_free;

    Step2Result out{lambda, scale_inertial(model, lambda), cond,
                    std::sqrt((a * lam_free - b).squaredNorm() / rows)};
    return out;
}

std::vector<ReferenceTrajectory>
step3_generate_trajectories(const RobotModel& model, int joint,
                            const std::vector<double>& speeds,
                            const VecX& rest_pose, const IdentConfig& config) {
    const int n = model.n();
    if (joint < 0 || joint >= n) throw ValidationError("step3: joint index out of range");
    if (rest_pose.size() != n) throw ValidationError("step3: rest pose has wrong size");
    if (speeds.empty()) throw ValidationError("step3: no speeds requested");
    const auto& jp = model.joint(joint);

    std::vector<ReferenceTrajectory> out;
    for (const double v : speeds) {
        if (!(v > 0.0)) throw ValidationError("step3: speeds must be positive");
        if (v > jp.velocity_limit) {
            throw ValidationError(strf("step3: %.3f rad/s exceeds joint %d velocity limit %.3f",
                                       v, joint + 1, jp.velocity_limit));
        }
        const double a = config.ramp_accel;
        const double hold = std::max({config.plateau_duration, 1.0, kSpanFloor / v});
        const double ta = v / a;
        const double ramp = 0.5 * v * ta; // travel of one speed ramp
        const double span = v * hold;
        const double start = rest_pose(joint) - ramp - 0.5 * span;
        const double top = start + 2.0 * ramp + span;
        if (start < jp.position_min || top > jp.position_max) {
            throw ValidationError(strf(
                "step3: plateau sweep of joint %d covers [%.3f, %.3f] rad, outside [%.3f, %.3f]",
                joint + 1, start, top, jp.position_min, jp.position_max));
        }
        VecX q0 = rest_pose;
        q0(joint) = start;
        out.push_back(joint_phases(q0, joint,
                                   {{ta, a}, {hold, 0.0}, {2.0 * ta, -a}, {hold, 0.0}, {ta, a}}));
    }
    return out;
}

std::vector<FrictionPoint> friction_points_from_logs(const std::vector<SimLog>& logs,
                                                     int joint,
                                                     const IdentConfig& config) {
    auto runs = plateau_runs(logs, joint, 0.2);
    std::vector<FrictionPoint> points;
    for (auto& f : runs) {
        if (f.paired || f.speed <= 0.0) continue;
        for (auto& b : runs) {
            if (b.paired || b.speed >= 0.0) continue;
            if (std::abs(b.speed + f.speed) > 1e-6 * std::max(1e-9, f.speed)) continue;
            const double lo = std::max(f.q_lo, b.q_lo), hi = std::min(f.q_hi, b.q_hi);
            if (!(hi > lo)) continue;
            const double center = 0.5 * (lo + hi);
            const double width = std::min(config.friction_window, 0.9 * (hi - lo));
            const double mf = window_mean(f, joint, center, width,
                                          config.min_window_samples, nullptr);
            const double mb = window_mean(b, joint, center, width,
                                          config.min_window_samples, nullptr);
            f.paired = b.paired = true;
            points.push_back({0.5 * (f.speed - b.speed),
                              0.5 * std::abs(mf - mb) * config.gear_ratio});
            break;
        }
    }
    std::sort(points.begin(), points.end(),
              [](const FrictionPoint& x, const FrictionPoint& y) { return x.speed < y.speed; });
    // Merge repeat campaigns at the same speed.
    std::vector<FrictionPoint> merged;
    for (const auto& p : points) {
        if (!merged.empty() && std::abs(p.speed - merged.back().speed) < 1e-9 * p.speed) {
            merged.back().torque = 0.5 * (merged.back().torque + p.torque);
        } else {
            merged.push_back(p);
        }
    }
    return merged;
}

FrictionCurve fit_friction_curve(std::vector<FrictionPoint> points, int joint,
                                 const IdentConfig& config) {
    std::sort(points.begin(), points.end(),
              [](const FrictionPoint& x, const FrictionPoint& y) { return x.speed < y.speed; });
    for (const auto& p : points) {
        if (!(p.speed > 0.0) || !std::isfinite(p.torque)) {
            throw ValidationError("friction fit: speeds must be positive and torques finite");
        }
    }
    FrictionCurve curve;
    curve.joint = joint;
    curve.points = points;

    if (points.empty()) {
        throw IdentDataError(
            "insufficient plateau coverage: no paired constant-speed passes found");
    }
    if (std::max_element(points.begin(), points.end(),
                         [](const FrictionPoint& x, const FrictionPoint& y) {
                             return x.torque < y.torque;
                         })->torque < config.friction_floor) {
        throw IdentDataError(strf(
            "no friction detected: every plateau torque sits below %.3g Nm", config.friction_floor));
    }

    std::vector<FrictionPoint> low, high;
    for (const auto& p : points) {
        (p.speed <= config.vs_search_bound ? low : high).push_back(p);
    }
    if (points.size() < 4 || high.size() < 2 || low.empty()) {
        throw IdentDataError(strf(
            "insufficient plateau coverage: %zu speeds (%zu above the breakaway bound "
            "%.3g rad/s, %zu below); need 4 total, 2 above, 1 below",
            points.size(), high.size(), config.vs_search_bound, low.size()));
    }

    // Cruise line from the two fastest points.
    const FrictionPoint& p1 = high[high.size() - 2];
    const FrictionPoint& p2 = high[high.size() - 1];
    double fv = (p2.torque - p1.torque) / (p2.speed - p1.speed);
    if (fv < 0.0) fv = 0.0;
    double fc = std::max(0.0, p1.torque - fv * p1.speed);

    // The transition should fall monotonically toward the Coulomb level.
    for (size_t i = 1; i < low.size(); ++i) {
        if (low[i].torque > low[i - 1].torque + 1e-3 + 0.01 * low[i - 1].torque) {
            curve.low_speed_monotonic = false;
        }
    }

    // Knee scan: for each candidate width the stiction level has a closed
    // form; sum of squares over the sub-band points picks the knee, ties
    // toward the smaller width.
    const double v_lo = low.front().speed * 1.02;
    const double v_hi = config.vs_search_bound;
    double best_vs = v_hi, best_fs = fc, best_sse = std::numeric_limits<double>::infinity();
    const int steps = 2000;
    for (int i = 0; i <= steps; ++i) {
        const double vs = v_lo + (v_hi - v_lo) * i / steps;
        double num = 0.0, den = 0.0;
        for (const auto& p : low) {
            if (p.speed >= vs) continue;
            const double wgt = (vs - p.speed) / vs;
            num += wgt * (p.torque - fc - fv * p.speed);
            den += wgt * wgt;
        }
        if (den == 0.0) continue;
        const double fs = fc + std::max(0.0, num / den);
        double sse = 0.0;
        for (const auto& p : low) {
            const double band = p.speed < vs ? (fs - fc) * (vs - p.speed) / vs : 0.0;
            const double r = p.torque - (fc + band + fv * p.speed);
            sse += r * r;
        }
        if (sse < best_sse - 1e-18) {
            best_sse = sse;
            best_vs = vs;
            best_fs = fs;
        }
    }

    curve.fit.viscous = fv;
    curve.fit.coulomb = fc;
    curve.fit.stiction = best_fs;
    curve.fit.stribeck_velocity = best_vs;
    validate_friction(curve.fit, strf("joint %d friction fit", joint + 1));

    double sse = 0.0;
    for (const auto& p : points) {
        const double r = p.torque - friction_level(curve.fit, p.speed);
        sse += r * r;
    }
    curve.residual_rms = std::sqrt(sse / points.size());
    return curve;
}

FrictionCurve step3_friction_id(const std::vector<SimLog>& logs, int joint,
                                const IdentConfig& config) {
    return fit_friction_curve(friction_points_from_logs(logs, joint, config), joint,
                              config);
}

std::vector<SimLog> step4_generate_disturbance_runs(const ModelBundle& plant,
                                                    const VecX& q_ref,
                                                    const std::vector<DisturbanceProfile>& profiles,
                                                    double duration,
                                                    const SimOptions& opts) {
    const int n = plant.model.n();
    if (q_ref.size() != n) throw ValidationError("step4: set point has wrong size");
    if (profiles.empty()) throw ValidationError("step4: no disturbance profiles");
    if (!(duration > 0.0)) throw ValidationError("step4: duration must be positive");
    std::vector<SimLog> logs;
    for (const auto& p : profiles) {
        if (p.n() != n) throw ValidationError("step4: disturbance profile has wrong width");
        logs.push_back(integrate(plant.model, plant.actuation, dwell(q_ref, duration), p, opts));
    }
    return logs;
}

double nrmse(const VecX& measured, const VecX& predicted) {
    if (measured.size() != predicted.size() || measured.size() < 2) {
        throw ValidationError("nrmse: series must share a length of at least 2");
    }
    const double spread = (measured.array() - measured.mean()).matrix().norm();
    if (!(spread > 0.0)) {
        throw ValidationError("nrmse: measured series is constant");
    }
    return 100.0 * (1.0 - (measured - predicted).norm() / spread);
}

ControllerFit step4_controller_id(const std::vector<SimLog>& logs, int joint,
                                  const IdentConfig& config) {
    if (logs.empty()) throw IdentDataError("controller fit: no logs");

    // Per-log regressors: tracking error and its running integral, both seen
    // through the drive's electrical lag, torque as the output. Centering
    // per log absorbs the integrator preload each run starts with.
    std::vector<VecX> qes, xs, taus;
    std::vector<double> mq, mx, mt;
    double max_err = 0.0;
    long total = 0;
    for (const auto& log : logs) {
        const int m = log.samples();
        if (m < 3 || joint >= log.joints()) {
            throw IdentDataError("controller fit: log too short or joint out of range");
        }
        const double dt = 1.0 / log.sample_rate;
        VecX qe(m), x(m), tau(m);
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
            qe(i) = log.q_ref(i, joint) - log.q(i, joint);
            tau(i) = log.tau_m(i, joint);
            if (i > 0) acc += 0.5 * (qe(i) + qe(i - 1)) * dt;
            x(i) = acc;
        }
        max_err = std::max(max_err, qe.cwiseAbs().maxCoeff());
        lag_filter(qe, dt, config.electrical_lag);
        lag_filter(x, dt, config.electrical_lag);
        mq.push_back(qe.mean());
        mx.push_back(x.mean());
        mt.push_back(tau.mean());
        qes.push_back(qe.array() - qe.mean());
        xs.push_back(x.array() - x.mean());
        taus.push_back(tau.array() - tau.mean());
        total += m;
    }
    if (max_err < 1e-9) {
        throw IdentDataError("controller fit: disturbance produced no tracking error");
    }

    double sqq = 0, sxx = 0, sqx = 0, sqt = 0, sxt = 0, stt = 0;
    for (size_t l = 0; l < qes.size(); ++l) {
        sqq += qes[l].squaredNorm();
        sxx += xs[l].squaredNorm();
        sqx += qes[l].dot(xs[l]);
        sqt += qes[l].dot(taus[l]);
        sxt += xs[l].dot(taus[l]);
        stt += taus[l].squaredNorm();
    }
    auto sse_at = [&](double kp, double tz) {
        return stt - 2.0 * kp * (tz * sqt + sxt) +
               kp * kp * (tz * tz * sqq + 2.0 * tz * sqx + sxx);
    };

    // Coarse log grid, then Gauss-Newton inside the box.
    double kp = config.kp_min, tz = config.tz_min;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < config.grid_points; ++i) {
        const double ki = config.kp_min *
                          std::pow(config.kp_max / config.kp_min,
                                   i / static_cast<double>(config.grid_points - 1));
        for (int j = 0; j < config.grid_points; ++j) {
            const double tj = config.tz_min *
                              std::pow(config.tz_max / config.tz_min,
                                       j / static_cast<double>(config.grid_points - 1));
            const double s = sse_at(ki, tj);
            if (s < best) {
                best = s;
                kp = ki;
                tz = tj;
            }
        }
    }
    for (int it = 0; it < 60; ++it) {
        // Residual r = tau - kp*(tz*qe + x); J columns d r/d kp, d r/d tz.
        const double g_q = sqt - kp * tz * sqq - kp * sqx; // <qe, r>
        const double g_x = sxt - kp * tz * sqx - kp * sxx; // <x, r>
        const double j11 = tz * tz * sqq + 2.0 * tz * sqx + sxx;
        const double j12 = kp * (tz * sqq + sqx);
        const double j22 = kp * kp * sqq;
        const double r1 = tz * g_q + g_x; // <tz*qe + x, r>
        const double r2 = kp * g_q;
        const double det = j11 * j22 - j12 * j12;
        if (std::abs(det) < 1e-300) break;
        double dk = (j22 * r1 - j12 * r2) / det;
        double dt_ = (j11 * r2 - j12 * r1) / det;
        double step = 1.0;
        bool moved = false;
        for (int half = 0; half < 12; ++half) {
            const double nk = std::clamp(kp + step * dk, config.kp_min, config.kp_max);
            const double nt = std::clamp(tz + step * dt_, config.tz_min, config.tz_max);
            if (sse_at(nk, nt) < best) {
                const bool converged = std::abs(nk - kp) < 1e-12 * kp &&
                                       std::abs(nt - tz) < 1e-12 * tz;
                kp = nk;
                tz = nt;
                best = sse_at(kp, tz);
                moved = !converged;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }

    ControllerFit fit;
    fit.joint = joint;
    fit.kp = kp;
    fit.tz = tz;
    fit.tz_at_bound = tz <= config.tz_min * 1.001 || tz >= config.tz_max * 0.999;

    VecX measured(total), predicted(total);
    long at = 0;
    for (size_t l = 0; l < qes.size(); ++l) {
        const double c = mt[l] - kp * tz * mq[l] - kp * mx[l];
        const int m = static_cast<int>(qes[l].size());
        measured.segment(at, m) = taus[l].array() + mt[l];
        predicted.segment(at, m) =
            kp * tz * (qes[l].array() + mq[l]) + kp * (xs[l].array() + mx[l]) + c;
        at += m;
    }
    fit.nrmse = nrmse(measured, predicted);
    if (fit.nrmse < config.min_nrmse) {
        throw IdentDataError(strf("controller fit failed: NRMSE %.1f%% below the %.1f%% floor",
                                  fit.nrmse, config.min_nrmse));
    }
    return fit;
}

ActuationSet step5_apply_defaults(const RobotModel& model,
                                  const std::vector<FrictionCurve>& friction,
                                  const std::vector<ControllerFit>& controller,
                                  std::vector<ParameterProvenance>& provenance) {
    const int n = model.n();
    if (static_cast<int>(friction.size()) != n ||
        static_cast<int>(controller.size()) != n) {
        throw ValidationError("step5: need one friction curve and one controller fit per joint");
    }
    std::vector<JointActuation> joints;
    for (int j = 0; j < n; ++j) {
        const bool wrist = 2 * j >= n;
        JointActuation a;
        a.friction = friction[j].fit;
        a.motor = default_motor(wrist);
        a.transmission = default_transmission(wrist);
        a.controller = ControllerParams{controller[j].kp, controller[j].tz,
                                        CommandMode::TorqueCommand};
        joints.push_back(a);
        provenance.push_back({strf("joint %d F_s, F_c, v_s, F_v", j + 1),
                              "step 3 (plateau-pair friction campaign)"});
        provenance.push_back({strf("joint %d K_p, T_z", j + 1),
                              "step 4 (disturbance output-error fit)"});
        provenance.push_back({strf("joint %d r, K_t, K_b, R, L, J_m, K_s, K_c", j + 1),
                              "step 5 (literature default)"});
    }
    ActuationSet set(joints);
    validate_actuation(set, n);
    return set;
}

std::vector<std::string> physical_consistency_report(const RobotModel& model) {
    std::vector<std::string> violations;
    auto check = [&](const LinkParams& link, const std::string& where) {
        try {
            validate_link(link, where);
        } catch (const ValidationError& e) {
            violations.emplace_back(e.what());
        }
    };
    check(model.base(), "base link");
    for (int k = 0; k < model.n(); ++k) check(model.link(k), strf("link %d", k + 1));
    check(model.end_effector(), "end effector");
    return violations;
}

IdentReport run_pipeline(const CadExport& cad, IdentDataSource& source,
                         const IdentConfig& config) {
    std::vector<ParameterProvenance> provenance;
    std::vector<std::string> notes;

    auto s1 = run_stage("Step 1 (uniform-density model)", [&] {
        return step1_build_model(cad, cad.total_mass);
    });
    provenance.push_back({"geometry (joint axes, offsets, coms)", "CAD export, trusted"});
    provenance.push_back({"link masses, inertia tensors",
                          "step 1 (uniform-density attempt), rescaled by step 2"});

    auto s2 = run_stage("Step 2 (static gravity regression)", [&] {
        const auto candidates =
            static_pose_candidates(s1.model, config.candidate_count, config.seed);
        const auto picked =
            select_static_poses(s1.model, candidates, config.pose_count, config);
        std::vector<StaticMeasurement> meas;
        for (int idx : picked) {
            meas.push_back(average_static_logs(
                source.static_logs(candidates[idx], config.static_dwell),
                config.gear_ratio));
        }
        return step2_identify_lambda(s1.model, meas, config);
    });
    provenance.push_back({"lambda_0 (base)", "fixed at 1, unobservable from joint torques"});
    provenance.push_back({"lambda_1 .. lambda_n", "step 2 (static gravity regression)"});

    const int n = s2.model.n();
    std::vector<FrictionCurve> friction;
    for (int j = 0; j < n; ++j) {
        friction.push_back(run_stage(
            strf("Step 3 (friction identification, joint %d)", j + 1), [&] {
                const VecX pose = default_rest_pose(n, j);
                std::vector<SimLog> logs;
                std::string declined;
                std::vector<double> speeds = config.cruise_speeds;
                speeds.insert(speeds.end(), config.low_speeds.begin(),
                              config.low_speeds.end());
                for (double v : speeds) {
                    if (auto pair = source.friction_logs(j, v, pose,
                                                         config.plateau_duration)) {
                        logs.push_back(std::move(pair->first));
                        logs.push_back(std::move(pair->second));
                    } else {
                        declined += declined.empty() ? "" : ", ";
                        declined += strf("%.4g", v);
                    }
                }
                auto points = friction_points_from_logs(logs, j, config);
                for (const auto& p : source.low_speed_points(j)) points.push_back(p);
                if (!declined.empty()) {
                    notes.push_back(strf(
                        "joint %d: source declined friction speeds %s rad/s", j + 1,
                        declined.c_str()));
                }
                try {
                    return fit_friction_curve(points, j, config);
                } catch (const IdentDataError& e) {
                    throw IdentDataError(
                        declined.empty()
                            ? std::string(e.what())
                            : strf("%s (source declined speeds %s rad/s; supply "
                                   "breakaway measurements or a slower-capable source)",
                                   e.what(), declined.c_str()));
                }
            }));
    }

    auto controller = run_stage("Step 4 (controller identification)", [&] {
        const double rate = 500.0;
        const int m = static_cast<int>(config.disturbance_duration * rate) + 1;
        std::vector<double> t(m);
        std::vector<VecX> tau(m, VecX::Zero(n));
        const double phase0[5] = {0.0, 1.1, 2.3, 3.7, 4.9};
        if (config.disturbance_amplitude.size() != config.disturbance_frequency.size() ||
            config.disturbance_amplitude.empty()) {
            throw ValidationError("disturbance amplitude/frequency lists must match and be non-empty");
        }
        for (int i = 0; i < m; ++i) {
            t[i] = i / rate;
            for (int j = 0; j < n; ++j) {
                for (size_t k = 0; k < config.disturbance_amplitude.size(); ++k) {
                    tau[i](j) += config.disturbance_amplitude[k] *
                                 std::sin(config.disturbance_frequency[k] * t[i] +
                                          phase0[k % 5] + 0.7 * j);
                }
            }
        }
        const auto profile = DisturbanceProfile::from_samples(
            std::move(t), std::move(tau), config.disturbance_cap);
        const auto logs = source.disturbance_logs(default_rest_pose(n, -1), {profile},
                                                  config.disturbance_duration);
        std::vector<ControllerFit> out;
        for (int j = 0; j < n; ++j) out.push_back(step4_controller_id(logs, j, config));
        return out;
    });

    ModelBundle bundle = run_stage("Step 5 (literature defaults)", [&] {
        ActuationSet act =
            step5_apply_defaults(s2.model, friction, controller, provenance);
        const auto violations = physical_consistency_report(s2.model);
        if (!violations.empty()) {
            throw ValidationError("identified model is physically inconsistent: " +
                                  violations.front());
        }
        return ModelBundle{s2.model, act};
    });

    return IdentReport{std::move(bundle),
                       s2.lambda,
                       s2.condition_number,
                       s2.residual_rms,
                       s1.geometric_parameter_count,
                       s1.inertial_parameter_count,
                       std::move(friction),
                       std::move(controller),
                       std::move(provenance),
                       std::move(notes)};
}

// ---------------------------------------------------------------------------
// data sources

SyntheticDataSource::SyntheticDataSource(ModelBundle truth, double noise_level,
                                         unsigned long long seed)
    : truth_(std::move(truth)), noise_(noise_level), seed_(seed) {}

SimLog SyntheticDataSource::maybe_noise(SimLog log) {
    if (noise_ <= 0.0) return log;
    return with_noise(log, noise_, seed_ + ++draw_);
}

std::vector<SimLog> SyntheticDataSource::static_logs(const VecX& pose, double dwell) {
    return {maybe_noise(equilibrium_rest_log(truth_, pose, dwell))};
}

std::optional<std::pair<SimLog, SimLog>>
SyntheticDataSource::friction_logs(int joint, double speed, const VecX& q0,
                                   double plateau) {
    const double span = std::max(kSpanFloor, speed * std::max(plateau, 1.0));
    return std::pair{maybe_noise(equilibrium_slide_log(truth_, joint, speed, q0, span)),
                     maybe_noise(equilibrium_slide_log(truth_, joint, -speed, q0, span))};
}

std::vector<SimLog>
SyntheticDataSource::disturbance_logs(const VecX& q_ref,
                                      const std::vector<DisturbanceProfile>& profiles,
                                      double duration) {
    auto logs = step4_generate_disturbance_runs(truth_, q_ref, profiles, duration);
    for (auto& log : logs) log = maybe_noise(std::move(log));
    return logs;
}

ClosedLoopDataSource::ClosedLoopDataSource(ModelBundle truth, double noise_level,
                                           unsigned long long seed)
    : truth_(std::move(truth)), noise_(noise_level), seed_(seed) {}

SimLog ClosedLoopDataSource::maybe_noise(SimLog log) {
    if (noise_ <= 0.0) return log;
    return with_noise(log, noise_, seed_ + ++draw_);
}

std::vector<SimLog> ClosedLoopDataSource::static_logs(const VecX& pose, double dwell) {
    (void)dwell; // the sweep protocol fixes its own timing
    std::vector<SimLog> logs;
    const int n = truth_.model.n();
    for (int j = 0; j < n; ++j) {
        for (double dir : {1.0, -1.0}) {
            const double rate = dir * sweep_rate;
            VecX start = pose;
            start(j) -= 0.5 * dir * sweep_span;
            const auto traj = joint_ramp(start, j, rate, sweep_span / sweep_rate);
            const auto s0 = steady_slide_state(truth_.model, truth_.actuation, j, start, rate);
            logs.push_back(maybe_noise(integrate_from(truth_.model, truth_.actuation, s0,
                                                      traj, DisturbanceProfile::zero(n))));
        }
    }
    return logs;
}

std::optional<std::pair<SimLog, SimLog>>
ClosedLoopDataSource::friction_logs(int joint, double speed, const VecX& q0,
                                    double plateau) {
    // Below the transition band the fixed-step loop dithers through stiction
    // instead of sticking; there is no honest steady slide to log.
    if (speed < min_speed) return std::nullopt;
    const double span = std::max(kSpanFloor, speed * std::max(plateau, 1.0));
    const int n = truth_.model.n();
    std::pair<SimLog, SimLog> out;
    for (double dir : {1.0, -1.0}) {
        const double rate = dir * speed;
        VecX start = q0;
        start(joint) -= 0.5 * dir * span;
        const auto traj = joint_ramp(start, joint, rate, span / speed);
        const auto s0 = steady_slide_state(truth_.model, truth_.actuation, joint, start, rate);
        SimLog log = maybe_noise(integrate_from(truth_.model, truth_.actuation, s0, traj,
                                                DisturbanceProfile::zero(n)));
        (dir > 0 ? out.first : out.second) = std::move(log);
    }
    return out;
}

std::vector<FrictionPoint> ClosedLoopDataSource::low_speed_points(int joint) {
    if (joint < 0 || joint >= static_cast<int>(low_speed_oracle.size())) return {};
    return low_speed_oracle[joint];
}

std::vector<SimLog>
ClosedLoopDataSource::disturbance_logs(const VecX& q_ref,
                                       const std::vector<DisturbanceProfile>& profiles,
                                       double duration) {
    auto logs = step4_generate_disturbance_runs(truth_, q_ref, profiles, duration);
    for (auto& log : logs) log = maybe_noise(std::move(log));
    return logs;
}

// ---------------------------------------------------------------------------
// report emission

void save_ident_report(const IdentReport& report, const std::string& directory) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    const auto& model = report.bundle.model;

    nlohmann::json j;
    j["model"] = model.name();
    j["lambda"] = std::vector<double>(report.lambda.data(),
                                      report.lambda.data() + report.lambda.size());
    j["condition_number"] = report.condition_number;
    j["static_residual_rms_Nm"] = report.static_residual_rms;
    j["geometric_parameter_count"] = report.geometric_parameter_count;
    j["inertial_parameter_count"] = report.inertial_parameter_count;
    j["corrected_arm_mass_kg"] = model.arm_mass();

    for (const auto& c : report.friction) {
        nlohmann::json f;
        f["joint"] = c.joint + 1;
        f["F_s_Nm"] = c.fit.stiction;
        f["F_c_Nm"] = c.fit.coulomb;
        f["v_s_rad_s"] = c.fit.stribeck_velocity;
        f["F_v_Nms_rad"] = c.fit.viscous;
        f["residual_rms_Nm"] = c.residual_rms;
        f["low_speed_monotonic"] = c.low_speed_monotonic;
        for (const auto& p : c.points) f["points"].push_back({p.speed, p.torque});
        j["friction"].push_back(f);
    }
    for (const auto& c : report.controller) {
        j["controller"].push_back({{"joint", c.joint + 1},
                                   {"K_p", c.kp},
                                   {"T_z_s", c.tz},
                                   {"nrmse_percent", c.nrmse},
                                   {"tz_at_bound", c.tz_at_bound}});
    }
    for (const auto& p : report.provenance) {
        j["provenance"].push_back({{"parameter", p.parameter}, {"origin", p.origin}});
    }
    j["notes"] = report.notes;
    {
        std::ofstream out(fs::path(directory) / "report.json");
        out << j.dump(2) << '\n';
    }

    {
        std::ofstream out(fs::path(directory) / "summary.txt");
        out << "identified model: " << model.name() << "\n\n";
        out << "inertial correction (lambda, base fixed at 1)\n";
        out << strf("  %-6s %10s\n", "body", "lambda");
        for (int k = 0; k < report.lambda.size(); ++k) {
            out << strf("  %-6d %10.4f\n", k, report.lambda(k));
        }
        out << strf("  corrected arm mass: %.3f kg (condition %.1f, residual %.2e Nm)\n\n",
                    model.arm_mass(), report.condition_number,
                    report.static_residual_rms);

        out << "friction parameters\n";
        out << strf("  %-6s %10s %10s %12s %14s %12s\n", "joint", "F_s [Nm]",
                    "F_c [Nm]", "v_s [rad/s]", "F_v [Nms/rad]", "rms [Nm]");
        for (const auto& c : report.friction) {
            out << strf("  %-6d %10.3f %10.3f %12.5f %14.4f %12.2e\n", c.joint + 1,
                        c.fit.stiction, c.fit.coulomb, c.fit.stribeck_velocity,
                        c.fit.viscous, c.residual_rms);
        }
        out << "\ncontroller parameters\n";
        out << strf("  %-6s %12s %10s %10s\n", "joint", "K_p", "T_z [s]", "NRMSE [%]");
        for (const auto& c : report.controller) {
            out << strf("  %-6d %12.1f %10.4f %10.2f%s\n", c.joint + 1, c.kp, c.tz,
                        c.nrmse, c.tz_at_bound ? "  (T_z at search bound)" : "");
        }
        out << "\nprovenance\n";
        for (const auto& p : report.provenance) {
            out << "  " << p.parameter << ": " << p.origin << "\n";
        }
        if (!report.notes.empty()) {
            out << "\nnotes\n";
            for (const auto& note : report.notes) out << "  " << note << "\n";
        }
    }

    for (const auto& c : report.friction) {
        std::ofstream out(fs::path(directory) /
                          strf("friction_curve_joint_%d.csv", c.joint + 1));
        out << "speed_rad_s,friction_torque_Nm\n";
        for (const auto& p : c.points) {
            out << strf("%.17g,%.17g\n", p.speed, p.torque);
        }
    }
}

} // namespace cobot
