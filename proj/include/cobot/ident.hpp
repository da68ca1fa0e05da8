#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cobot/model_io.hpp"
#include "cobot/sim.hpp"
#include "cobot/trajectory.hpp"

namespace cobot {

/// One averaged static observation: the arm holding (or slowly oscillating
/// around) pose q while the gearbox output torque is logged. tau is the
/// per-joint mean of tau_m * r over at least one second of data.
struct StaticMeasurement {
    VecX q;            // rad
    VecX tau;          // Nm, gearbox output
    double dwell = 0.0; // s of data behind the average
};

/// Throws ValidationError on size mismatch or when the average covers less
/// than one second of data.
void validate_static_measurement(const StaticMeasurement& m, int n);

/// One reconstructed friction sample: plateau speed and friction magnitude.
struct FrictionPoint {
    double speed = 0.0;  // rad/s, > 0
    double torque = 0.0; // Nm
};

/// Per-joint friction curve: the measured (speed, |tau_f|) points sorted by
/// speed plus the fitted four-parameter model and its fit quality.
struct FrictionCurve {
    int joint = 0;
    std::vector<FrictionPoint> points;
    FrictionParams fit;
    double residual_rms = 0.0;          // Nm over the points
    bool low_speed_monotonic = true;    // false flags a suspect breakaway region
};

/// Per-joint PI fit: u = kp*(tz*q_err + integral(q_err)) seen through the
/// drive's electrical lag.
struct ControllerFit {
    int joint = 0;
    double kp = 0.0;
    double tz = 0.0;      // s
    double nrmse = 0.0;   // percent, 100 = perfect
    bool tz_at_bound = false; // search hit the tz box edge; structure suspect
};

/// Where a model quantity came from, one entry per parameter group.
struct ParameterProvenance {
    std::string parameter;
    std::string origin;
};

/// Everything the pipeline identified plus diagnostics: the simulation-ready
/// bundle, the inertial correction, per-joint friction and controller fits,
/// and a provenance entry for every parameter group in the bundle.
struct IdentReport {
    ModelBundle bundle;
    VecX lambda;                       // n+1 scales, lambda[0] = base, fixed 1
    double condition_number = 0.0;     // of the weighted static regressor
    double static_residual_rms = 0.0;  // Nm
    int geometric_parameter_count = 0;
    int inertial_parameter_count = 0;
    std::vector<FrictionCurve> friction;
    std::vector<ControllerFit> controller;
    std::vector<ParameterProvenance> provenance;
    std::vector<std::string> notes;
};

/// Tuning knobs of the pipeline. Defaults reproduce the reference campaign
/// at desk scale; every tolerance or cap the estimators use lives here.
struct IdentConfig {
    unsigned long long seed = 1;
    double noise_level = 0.0;  // relative torque noise of the source, drives weighting
    double gear_ratio = 1.0;   // torque conversion used until literature values land

    // static (gravity) campaign
    int candidate_count = 64;
    int pose_count = 16;
    double static_dwell = 3.0;         // s per pose
    double static_sample_rate = 300.0; // Hz behind each average, for weighting
    double max_condition = 1e6;
    double weight_floor = 1e-6;        // Nm, sigma floor of the weighted solve

    // friction campaign
    std::vector<double> cruise_speeds = {0.1, 0.2, 0.35, 0.5}; // rad/s
    std::vector<double> low_speeds = {0.004, 0.008, 0.014};    // rad/s
    double plateau_duration = 1.2; // s, every plateau lasts at least this
    double ramp_accel = 1.0;       // rad/s^2 of generated profiles
    double friction_window = 0.06; // rad of logged q kept around the window center
    double vs_search_bound = 0.02; // rad/s, upper edge of the breakaway region
    double friction_floor = 0.05;  // Nm, curves below this count as frictionless
    int min_window_samples = 10;   // per plateau window

    // disturbance campaign
    double disturbance_duration = 12.0; // s
    std::vector<double> disturbance_amplitude = {4.0, 3.0, 2.5, 2.0, 1.5};  // Nm
    std::vector<double> disturbance_frequency = {0.1, 0.9, 3.0, 9.0, 20.0}; // rad/s
    double disturbance_cap = 15.0; // Nm
    double electrical_lag = 1e-3;  // s, known drive constant, prefilters the fit
    double kp_min = 1e2, kp_max = 1e5; // controller search box
    double tz_min = 1e-2, tz_max = 1.0;
    int grid_points = 40;          // per axis, coarse search
    double min_nrmse = 50.0;       // percent, fits below are rejected
};

/// Serves logged data to the estimators. An implementation may replay
/// recorded files, drive the closed-loop simulator, or evaluate bench
/// equilibria; the estimators never know which.
class IdentDataSource {
public:
    virtual ~IdentDataSource() = default;

    /// All logs behind one pose's static measurement: a single rest dwell,
    /// or one slow sweep pair per joint when rest data would be biased.
    virtual std::vector<SimLog> static_logs(const VecX& pose, double dwell) = 0;

    /// Paired constant-speed passes of one joint through a window centered
    /// at q0, first leg at +speed then at -speed over the same interval.
    /// nullopt when the source cannot produce that speed.
    virtual std::optional<std::pair<SimLog, SimLog>>
    friction_logs(int joint, double speed, const VecX& q0, double plateau) = 0;

    /// Breakaway-region measurements a source may supply out of band (for
    /// instance from a torque bench); empty when unavailable.
    virtual std::vector<FrictionPoint> low_speed_points(int joint) {
        (void)joint;
        return {};
    }

    /// Closed-loop responses at a rest set point, one log per disturbance.
    virtual std::vector<SimLog>
    disturbance_logs(const VecX& q_ref, const std::vector<DisturbanceProfile>& profiles,
                     double duration) = 0;
};

/// Ground-truth-backed source that evaluates the torque balances directly:
/// static logs are exact rest equilibria, friction legs are quasi-steady
/// slides (valid at any speed, including below the breakaway band where the
/// discrete closed loop cannot hold a slide), disturbance runs come from the
/// closed-loop simulator. noise_level > 0 adds the measurement noise model
/// on top, deterministically per seed.
class SyntheticDataSource : public IdentDataSource {
public:
    SyntheticDataSource(ModelBundle truth, double noise_level = 0.0,
                        unsigned long long seed = 1);

    std::vector<SimLog> static_logs(const VecX& pose, double dwell) override;
    std::optional<std::pair<SimLog, SimLog>>
    friction_logs(int joint, double speed, const VecX& q0, double plateau) override;
    std::vector<SimLog> disturbance_logs(const VecX& q_ref,
                                         const std::vector<DisturbanceProfile>& profiles,
                                         double duration) override;

private:
    ModelBundle truth_;
    double noise_;
    unsigned long long seed_;
    unsigned long long draw_ = 0;

    SimLog maybe_noise(SimLog log);
};

/// Source that only ever runs the closed-loop simulator on the truth plant.
/// Static data comes as per-joint slow sweep pairs (plain rest dwells carry
/// the stick-slip torque bias of the unstable axes); friction legs start on
/// the steady sliding solution. Speeds below min_speed are declined: inside
/// the breakaway band the fixed-step loop dithers through stiction instead
/// of sticking, so no honest log exists there. A bench table wired into
/// low_speed_oracle fills that gap when breakaway data is required.
class ClosedLoopDataSource : public IdentDataSource {
public:
    ClosedLoopDataSource(ModelBundle truth, double noise_level = 0.0,
                         unsigned long long seed = 1);

    std::vector<SimLog> static_logs(const VecX& pose, double dwell) override;
    std::optional<std::pair<SimLog, SimLog>>
    friction_logs(int joint, double speed, const VecX& q0, double plateau) override;
    std::vector<FrictionPoint> low_speed_points(int joint) override;
    std::vector<SimLog> disturbance_logs(const VecX& q_ref,
                                         const std::vector<DisturbanceProfile>& profiles,
                                         double duration) override;

    double min_speed = 0.03;           // rad/s, slowest honest steady slide
    double sweep_rate = 0.05;          // rad/s of the static de-stiction sweeps
    double sweep_span = 0.06;          // rad swept around each static pose
    std::vector<std::vector<FrictionPoint>> low_speed_oracle; // per joint, may be empty

private:
    ModelBundle truth_;
    double noise_;
    unsigned long long seed_;
    unsigned long long draw_ = 0;

    SimLog maybe_noise(SimLog log);
};

/// Uniform-density first attempt from a shape-only CAD export.
struct Step1Result {
    RobotModel model;
    VecX masses;  // parts in export order, tool excluded
    double density = 0.0;
    int geometric_parameter_count = 0; // 3 per joint + 3 per part
    int inertial_parameter_count = 0;  // 10 per moving link
};

/// The uniform-density rule alone: m_k = rho V_k with rho = total / sum(V).
/// Throws ValidationError on degenerate volumes. Optionally reports rho.
VecX uniform_density_masses(const CadExport& cad, double total_mass,
                            double* density = nullptr);

/// Spreads the weighed total mass over the parts by the uniform-density rule,
/// scales the shape inertia tensors by the same masses and assembles the
/// kinematic chain. The tool keeps its catalog mass. Throws ValidationError
/// on degenerate volumes or a part/joint count mismatch.
Step1Result step1_build_model(const CadExport& cad, double total_mass);

/// Gravity torque split by body: cols(i, k) is joint i's gravity torque due
/// to chain body k alone (k = 0 base .. n last link), tool_col the same for
/// the tool body. Columns sum to gravity_vector. The base column is
/// identically zero: no joint moves the base.
void gravity_regressor(const RobotModel& model, const VecX& q, MatX& cols,
                       VecX& tool_col);

/// Candidate rest poses for the static campaign: a level grid over the mid
/// chain joints, seeded spread elsewhere, and the first joint bisected so
/// its own gravity torque vanishes. Zeroing those rows matters because the
/// first link's mass is the weakest-seen column of the regressor; balancing
/// removes multiplicative torque noise from exactly the rows that carry it.
std::vector<VecX> static_pose_candidates(const RobotModel& model, int count,
                                         unsigned long long seed);

/// Greedy subset of `count` candidates maximizing the smallest singular
/// value of the stacked gravity regressor (base column excluded: lambda_0
/// never reaches a joint torque and stays fixed at 1). Returns indices into
/// `candidates`. Throws ValidationError when the selected stack stays badly
/// conditioned, naming the scale factors the weakest direction loads.
std::vector<int> select_static_poses(const RobotModel& model,
                                     const std::vector<VecX>& candidates,
                                     int count, const IdentConfig& config = {});

/// Combines the logs behind one pose into a StaticMeasurement. A single log
/// with a resting reference averages directly; sweep-pair groups average
/// each joint's two passes over the common central window and take the pair
/// mean, which cancels the friction carried by each direction.
StaticMeasurement average_static_logs(const std::vector<SimLog>& logs,
                                      double gear_ratio);

struct Step2Result {
    VecX lambda;       // n+1, lambda[0] = 1
    RobotModel model;  // input model rescaled by lambda
    double condition_number = 0.0;
    double residual_rms = 0.0; // Nm
};

/// Weighted linear least squares for the per-body scales: stacking
/// sum_k lambda_k g^(k)(q_j) = tau_j over all poses, weighted by the
/// per-average noise sigma expected from config. Rejects regressors with
/// condition number beyond config.max_condition, naming the weakest-seen
/// scale so the pose design can be repaired.
Step2Result step2_identify_lambda(const RobotModel& model,
                                  const std::vector<StaticMeasurement>& meas,
                                  const IdentConfig& config = {});

/// Symmetric constant-speed profiles for one joint, others resting: per
/// speed, accelerate, hold +v for at least max(plateau_duration, 1 s and
/// enough travel for the measurement window), reverse through the same
/// interval at -v, and stop. Throws ValidationError when the sweep leaves
/// the joint's position range.
std::vector<ReferenceTrajectory>
step3_generate_trajectories(const RobotModel& model, int joint,
                            const std::vector<double>& speeds,
                            const VecX& rest_pose, const IdentConfig& config = {});

/// Plateau extraction: finds constant-speed reference segments in the logs,
/// matches +v/-v passes over a common interval, and averages tau_m * r over
/// the central position window of each pass. Half the forward/backward mean
/// difference is the friction magnitude at that speed; gravity and every
/// other position-dependent torque cancel in the difference.
std::vector<FrictionPoint> friction_points_from_logs(const std::vector<SimLog>& logs,
                                                     int joint,
                                                     const IdentConfig& config = {});

/// Four-parameter fit of a measured curve: viscous slope and Coulomb
/// intercept from the two fastest points, then a bounded scan for the
/// breakaway knee on the sub-band points with the stiction level solved in
/// closed form (clamped to >= the Coulomb level, ties toward the smaller
/// knee). Throws IdentDataError on insufficient coverage or when the whole
/// curve sits below config.friction_floor ("no friction detected").
FrictionCurve fit_friction_curve(std::vector<FrictionPoint> points, int joint,
                                 const IdentConfig& config = {});

/// friction_points_from_logs followed by fit_friction_curve.
FrictionCurve step3_friction_id(const std::vector<SimLog>& logs, int joint,
                                const IdentConfig& config = {});

/// Closed-loop runs at a rest set point under the given torque disturbances,
/// one log per profile. Profiles carry their own magnitude cap; this only
/// checks shape compatibility before handing to the simulator.
std::vector<SimLog> step4_generate_disturbance_runs(const ModelBundle& plant,
                                                    const VecX& q_ref,
                                                    const std::vector<DisturbanceProfile>& profiles,
                                                    double duration,
                                                    const SimOptions& opts = {});

/// Fit percentage 100 * (1 - |m - p| / |m - mean(m)|); 100 is a perfect fit,
/// 0 no better than the mean. Throws ValidationError on size mismatch or a
/// constant measured series.
double nrmse(const VecX& measured, const VecX& predicted);

/// Output-error fit of one joint's PI law from disturbance logs: tracking
/// error and its running integral, prefiltered by the known electrical lag,
/// against logged motor torque; per-log offsets absorb the integrator
/// preload. Coarse log-grid search over (kp, tz) then Gauss-Newton inside
/// the box. Throws IdentDataError when the disturbance left no tracking
/// error or the fit stays below config.min_nrmse.
ControllerFit step4_controller_id(const std::vector<SimLog>& logs, int joint,
                                  const IdentConfig& config = {});

/// Completes the actuator stacks: identified friction and controller values
/// per joint, drive-train constants from typical catalog values (stiff main
/// axes, wrist axes a decade lighter). Appends one provenance entry per
/// parameter group.
ActuationSet step5_apply_defaults(const RobotModel& model,
                                  const std::vector<FrictionCurve>& friction,
                                  const std::vector<ControllerFit>& controller,
                                  std::vector<ParameterProvenance>& provenance);

/// Violations of mass positivity, inertia symmetry/definiteness and the
/// triangle inequality across all bodies; empty means physically consistent.
std::vector<std::string> physical_consistency_report(const RobotModel& model);

/// The whole procedure: uniform-density first attempt, static-pose design
/// and gravity-scale regression, per-joint friction campaign, disturbance
/// campaign and controller fits, literature defaults. Each stage consumes
/// only earlier outputs; any failure is rethrown with the stage named.
IdentReport run_pipeline(const CadExport& cad, IdentDataSource& source,
                         const IdentConfig& config = {});

/// Writes report.json, a human-readable summary.txt and one
/// friction_curve_joint_<k>.csv per joint into `directory` (created when
/// missing). Identical reports produce byte-identical files.
void save_ident_report(const IdentReport& report, const std::string& directory);

} // namespace cobot
