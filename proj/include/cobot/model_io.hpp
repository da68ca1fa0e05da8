#pragma once

#include <string>
#include <vector>

#include "cobot/actuation.hpp"
#include "cobot/types.hpp"

namespace cobot {

/// Rigid-body chain plus the per-joint actuator stacks, as stored together in
/// one model file.
struct ModelBundle {
    RobotModel model;
    ActuationSet actuation;
};

/// One body of a CAD assembly export: shape data without trustworthy masses.
/// gyration is the inertia tensor per unit mass about the com (m^2), so
/// mass * gyration recovers the tensor once a density estimate assigns the
/// mass.
struct CadPart {
    std::string name;
    double volume = 0.0; // m^3
    Vec3 com = Vec3::Zero();
    Mat3 gyration = Mat3::Zero();
    Vec3 joint_offset = Vec3::Zero();
};

/// Assembly export: base part, chain parts in order, joint axes and limits,
/// the tool body (catalog mass, never density-scaled) and the mounting
/// gravity vector. total_mass is the weighed arm mass, tool excluded.
struct CadExport {
    std::string name;
    double total_mass = 0.0;
    Vec3 gravity = Vec3(0.0, 0.0, -9.81);
    std::vector<CadPart> parts;
    std::vector<JointParams> joints;
    LinkParams end_effector;
};

/// Reads the rigid-body chain from a model file. Throws ValidationError
/// naming the missing or ill-formed field; parameter ranges are enforced by
/// the RobotModel constructor.
RobotModel load_model(const std::string& path);

/// Reads chain and actuation together.
ModelBundle load_model_bundle(const std::string& path);

/// Writes a model file that load_model_bundle reproduces exactly.
void save_model(const ModelBundle& bundle, const std::string& path);

CadExport load_cad_export(const std::string& path);

} // namespace cobot
