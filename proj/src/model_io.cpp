#include "cobot/model_io.hpp"

#include <fstream>

#include <json.hpp>

#include "cobot/errors.hpp"

namespace cobot {
namespace {

using nlohmann::json;

// Inertia components are stored diagonal first: [ixx, iyy, izz, ixy, ixz, iyz].

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open model file");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

const json& require(const json& node, const std::string& key,
                    const std::string& where) {
    auto it = node.find(key);
    if (it == node.end())
        throw ParseError("missing field '" + where + "." + key + "'");
    return *it;
}

double number(const json& node, const std::string& key,
              const std::string& where) {
    const json& v = require(node, key, where);
    if (!v.is_number())
        throw ParseError("field '" + where + "." + key + "' is not a number");
    return v.get<double>();
}

std::string text(const json& node, const std::string& key,
                 const std::string& where) {
    const json& v = require(node, key, where);
    if (!v.is_string())
        throw ParseError("field '" + where + "." + key + "' is not a string");
    return v.get<std::string>();
}

std::vector<double> numbers(const json& node, const std::string& key,
                            size_t count, const std::string& where) {
    const json& v = require(node, key, where);
    if (!v.is_array() || v.size() != count)
        throw ParseError("field '" + where + "." + key + "' must be an array of " +
                         std::to_string(count) + " numbers");
    std::vector<double> out;
    out.reserve(count);
    for (const auto& x : v) {
        if (!x.is_number())
            throw ParseError("field '" + where + "." + key +
                             "' must be an array of " + std::to_string(count) +
                             " numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

Vec3 vec3(const json& node, const std::string& key, const std::string& where) {
    auto v = numbers(node, key, 3, where);
    return Vec3(v[0], v[1], v[2]);
}

Mat3 symmetric6(const json& node, const std::string& key,
                const std::string& where) {
    auto v = numbers(node, key, 6, where);
    Mat3 t;
    t << v[0], v[3], v[4],
         v[3], v[1], v[5],
         v[4], v[5], v[2];
    return t;
}

LinkParams link_params(const json& node, const std::string& where) {
    LinkParams p;
    p.mass = number(node, "mass", where);
    p.com = vec3(node, "com", where);
    p.inertia = symmetric6(node, "inertia", where);
    p.joint_offset = vec3(node, "joint_offset", where);
    return p;
}

JointParams joint_params(const json& node, const std::string& where) {
    JointParams p;
    p.axis = vec3(node, "axis", where);
    p.position_min = number(node, "position_min", where);
    p.position_max = number(node, "position_max", where);
    p.velocity_limit = number(node, "velocity_limit", where);
    return p;
}

const json& element(const json& node, const std::string& key, size_t index,
                    const std::string& file) {
    const json& arr = require(node, key, file);
    if (!arr.is_array())
        throw ParseError("field '" + file + "." + key + "' must be an array");
    if (index >= arr.size())
        throw ParseError("field '" + file + "." + key + "' has " +
                         std::to_string(arr.size()) + " entries, expected more");
    return arr[index];
}

CommandMode command_mode(const std::string& value, const std::string& where) {
    if (value == "torque") return CommandMode::TorqueCommand;
    if (value == "voltage") return CommandMode::VoltageCommand;
    throw ParseError("field '" + where +
                     ".mode' must be \"torque\" or \"voltage\", got \"" +
                     value + "\"");
}

JointActuation joint_actuation(const json& node, const std::string& where) {
    JointActuation a;
    const json& f = require(node, "friction", where);
    a.friction.stiction = number(f, "stiction", where + ".friction");
    a.friction.coulomb = number(f, "coulomb", where + ".friction");
    a.friction.stribeck_velocity =
        number(f, "stribeck_velocity", where + ".friction");
    a.friction.viscous = number(f, "viscous", where + ".friction");

    const json& m = require(node, "motor", where);
    a.motor.resistance = number(m, "resistance", where + ".motor");
    a.motor.inductance = number(m, "inductance", where + ".motor");
    a.motor.torque_constant = number(m, "torque_constant", where + ".motor");
    a.motor.back_emf = number(m, "back_emf", where + ".motor");
    a.motor.rotor_inertia = number(m, "rotor_inertia", where + ".motor");
    a.motor.ratio = number(m, "ratio", where + ".motor");

    const json& t = require(node, "transmission", where);
    a.transmission.stiffness = number(t, "stiffness", where + ".transmission");
    a.transmission.damping = number(t, "damping", where + ".transmission");

    const json& c = require(node, "controller", where);
    a.controller.kp = number(c, "kp", where + ".controller");
    a.controller.tz = number(c, "tz", where + ".controller");
    a.controller.mode =
        command_mode(text(c, "mode", where + ".controller"), where + ".controller");
    return a;
}

RobotModel parse_model(const json& root) {
    std::string name = text(root, "name", "model");
    Vec3 gravity = vec3(root, "gravity", "model");
    LinkParams base = link_params(require(root, "base", "model"), "base");

    const json& links_node = require(root, "links", "model");
    const json& joints_node = require(root, "joints", "model");
    if (!links_node.is_array() || !joints_node.is_array())
        throw ParseError("'links' and 'joints' must be arrays");
    if (links_node.size() != joints_node.size())
        throw ParseError("model has " + std::to_string(joints_node.size()) +
                         " joints but " + std::to_string(links_node.size()) +
                         " links");

    std::vector<LinkParams> links;
    std::vector<JointParams> joints;
    for (size_t k = 0; k < links_node.size(); ++k) {
        std::string idx = std::to_string(k + 1);
        links.push_back(link_params(links_node[k], "links[" + idx + "]"));
        joints.push_back(joint_params(joints_node[k], "joints[" + idx + "]"));
    }
    LinkParams ee =
        link_params(require(root, "end_effector", "model"), "end_effector");
    return RobotModel(std::move(name), base, std::move(joints),
                      std::move(links), ee, gravity);
}

ActuationSet parse_actuation(const json& root, int n) {
    const json& arr = require(root, "actuation", "model");
    if (!arr.is_array() || static_cast<int>(arr.size()) != n)
        throw ParseError("'actuation' must be an array of " +
                         std::to_string(n) + " joint blocks");
    std::vector<JointActuation> joints;
    for (int k = 0; k < n; ++k)
        joints.push_back(
            joint_actuation(arr[k], "actuation[" + std::to_string(k + 1) + "]"));
    return ActuationSet(std::move(joints));
}

json dump_array(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json dump_sym(const Mat3& t) {
    return json::array(
        {t(0, 0), t(1, 1), t(2, 2), t(0, 1), t(0, 2), t(1, 2)});
}

json dump_link(const LinkParams& p) {
    return {{"mass", p.mass},
            {"com", dump_array(p.com)},
            {"inertia", dump_sym(p.inertia)},
            {"joint_offset", dump_array(p.joint_offset)}};
}

json dump_joint(const JointParams& p) {
    return {{"axis", dump_array(p.axis)},
            {"position_min", p.position_min},
            {"position_max", p.position_max},
            {"velocity_limit", p.velocity_limit}};
}

json dump_actuation(const JointActuation& a) {
    return {{"friction",
             {{"stiction", a.friction.stiction},
              {"coulomb", a.friction.coulomb},
              {"stribeck_velocity", a.friction.stribeck_velocity},
              {"viscous", a.friction.viscous}}},
            {"motor",
             {{"resistance", a.motor.resistance},
              {"inductance", a.motor.inductance},
              {"torque_constant", a.motor.torque_constant},
              {"back_emf", a.motor.back_emf},
              {"rotor_inertia", a.motor.rotor_inertia},
              {"ratio", a.motor.ratio}}},
            {"transmission",
             {{"stiffness", a.transmission.stiffness},
              {"damping", a.transmission.damping}}},
            {"controller",
             {{"kp", a.controller.kp},
              {"tz", a.controller.tz},
              {"mode", a.controller.mode == CommandMode::TorqueCommand
                           ? "torque"
                           : "voltage"}}}};
}

} // namespace

RobotModel load_model(const std::string& path) {
    return parse_model(load_json(path));
}

ModelBundle load_model_bundle(const std::string& path) {
    json root = load_json(path);
    RobotModel model = parse_model(root);
    ActuationSet actuation = parse_actuation(root, model.n());
    validate_actuation(actuation, model.n());
    return ModelBundle{std::move(model), std::move(actuation)};
}

void save_model(const ModelBundle& bundle, const std::string& path) {
    const RobotModel& m = bundle.model;
    json root;
    root["name"] = m.name();
    root["gravity"] = dump_array(m.gravity());
    root["base"] = dump_link(m.base());
    json links = json::array();
    json joints = json::array();
    for (int k = 0; k < m.n(); ++k) {
        links.push_back(dump_link(m.link(k)));
        joints.push_back(dump_joint(m.joint(k)));
    }
    root["links"] = std::move(links);
    root["end_effector"] = dump_link(m.end_effector());
    root["joints"] = std::move(joints);
    json acts = json::array();
    for (const auto& a : bundle.actuation.joints())
        acts.push_back(dump_actuation(a));
    root["actuation"] = std::move(acts);

    std::ofstream out(path);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out << root.dump(2) << "\n";
    if (!out) throw ParseError(path + ": write failed");
}

CadExport load_cad_export(const std::string& path) {
    json root = load_json(path);
    CadExport cad;
    cad.name = text(root, "name", "cad");
    cad.total_mass = number(root, "total_mass", "cad");
    if (!(cad.total_mass > 0.0))
        throw ValidationError("cad total_mass must be positive");
    cad.gravity = vec3(root, "gravity", "cad");

    const json& parts = require(root, "parts", "cad");
    if (!parts.is_array() || parts.size() < 2)
        throw ParseError("'parts' must list the base and at least one link");
    for (size_t k = 0; k < parts.size(); ++k) {
        std::string where = "parts[" + std::to_string(k) + "]";
        const json& node = parts[k];
        CadPart p;
        p.name = text(node, "name", where);
        p.volume = number(node, "volume", where);
        if (!(p.volume > 0.0))
            throw ValidationError("part '" + p.name + "' has non-positive volume");
        p.com = vec3(node, "com", where);
        p.gyration = symmetric6(node, "gyration", where);
        p.joint_offset = vec3(node, "joint_offset", where);
        cad.parts.push_back(std::move(p));
    }

    const json& joints = require(root, "joints", "cad");
    if (!joints.is_array() || joints.size() + 1 != cad.parts.size())
        throw ParseError("cad needs one joint per part after the base (" +
                         std::to_string(cad.parts.size() - 1) + ")");
    for (size_t k = 0; k < joints.size(); ++k) {
        std::string where = "joints[" + std::to_string(k + 1) + "]";
        cad.joints.push_back(joint_params(joints[k], where));
    }
    cad.end_effector =
        link_params(require(root, "end_effector", "cad"), "end_effector");
    return cad;
}

} // namespace cobot
