#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "cobot/kinematics.hpp"
#include "cobot/model_io.hpp"

using namespace cobot;
using doctest::Approx;

namespace {

const std::string kReference = std::string(COBOT_DATA_DIR) + "/gofa_reference.json";
const std::string kCadExport = std::string(COBOT_DATA_DIR) + "/gofa_cad_export.json";

struct TempFile {
    std::string path;
    explicit TempFile(const char* name) : path(std::string("/tmp/") + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    return nlohmann::json::parse(in);
}

void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    out << j.dump(2);
}

} // namespace

TEST_CASE("reference model carries the published geometry and masses") {
    RobotModel m = load_model(kReference);

    CHECK(m.n() == 6);
    CHECK(m.name() == "gofa_reference");

    // Data-sheet spot checks, link frames in SI.
    CHECK(m.link(0).joint_offset.z() == 7.750e-02);
    CHECK(m.base().joint_offset.z() == 0.1875);
    CHECK(m.link(1).com.y() == -4.993e-02);
    CHECK(m.link(1).joint_offset.z() == 0.444);
    CHECK(m.base().mass == 4.933);
    CHECK(m.link(1).mass == 6.042);
    CHECK(m.link(5).mass == 0.206);

    // The arm total is quoted as 28.004 kg after rounding.
    CHECK(std::abs(m.arm_mass() - 28.004) < 2e-3);

    // Tool body: catalog values, not part of the weighed arm.
    CHECK(m.end_effector().mass == 1.2);
    CHECK(m.end_effector().joint_offset.x() == 0.204);
    CHECK(m.total_mass() == Approx(m.arm_mass() + 1.2).epsilon(1e-15));

    // Tilted mounting: |g| = 9.81, tilt in the xz plane.
    CHECK(m.gravity().norm() == Approx(9.81).epsilon(1e-12));
    CHECK(m.gravity().y() == 0.0);
    CHECK(std::acos(-m.gravity().z() / 9.81) == Approx(15.0 * M_PI / 180.0).epsilon(1e-9));

    CHECK(m.joint(0).axis == Vec3::UnitZ());
    CHECK(m.joint(1).axis == Vec3::UnitY());
    CHECK(m.joint(3).axis == Vec3::UnitX());
    CHECK(m.joint(2).position_min == Approx(-225.0 * M_PI / 180.0));
    CHECK(m.joint(5).velocity_limit == Approx(180.0 * M_PI / 180.0));
}

TEST_CASE("zero configuration puts the tool at the summed offsets") {
    RobotModel m = load_model(kReference);

    Vec3 expect = m.base().joint_offset;
    for (int k = 0; k < m.n(); ++k) expect += m.link(k).joint_offset;
    expect += m.end_effector().joint_offset;

    auto frames = forward_kinematics(m, VecX::Zero(6));
    CHECK((frames.back().p - expect).norm() < 1e-12);
    CHECK(frames.back().p.x() == Approx(0.438).epsilon(1e-6));
    CHECK(frames.back().p.y() == Approx(-0.030).epsilon(1e-9));
    CHECK(frames.back().p.z() == Approx(0.899).epsilon(1e-9));
}

TEST_CASE("actuation blocks carry the drive and controller tables") {
    ModelBundle b = load_model_bundle(kReference);
    REQUIRE(b.actuation.n() == 6);

    const auto& j1 = b.actuation.joint(0);
    CHECK(j1.friction.stiction == 9.5);
    CHECK(j1.friction.coulomb == 8.5);
    // 0.5 deg/s band and 0.06 Nm s/deg viscous slope, converted to SI.
    CHECK(j1.friction.stribeck_velocity == Approx(0.5 * M_PI / 180.0).epsilon(1e-10));
    CHECK(j1.friction.viscous == Approx(0.06 * 180.0 / M_PI).epsilon(1e-10));
    CHECK(b.actuation.joint(4).friction.coulomb == 4.1);

    CHECK(b.actuation.joint(2).controller.kp == 6823.7);
    CHECK(b.actuation.joint(2).controller.tz == 0.1489);
    CHECK(j1.controller.kp == 1556.2);
    CHECK(j1.controller.mode == CommandMode::TorqueCommand);

    // Main axes one decade stiffer and heavier than the wrist axes.
    CHECK(b.actuation.joint(1).transmission.stiffness == 15000.0);
    CHECK(b.actuation.joint(1).transmission.damping == 5.0);
    CHECK(b.actuation.joint(4).transmission.stiffness == 1000.0);
    CHECK(b.actuation.joint(4).transmission.damping == 1.0);
    CHECK(b.actuation.joint(0).motor.rotor_inertia == 1.0);
    CHECK(b.actuation.joint(5).motor.rotor_inertia == 0.1);
    CHECK(j1.motor.ratio == 1.0);
    CHECK(j1.motor.electrical_time_constant() == Approx(1e-3).epsilon(1e-12));
}

TEST_CASE("save and reload reproduces every parameter bit for bit") {
    ModelBundle b = load_model_bundle(kReference);
    TempFile tmp("cobot_model_roundtrip.json");
    save_model(b, tmp.path);
    ModelBundle r = load_model_bundle(tmp.path);

    CHECK(r.model.name() == b.model.name());
    CHECK(r.model.gravity() == b.model.gravity());
    auto same_link = [](const LinkParams& a, const LinkParams& c) {
        CHECK(a.mass == c.mass);
        CHECK(a.com == c.com);
        CHECK(a.inertia == c.inertia);
        CHECK(a.joint_offset == c.joint_offset);
    };
    same_link(r.model.base(), b.model.base());
    same_link(r.model.end_effector(), b.model.end_effector());
    REQUIRE(r.model.n() == b.model.n());
    for (int k = 0; k < b.model.n(); ++k) {
        same_link(r.model.link(k), b.model.link(k));
        CHECK(r.model.joint(k).axis == b.model.joint(k).axis);
        CHECK(r.model.joint(k).position_min == b.model.joint(k).position_min);
        CHECK(r.model.joint(k).position_max == b.model.joint(k).position_max);
        CHECK(r.model.joint(k).velocity_limit == b.model.joint(k).velocity_limit);

        const auto& x = r.actuation.joint(k);
        const auto& y = b.actuation.joint(k);
        CHECK(x.friction.stiction == y.friction.stiction);
        CHECK(x.friction.coulomb == y.friction.coulomb);
        CHECK(x.friction.stribeck_velocity == y.friction.stribeck_velocity);
        CHECK(x.friction.viscous == y.friction.viscous);
        CHECK(x.motor.resistance == y.motor.resistance);
        CHECK(x.motor.inductance == y.motor.inductance);
        CHECK(x.motor.torque_constant == y.motor.torque_constant);
        CHECK(x.motor.back_emf == y.motor.back_emf);
        CHECK(x.motor.rotor_inertia == y.motor.rotor_inertia);
        CHECK(x.motor.ratio == y.motor.ratio);
        CHECK(x.transmission.stiffness == y.transmission.stiffness);
        CHECK(x.transmission.damping == y.transmission.damping);
        CHECK(x.controller.kp == y.controller.kp);
        CHECK(x.controller.tz == y.controller.tz);
        CHECK(x.controller.mode == y.controller.mode);
    }
}

TEST_CASE("malformed model files name the offending field") {
    CHECK_THROWS_AS(load_model("/nonexistent/model.json"), ParseError);

    TempFile tmp("cobot_model_bad.json");
    {
        std::ofstream out(tmp.path);
        out << "not json {";
    }
    CHECK_THROWS_AS(load_model(tmp.path), ParseError);

    nlohmann::json good = read_json(kReference);

    auto broken = good;
    broken["links"][1].erase("mass");
    write_json(broken, tmp.path);
    CHECK_THROWS_WITH_AS(load_model(tmp.path),
                         doctest::Contains("links[2].mass"), ParseError);

    broken = good;
    broken["actuation"][0]["controller"]["mode"] = "direct";
    write_json(broken, tmp.path);
    CHECK_THROWS_WITH_AS(load_model_bundle(tmp.path),
                         doctest::Contains("mode"), ParseError);

    broken = good;
    broken["joints"].erase(5);
    write_json(broken, tmp.path);
    CHECK_THROWS_AS(load_model(tmp.path), ParseError);

    // Structurally valid JSON with a physically impossible body.
    broken = good;
    broken["links"][1]["mass"] = 0.0;
    write_json(broken, tmp.path);
    CHECK_THROWS_WITH_AS(load_model(tmp.path),
                         doctest::Contains("link 2"), ValidationError);

    broken = good;
    broken["joints"][2]["axis"] = {1.0, 1.0, 0.0};
    write_json(broken, tmp.path);
    CHECK_THROWS_WITH_AS(load_model(tmp.path),
                         doctest::Contains("joint 3"), ValidationError);
}

TEST_CASE("cad export matches the reference shapes") {
    CadExport cad = load_cad_export(kCadExport);
    RobotModel ref = load_model(kReference);

    REQUIRE(cad.parts.size() == 7);
    REQUIRE(cad.joints.size() == 6);
    CHECK(cad.parts[0].name == "base");
    CHECK(cad.parts[6].name == "link_6");
    CHECK(cad.total_mass == 28.003);
    CHECK(cad.gravity == ref.gravity());
    CHECK(cad.end_effector.mass == ref.end_effector().mass);

    double volume_sum = 0.0;
    for (const auto& p : cad.parts) volume_sum += p.volume;
    CHECK(volume_sum == Approx(28.003e-3).epsilon(1e-12));

    // Uniform density over the export reproduces the reference bodies: the
    // masses exactly, the tensors to the file's printed precision.
    double rho = cad.total_mass / volume_sum;
    for (size_t k = 0; k < cad.parts.size(); ++k) {
        const LinkParams& l = k == 0 ? ref.base() : ref.link(static_cast<int>(k) - 1);
        const CadPart& p = cad.parts[k];
        CHECK(rho * p.volume == Approx(l.mass).epsilon(1e-12));
        CHECK((p.com - l.com).norm() == 0.0);
        CHECK((p.joint_offset - l.joint_offset).norm() == 0.0);
        CHECK((rho * p.volume * p.gyration - l.inertia).norm() <
              1e-6 * l.inertia.norm());
    }

    nlohmann::json bad = read_json(kCadExport);
    bad["parts"][3]["volume"] = -1.0;
    TempFile tmp("cobot_cad_bad.json");
    write_json(bad, tmp.path);
    CHECK_THROWS_WITH_AS(load_cad_export(tmp.path),
                         doctest::Contains("volume"), ValidationError);
}
