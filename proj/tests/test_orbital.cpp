#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Geometry>

#include "satpriv/orbital.hpp"

using namespace satpriv;

namespace {

const char* kIssTle =
    "ISS (ZARYA)\n"
    "1 25544U 98067A   19248.67387091  .00001921  00000-0  41082-4 0  9997\n"
    "2 25544  51.6464 322.0340 0007976   9.5374 121.4565 15.50435809187740\n";

double deg(double rad) { return rad * 180.0 / M_PI; }

double specific_energy(const StateVector& sv, const GravityModel& g) {
    return 0.5 * sv.velocity.squaredNorm() - g.mu / sv.position.norm();
}

}  // namespace

TEST_CASE("parse_tle reads the ISS element set") {
    auto el = parse_tle(kIssTle);
    CHECK(deg(el.inclination) == doctest::Approx(51.6464).epsilon(1e-9));
    CHECK(el.eccentricity == doctest::Approx(0.0007976).epsilon(1e-9));
    CHECK(deg(el.raan) == doctest::Approx(322.0340).epsilon(1e-9));

    // a = (mu/n^2)^(1/3), n = 15.50435809 rev/day
    double n = 15.50435809 * 2.0 * M_PI / 86400.0;
    double a_expected = std::cbrt(398600.4418 / (n * n));
    CHECK(el.semi_major_axis == doctest::Approx(a_expected).epsilon(1e-12));
    CHECK(el.semi_major_axis == doctest::Approx(6793.59).epsilon(1e-4));
}

TEST_CASE("parse_tle accepts input without a name line") {
    std::string two_lines =
        "1 25544U 98067A   19248.67387091  .00001921  00000-0  41082-4 0  9997\n"
        "2 25544  51.6464 322.0340 0007976   9.5374 121.4565 15.50435809187740\n";
    auto el = parse_tle(two_lines);
    CHECK(el.eccentricity == doctest::Approx(0.0007976));
}

TEST_CASE("parse_tle rejects a corrupted checksum and names the line") {
    std::string bad = kIssTle;
    bad[bad.size() - 2] = '9';  // last checksum digit of line 2
    try {
        parse_tle(bad);
        FAIL("expected TleParseError");
    } catch (const TleParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("parse_tle rejects a non-numeric field with its column span") {
    std::string bad = kIssTle;
    // inclination field, line 2 columns 9-16
    size_t l2 = bad.find("\n2 ") + 1;
    bad[l2 + 11] = 'Q';  // replace '.' (checksum-neutral)
    try {
        parse_tle(bad);
        FAIL("expected TleParseError");
    } catch (const TleParseError& e) {
        std::string msg = e.what();
        CHECK(msg.find("columns") != std::string::npos);
    }
}

TEST_CASE("kepler_to_cartesian on a circular equatorial orbit") {
    GravityModel g = GravityModel::two_body();
    OrbitalElements el;
    el.semi_major_axis = 7000.0;
    auto sv = kepler_to_cartesian(el, g);
    CHECK(sv.position.x() == doctest::Approx(7000.0));
    CHECK(sv.position.y() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sv.position.z() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sv.velocity.y() == doctest::Approx(std::sqrt(g.mu / 7000.0)));
    CHECK(std::abs(sv.velocity.x()) < 1e-12);
}

TEST_CASE("perigee radius a(1-e)") {
    GravityModel g = GravityModel::two_body();
    OrbitalElements el;
    el.semi_major_axis = 7000.0;
    el.eccentricity = 0.1;
    el.true_anomaly = 0.0;
    auto sv = kepler_to_cartesian(el, g);
    CHECK(sv.position.norm() == doctest::Approx(6300.0).epsilon(1e-12));
}

TEST_CASE("hyperbolic elements are rejected") {
    GravityModel g = GravityModel::two_body();
    OrbitalElements el;
    el.semi_major_axis = 7000.0;
    el.eccentricity = 1.2;
    CHECK_THROWS_AS(kepler_to_cartesian(el, g), UnsupportedOrbitError);
}

TEST_CASE("kepler/cartesian round trips") {
    GravityModel g = GravityModel::two_body();
    OrbitalElements el;
    el.semi_major_axis = 6797.0;
    el.eccentricity = 0.0008;
    el.inclination = 0.9;
    el.raan = 5.6;
    el.arg_perigee = 0.17;
    el.true_anomaly = 2.1;
    auto back = cartesian_to_kepler(kepler_to_cartesian(el, g), g);
    CHECK(back.semi_major_axis == doctest::Approx(el.semi_major_axis).epsilon(1e-10));
    CHECK(back.eccentricity == doctest::Approx(el.eccentricity).epsilon(1e-7));
    CHECK(back.inclination == doctest::Approx(el.inclination).epsilon(1e-10));
    CHECK(back.raan == doctest::Approx(el.raan).epsilon(1e-10));
    CHECK(back.arg_perigee == doctest::Approx(el.arg_perigee).epsilon(1e-6));
    CHECK(back.true_anomaly == doctest::Approx(el.true_anomaly).epsilon(1e-6));
}

TEST_CASE("cartesian_to_kepler on a circular state") {
    GravityModel g = GravityModel::two_body();
    StateVector sv;
    sv.position = Vec3(7000.0, 0.0, 0.0);
    sv.velocity = Vec3(0.0, std::sqrt(g.mu / 7000.0), 0.0);
    auto el = cartesian_to_kepler(sv, g);
    CHECK(el.semi_major_axis == doctest::Approx(7000.0).epsilon(1e-12));
    CHECK(el.eccentricity < 1e-12);
    CHECK(el.arg_perigee == 0.0);  // circular convention
    CHECK(el.raan == 0.0);         // equatorial convention
}

TEST_CASE("cartesian_to_kepler recovers f = 0 at perigee") {
    GravityModel g = GravityModel::two_body();
    OrbitalElements el;
    el.semi_major_axis = 7000.0;
    el.eccentricity = 0.1;
    el.inclination = 0.4;
    el.raan = 1.0;
    el.arg_perigee = 2.0;
    el.true_anomaly = 0.0;
    auto back = cartesian_to_kepler(kepler_to_cartesian(el, g), g);
    bool near_zero = back.true_anomaly < 1e-10 || back.true_anomaly > 2.0 * M_PI - 1e-10;
    CHECK(near_zero);
}

TEST_CASE("rectilinear states are rejected") {
    GravityModel g = GravityModel::two_body();
    StateVector sv;
    sv.position = Vec3(7000.0, 0.0, 0.0);
    sv.velocity = Vec3(1.0, 0.0, 0.0);  // radial only, h = 0
    CHECK_THROWS_AS(cartesian_to_kepler(sv, g), DegenerateOrbitError);
}

TEST_CASE("acceleration matches the two-body closed form exactly") {
    GravityModel g = GravityModel::two_body();
    Vec3 a = acceleration(Vec3(7000.0, 0.0, 0.0), g);
    CHECK(a.x() == -g.mu / (7000.0 * 7000.0));
    CHECK(a.y() == 0.0);
    CHECK(a.z() == 0.0);

    Vec3 r(1234.5, -6543.2, 2500.0);
    Vec3 closed = -(g.mu / std::pow(r.norm(), 3)) * r;
    CHECK((acceleration(r, g) - closed).norm() == 0.0);
}

TEST_CASE("J2 acceleration has no z-component on the equator") {
    GravityModel g = GravityModel::earth_j2();
    Vec3 a = acceleration(Vec3(7000.0, 0.0, 0.0), g);
    CHECK(a.z() == doctest::Approx(0.0).epsilon(1e-16));
    Vec3 b = acceleration(Vec3(4000.0, -5744.0, 0.0), g);
    CHECK(b.z() == doctest::Approx(0.0).epsilon(1e-16));
}

TEST_CASE("J2 perturbation magnitude is ~1e-3 of two-body at LEO") {
    GravityModel j2 = GravityModel::earth_j2();
    GravityModel tb = GravityModel::two_body();
    Vec3 r(7000.0, 0.0, 0.0);
    double rel = (acceleration(r, j2) - acceleration(r, tb)).norm() /
                 acceleration(r, tb).norm();
    // (3/2) J2 (Re/r)^2 evaluated numerically
    double expected = 1.5 * 1.08262668e-3 * std::pow(6378.137 / 7000.0, 2);
    CHECK(rel == doctest::Approx(expected).epsilon(1e-6));
    CHECK(rel > 5e-4);
    CHECK(rel < 2e-3);
}

TEST_CASE("acceleration rejects the origin") {
    CHECK_THROWS_AS(acceleration(Vec3::Zero(), GravityModel::two_body()), std::domain_error);
}

TEST_CASE("propagate returns only the initial state for n_steps = 0") {
    GravityModel g = GravityModel::two_body();
    StateVector sv;
    sv.position = Vec3(7000.0, 0.0, 0.0);
    sv.velocity = Vec3(0.0, std::sqrt(g.mu / 7000.0), 0.0);
    auto states = propagate(sv, 1.0, 0, g);
    REQUIRE(states.size() == 1);
    CHECK(states[0].position == sv.position);
}

TEST_CASE("circular orbit closes after one period") {
    GravityModel g = GravityModel::two_body();
    // Pick a so the period is exactly 6000 s.
    double T = 6000.0;
    double a = std::cbrt(g.mu * std::pow(T / (2.0 * M_PI), 2));
    StateVector sv;
    sv.position = Vec3(a, 0.0, 0.0);
    sv.velocity = Vec3(0.0, std::sqrt(g.mu / a), 0.0);
    auto states = propagate(sv, 1.0, 6000, g);
    CHECK((states.back().position - sv.position).norm() < 1e-6);
}

TEST_CASE("two-body energy and angular momentum drift below 1e-9 over 6000 s") {
    GravityModel g = GravityModel::two_body();
    OrbitalElements el;
    el.semi_major_axis = 6797.0;
    el.eccentricity = 0.0008;
    el.inclination = 0.9014;
    auto sv = kepler_to_cartesian(el, g);
    auto states = propagate(sv, 1.0, 6000, g);
    double e0 = specific_energy(states.front(), g);
    Vec3 h0 = states.front().position.cross(states.front().velocity);
    double max_de = 0.0, max_dh = 0.0;
    for (const auto& s : states) {
        max_de = std::max(max_de, std::abs(specific_energy(s, g) - e0) / std::abs(e0));
        max_dh = std::max(max_dh, (s.position.cross(s.velocity) - h0).norm() / h0.norm());
    }
    CHECK(max_de <= 1e-9);
    CHECK(max_dh <= 1e-9);
}

TEST_CASE("propagation is bitwise deterministic") {
    GravityModel g = GravityModel::earth_j4();
    auto sv = kepler_to_cartesian(parse_tle(kIssTle), g);
    auto a = propagate(sv, 1.0, 500, g);
    auto b = propagate(sv, 1.0, 500, g);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].position == b[i].position);
        CHECK(a[i].velocity == b[i].velocity);
    }
}

TEST_CASE("reentry raises an error carrying the step index") {
    GravityModel g = GravityModel::two_body();
    StateVector sv;
    sv.position = Vec3(6500.0, 0.0, 0.0);
    sv.velocity = Vec3(-5.0, 1.0, 0.0);  // plunging
    try {
        propagate(sv, 1.0, 2000, g);
        FAIL("expected ReentryError");
    } catch (const ReentryError& e) {
        CHECK(e.step_index > 0);
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("solve_kepler handles the ISS mean anomaly") {
    double M = 121.4565 * M_PI / 180.0;
    double e = 0.0007976;
    double E = solve_kepler(M, e);
    CHECK(E - e * std::sin(E) == doctest::Approx(M).epsilon(1e-14));
    double f = mean_to_true_anomaly(M, e);
    CHECK(true_to_mean_anomaly(f, e) == doctest::Approx(M).epsilon(1e-12));
}
