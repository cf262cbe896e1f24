#ifndef SATPRIV_ORBITAL_HPP
#define SATPRIV_ORBITAL_HPP

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace satpriv {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/**
 * @brief Classical (Keplerian) orbital elements, angles in radians.
 *
 * Invariants: a > 0, 0 <= e < 1, 0 <= i <= pi, other angles in [0, 2*pi).
 */
struct OrbitalElements {
    double semi_major_axis = 0.0;  // a [km]
    double eccentricity = 0.0;     // e
    double inclination = 0.0;      // i [rad]
    double raan = 0.0;             // Omega [rad]
    double arg_perigee = 0.0;      // omega [rad]
    double true_anomaly = 0.0;     // f [rad]
};

/** @brief Cartesian inertial state (position km, velocity km/s). */
struct StateVector {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    double epoch = 0.0;  // [s]
};

/**
 * @brief Point-mass gravity plus optional zonal harmonics J2..J4.
 */
struct GravityModel {
    double mu = 398600.4418;        // [km^3/s^2]
    double earth_radius = 6378.137; // [km]
    std::vector<double> zonal_coeffs; // {J2[, J3[, J4]]}

    static GravityModel two_body() { return GravityModel{}; }
    static GravityModel earth_j2() {
        return GravityModel{398600.4418, 6378.137, {1.08262668e-3}};
    }
    static GravityModel earth_j4() {
        return GravityModel{398600.4418, 6378.137,
                            {1.08262668e-3, -2.5327e-6, -1.6196e-6}};
    }
};

struct TleParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedOrbitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateOrbitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** Reentry during numerical propagation; carries the offending step. */
struct ReentryError : std::runtime_error {
    int step_index;
    ReentryError(const std::string& what, int step) : std::runtime_error(what), step_index(step) {}
};

/**
 * @brief Parse a two-line element set (optional name line) into elements.
 *
 * Validates line length, line numbers and mod-10 checksums. Mean anomaly is
 * converted to true anomaly via Kepler's equation and mean motion to
 * semi-major axis via a = (mu/n^2)^(1/3).
 */
OrbitalElements parse_tle(std::string_view text, const GravityModel& g = GravityModel::earth_j4());

/** Solve E - e*sin(E) = M by Newton iteration (tol 1e-12 rad, 50 iters max). */
double solve_kepler(double mean_anomaly, double eccentricity);

double mean_to_true_anomaly(double mean_anomaly, double eccentricity);
double true_to_mean_anomaly(double true_anomaly, double eccentricity);

StateVector kepler_to_cartesian(const OrbitalElements& el, const GravityModel& g);
OrbitalElements cartesian_to_kepler(const StateVector& sv, const GravityModel& g);

/** Total gravitational acceleration [km/s^2] at inertial position r. */
Vec3 acceleration(const Vec3& r, const GravityModel& g);

/** Orbital period 2*pi*sqrt(a^3/mu) [s]. */
double orbital_period(double semi_major_axis, double mu);

/** One RK4 step of the Cowell equations; state is (r, v) stacked. */
Vec6 rk4_step(const Vec6& state, double dt, const GravityModel& g);

/**
 * @brief Fixed-step RK4 propagation.
 *
 * Returns n_steps+1 states including the initial one. Throws ReentryError if
 * the trajectory falls below the Earth radius.
 */
std::vector<StateVector> propagate(const StateVector& sv, double dt, int n_steps,
                                   const GravityModel& g);

}  // namespace satpriv

#endif  // SATPRIV_ORBITAL_HPP
