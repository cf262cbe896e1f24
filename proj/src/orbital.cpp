#include "satpriv/orbital.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <Eigen/Geometry>

namespace satpriv {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    return a;
}

int tle_checksum(std::string_view line) {
    int sum = 0;
    for (size_t i = 0; i + 1 < line.size(); ++i) {
        char c = line[i];
        if (c >= '0' && c <= '9') sum += c - '0';
        else if (c == '-') sum += 1;
    }
    return sum % 10;
}

double parse_field(std::string_view line, int line_no, int col_begin, int col_end,
                   const char* what) {
    // Columns are 1-based inclusive, matching the TLE format description.
    std::string field(line.substr(col_begin - 1, col_end - col_begin + 1));
    size_t pos = 0;
    double value = 0.0;
    try {
        value = std::stod(field, &pos);
    } catch (const std::exception&) {
        std::ostringstream os;
        os << "TLE line " << line_no << " columns " << col_begin << "-" << col_end << " ("
           << what << "): non-numeric field '" << field << "'";
        throw TleParseError(os.str());
    }
    while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos]))) ++pos;
    if (pos != field.size()) {
        std::ostringstream os;
        os << "TLE line " << line_no << " columns " << col_begin << "-" << col_end << " ("
           << what << "): trailing junk in '" << field << "'";
        throw TleParseError(os.str());
    }
    return value;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    std::erase_if(lines, [](const std::string& s) {
        return s.find_first_not_of(" \t") == std::string::npos;
    });
    return lines;
}

}  // namespace

double solve_kepler(double mean_anomaly, double eccentricity) {
    const double tol = 1e-12;
    double E = mean_anomaly;
    for (int it = 0; it < 50; ++it) {
        double f = E - eccentricity * std::sin(E) - mean_anomaly;
        double fp = 1.0 - eccentricity * std::cos(E);
        double dE = f / fp;
        E -= dE;
        if (std::abs(dE) < tol) break;
    }
    return E;
}

double mean_to_true_anomaly(double mean_anomaly, double eccentricity) {
    double E = solve_kepler(mean_anomaly, eccentricity);
    double f = 2.0 * std::atan2(std::sqrt(1.0 + eccentricity) * std::sin(E / 2.0),
                                std::sqrt(1.0 - eccentricity) * std::cos(E / 2.0));
    return wrap_angle(f);
}

double true_to_mean_anomaly(double true_anomaly, double eccentricity) {
    double E = 2.0 * std::atan2(std::sqrt(1.0 - eccentricity) * std::sin(true_anomaly / 2.0),
                                std::sqrt(1.0 + eccentricity) * std::cos(true_anomaly / 2.0));
    return wrap_angle(E - eccentricity * std::sin(E));
}

OrbitalElements parse_tle(std::string_view text, const GravityModel& g) {
    auto lines = split_lines(text);
    if (lines.size() == 3) lines.erase(lines.begin());  // optional name line
    if (lines.size() != 2)
        throw TleParseError("expected two element lines (plus optional name line), got " +
                            std::to_string(lines.size()));

    for (int i = 0; i < 2; ++i) {
        const std::string& line = lines[i];
        int line_no = i + 1;
        if (line.size() != 69)
            throw TleParseError("TLE line " + std::to_string(line_no) + " has length " +
                                std::to_string(line.size()) + ", expected 69");
        if (line[0] != static_cast<char>('1' + i))
            throw TleParseError("TLE line " + std::to_string(line_no) +
                                " does not start with '" + std::to_string(line_no) + "'");
        int expect = line.back() - '0';
        int got = tle_checksum(line);
        if (expect != got) {
            std::ostringstream os;
            os << "checksum mismatch on line " << line_no << ": computed " << got
               << ", line carries " << expect;
            throw TleParseError(os.str());
        }
    }

    const std::string& l2 = lines[1];
    OrbitalElements el;
    el.inclination = parse_field(l2, 2, 9, 16, "inclination") * M_PI / 180.0;
    el.raan = wrap_angle(parse_field(l2, 2, 18, 25, "RAAN") * M_PI / 180.0);
    el.eccentricity = parse_field(l2, 2, 27, 33, "eccentricity") * 1e-7;
    el.arg_perigee = wrap_angle(parse_field(l2, 2, 35, 42, "argument of perigee") * M_PI / 180.0);
    double mean_anom = wrap_angle(parse_field(l2, 2, 44, 51, "mean anomaly") * M_PI / 180.0);
    double mean_motion = parse_field(l2, 2, 53, 63, "mean motion");  // rev/day

    double n = mean_motion * kTwoPi / 86400.0;  // rad/s
    el.semi_major_axis = std::cbrt(g.mu / (n * n));
    el.true_anomaly = mean_to_true_anomaly(mean_anom, el.eccentricity);
    return el;
}

StateVector kepler_to_cartesian(const OrbitalElements& el, const GravityModel& g) {
    if (el.eccentricity >= 1.0)
        throw UnsupportedOrbitError("eccentricity " + std::to_string(el.eccentricity) +
                                    " >= 1: only elliptical orbits supported");
    const double a = el.semi_major_axis;
    const double e = el.eccentricity;
    const double f = el.true_anomaly;
    const double p = a * (1.0 - e * e);
    const double r = p / (1.0 + e * std::cos(f));

    // Perifocal frame: x toward perigee, z along angular momentum.
    Vec3 r_pf(r * std::cos(f), r * std::sin(f), 0.0);
    double h = std::sqrt(g.mu * p);
    Vec3 v_pf(-(g.mu / h) * std::sin(f), (g.mu / h) * (e + std::cos(f)), 0.0);

    const double cO = std::cos(el.raan), sO = std::sin(el.raan);
    const double ci = std::cos(el.inclination), si = std::sin(el.inclination);
    const double cw = std::cos(el.arg_perigee), sw = std::sin(el.arg_perigee);
    Eigen::Matrix3d rot;
    rot << cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si,
           sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si,
           sw * si,                 cw * si,                 ci;

    StateVector sv;
    sv.position = rot * r_pf;
    sv.velocity = rot * v_pf;
    return sv;
}

OrbitalElements cartesian_to_kepler(const StateVector& sv, const GravityModel& g) {
    const Vec3& r = sv.position;
    const Vec3& v = sv.velocity;
    const double rn = r.norm();
    Vec3 h = r.cross(v);
    const double hn = h.norm();
    if (hn < 1e-9 * std::max(1.0, rn * v.norm()))
        throw DegenerateOrbitError("angular momentum ~ 0: rectilinear orbit");

    Vec3 evec = (v.cross(h)) / g.mu - r / rn;
    double e = evec.norm();
    double energy = 0.5 * v.squaredNorm() - g.mu / rn;
    if (energy >= 0.0)
        throw UnsupportedOrbitError("non-elliptical state (specific energy >= 0)");
    double a = -g.mu / (2.0 * energy);

    OrbitalElements el;
    el.semi_major_axis = a;
    el.eccentricity = e;
    el.inclination = std::acos(std::clamp(h.z() / hn, -1.0, 1.0));

    const double kCircTol = 1e-12;
    const double kEquatTol = 1e-12;
    Vec3 node = Vec3(-h.y(), h.x(), 0.0);  // z_hat x h
    bool equatorial = el.inclination < kEquatTol || node.norm() < 1e-14 * hn;
    if (equatorial) {
        el.raan = 0.0;
        node = Vec3(1.0, 0.0, 0.0);
    } else {
        node.normalize();
        el.raan = wrap_angle(std::atan2(node.y(), node.x()));
    }

    if (e < kCircTol) {
        // Circular by convention: omega = 0, anomaly folded into f.
        el.eccentricity = e;
        el.arg_perigee = 0.0;
        double cosu = std::clamp(node.dot(r) / rn, -1.0, 1.0);
        double u = std::acos(cosu);
        if (r.z() < 0.0 || (equatorial && r.y() < 0.0)) u = kTwoPi - u;
        el.true_anomaly = wrap_angle(u);
    } else {
        Vec3 ehat = evec / e;
        double cosw = std::clamp(node.dot(ehat), -1.0, 1.0);
        double w = std::acos(cosw);
        if (ehat.z() < 0.0 || (equatorial && ehat.y() < 0.0)) w = kTwoPi - w;
        el.arg_perigee = wrap_angle(w);

        double cosf = std::clamp(ehat.dot(r) / rn, -1.0, 1.0);
        double f = std::acos(cosf);
        if (r.dot(v) < 0.0) f = kTwoPi - f;
        el.true_anomaly = wrap_angle(f);
    }
    return el;
}

Vec3 acceleration(const Vec3& r, const GravityModel& g) {
    const double rn = r.norm();
    if (rn <= 0.0) throw std::domain_error("acceleration: |r| = 0 singularity");
    Vec3 a = -(g.mu / (rn * rn * rn)) * r;

    const double x = r.x(), y = r.y(), z = r.z();
    const double Re = g.earth_radius;
    const double r2 = rn * rn;
    const double z2 = z * z;

    if (!g.zonal_coeffs.empty()) {
        const double J2 = g.zonal_coeffs[0];
        double c = -1.5 * J2 * g.mu * Re * Re / std::pow(rn, 5);
        double zr = 5.0 * z2 / r2;
        a += c * Vec3(x * (1.0 - zr), y * (1.0 - zr), z * (3.0 - zr));
    }
    if (g.zonal_coeffs.size() > 1) {
        const double J3 = g.zonal_coeffs[1];
        double c = -2.5 * J3 * g.mu * std::pow(Re, 3) / std::pow(rn, 7);
        double t = 3.0 * z - 7.0 * z2 * z / r2;
        a += c * Vec3(x * t, y * t, 6.0 * z2 - 7.0 * z2 * z2 / r2 - 0.6 * r2);
    }
    if (g.zonal_coeffs.size() > 2) {
        const double J4 = g.zonal_coeffs[2];
        double c = 1.875 * J4 * g.mu * std::pow(Re, 4) / std::pow(rn, 7);
        double t = 1.0 - 14.0 * z2 / r2 + 21.0 * z2 * z2 / (r2 * r2);
        a += c * Vec3(x * t, y * t,
                      z * (5.0 - 70.0 * z2 / (3.0 * r2) + 21.0 * z2 * z2 / (r2 * r2)));
    }
    return a;
}

double orbital_period(double semi_major_axis, double mu) {
    return kTwoPi * std::sqrt(std::pow(semi_major_axis, 3) / mu);
}

namespace {
Vec6 dynamics_rhs(const Vec6& s, const GravityModel& g) {
    Vec6 ds;
    ds.head<3>() = s.tail<3>();
    ds.tail<3>() = acceleration(s.head<3>(), g);
    return ds;
}
}  // namespace

Vec6 rk4_step(const Vec6& state, double dt, const GravityModel& g) {
    Vec6 k1 = dynamics_rhs(state, g);
    Vec6 k2 = dynamics_rhs(state + 0.5 * dt * k1, g);
    Vec6 k3 = dynamics_rhs(state + 0.5 * dt * k2, g);
    Vec6 k4 = dynamics_rhs(state + dt * k3, g);
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::vector<StateVector> propagate(const StateVector& sv, double dt, int n_steps,
                                   const GravityModel& g) {
    if (dt <= 0.0) throw std::invalid_argument("propagate: dt must be > 0");
    if (n_steps < 0) throw std::invalid_argument("propagate: n_steps must be >= 0");
    std::vector<StateVector> out;
    out.reserve(static_cast<size_t>(n_steps) + 1);
    out.push_back(sv);

    Vec6 s;
    s << sv.position, sv.velocity;
    for (int k = 0; k < n_steps; ++k) {
        s = rk4_step(s, dt, g);
        if (s.head<3>().norm() < g.earth_radius)
            throw ReentryError("propagate: trajectory fell below Earth radius at step " +
                                   std::to_string(k + 1),
                               k + 1);
        StateVector next;
        next.position = s.head<3>();
        next.velocity = s.tail<3>();
        next.epoch = sv.epoch + (k + 1) * dt;
        out.push_back(next);
    }
    return out;
}

}  // namespace satpriv
