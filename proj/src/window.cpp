#include "satpriv/window.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace satpriv {

namespace {

int step_of(double t, double dt, const char* what) {
    double raw = t / dt;
    int k = static_cast<int>(std::llround(raw));
    if (k < 0 || std::abs(t - k * dt) > 1e-9 * std::max(1.0, std::abs(t))) {
        std::ostringstream os;
        os << what << " time " << t << " s is not a nonnegative multiple of dt = " << dt
           << " s (nearest grid times: " << std::floor(raw) * dt << ", " << std::ceil(raw) * dt
           << ")";
        throw std::invalid_argument(os.str());
    }
    return k;
}

std::vector<int> saved_steps(const WindowConfig& cfg, int n_total) {
    std::set<int> steps;
    for (int k = 0; k <= n_total; k += cfg.save_every) steps.insert(k);
    for (double t : cfg.meas_times) {
        int k = step_of(t, cfg.dt, "measurement");
        if (k > n_total)
            throw std::invalid_argument("measurement time " + std::to_string(t) +
                                        " s beyond horizon");
        steps.insert(k);
    }
    for (double t : cfg.extra_save_times) {
        int k = step_of(t, cfg.dt, "saved");
        if (k > n_total)
            throw std::invalid_argument("saved time " + std::to_string(t) + " s beyond horizon");
        steps.insert(k);
    }
    return {steps.begin(), steps.end()};
}

Ensemble members_from_belief(const GaussianBelief& init, const FilterKind& filter) {
    if (std::holds_alternative<EnkfKind>(filter)) {
        const auto& ek = std::get<EnkfKind>(filter);
        return sample_ensemble(init, ek.n, ek.seed);
    }
    return sigma_points(init, std::get<UkfKind>(filter).cfg);
}

AugmentedWindow window_from_members(const Ensemble& members, const WindowConfig& cfg,
                                    const StepFn& step) {
    if (cfg.dt <= 0.0) throw std::invalid_argument("build_window: dt must be > 0");
    if (cfg.save_every < 1) throw std::invalid_argument("build_window: save_every must be >= 1");
    if (cfg.horizon < 0.0) throw std::invalid_argument("build_window: horizon must be >= 0");
    int n_total = step_of(cfg.horizon, cfg.dt, "horizon");
    if (n_total % cfg.save_every != 0)
        throw std::invalid_argument("build_window: horizon not divisible by dt*save_every");
    if (!cfg.meas_components.empty() && cfg.meas_components.size() != cfg.meas_times.size())
        throw std::invalid_argument("build_window: meas_components size mismatch");

    std::vector<int> steps = saved_steps(cfg, n_total);
    const int n_saved = static_cast<int>(steps.size());
    const int d = static_cast<int>(members.state_dim());
    const int n_members = static_cast<int>(members.size());

    Mat stacked(d * n_saved, n_members);
    for (int j = 0; j < n_members; ++j) {
        Vec state = members.samples.col(j);
        size_t next = 0;
        for (int k = 0; k <= n_total; ++k) {
            if (k > 0) {
                try {
                    state = step(state, (k - 1) * cfg.dt, cfg.dt);
                } catch (const std::exception& ex) {
                    throw std::runtime_error("build_window: member " + std::to_string(j) +
                                             " failed at t = " + std::to_string(k * cfg.dt) +
                                             " s: " + ex.what());
                }
            }
            if (next < steps.size() && steps[next] == k) {
                stacked.block(d * static_cast<int>(next), j, d, 1) = state;
                ++next;
            }
        }
    }

    Ensemble aug = members;
    aug.samples = std::move(stacked);
    GaussianBelief moments = ensemble_moments(aug);

    AugmentedWindow w;
    w.state_dim = d;
    w.aug_dim = d * n_saved;
    w.saved_times.reserve(n_saved);
    for (int k : steps) w.saved_times.push_back(k * cfg.dt);
    w.mean = moments.mean;

    // Linear measurement map: selection rows per measurement time/component.
    int meas_dim = 0;
    std::vector<std::vector<int>> comps(cfg.meas_times.size(), {0, 1, 2});
    if (!cfg.meas_components.empty()) comps = cfg.meas_components;
    for (const auto& c : comps) meas_dim += static_cast<int>(c.size());

    Mat C = Mat::Zero(meas_dim, w.aug_dim);
    int row = 0;
    for (size_t i = 0; i < cfg.meas_times.size(); ++i) {
        int k = step_of(cfg.meas_times[i], cfg.dt, "measurement");
        auto it = std::lower_bound(steps.begin(), steps.end(), k);
        int ti = static_cast<int>(it - steps.begin());
        for (int comp : comps[i]) {
            if (comp < 0 || comp >= d)
                throw std::invalid_argument("build_window: component index out of range");
            C(row++, ti * d + comp) = 1.0;
        }
    }
    w.meas_matrix = C;
    w.prior.sigma_xx = moments.covariance;
    w.prior.sigma_xy = moments.covariance * C.transpose();
    w.prior.sigma_yy = C * moments.covariance * C.transpose();
    w.prior.r_sensor = Mat::Zero(meas_dim, meas_dim);
    return w;
}

}  // namespace

AugmentedWindow build_window(const GaussianBelief& init, const WindowConfig& cfg,
                             const FilterKind& filter, const StepFn& step) {
    return window_from_members(members_from_belief(init, filter), cfg, step);
}

AugmentedWindow build_window(const GaussianBelief& init, const WindowConfig& cfg,
                             const FilterKind& filter, const GravityModel& g) {
    if (init.mean.size() != 6)
        throw std::invalid_argument("build_window: Cartesian initial belief must be 6-dim");
    StepFn step = [&g](const Vec& s, double, double dt) -> Vec {
        Vec6 x = s;
        Vec6 out = rk4_step(x, dt, g);
        if (out.head<3>().norm() < g.earth_radius)
            throw std::runtime_error("reentry (radius below Earth surface)");
        return out;
    };
    return build_window(init, cfg, filter, step);
}

AugmentedWindow build_window(const KeplerianUncertainty& init, const WindowConfig& cfg,
                             const FilterKind& filter, const GravityModel& g) {
    GaussianBelief kep;
    kep.mean.resize(6);
    kep.mean << init.mean.semi_major_axis, init.mean.eccentricity, init.mean.inclination,
        init.mean.raan, init.mean.arg_perigee, init.mean.true_anomaly;
    Vec var = Vec::Zero(6);
    var(0) = std::pow(init.sigma_fraction_a * init.mean.semi_major_axis, 2);
    var(1) = std::pow(init.sigma_fraction_e * init.mean.eccentricity, 2);
    var(2) = std::pow(init.sigma_fraction_i * init.mean.inclination, 2);
    kep.covariance = var.asDiagonal();

    Ensemble kep_members = members_from_belief(kep, filter);
    Ensemble cart = kep_members;
    for (Eigen::Index j = 0; j < kep_members.size(); ++j) {
        OrbitalElements el;
        Vec col = kep_members.samples.col(j);
        el.semi_major_axis = col(0);
        el.eccentricity = col(1);
        el.inclination = col(2);
        el.raan = col(3);
        el.arg_perigee = col(4);
        el.true_anomaly = col(5);
        StateVector sv = kepler_to_cartesian(el, g);
        cart.samples.col(j) << sv.position, sv.velocity;
    }

    StepFn step = [&g](const Vec& s, double, double dt) -> Vec {
        Vec6 x = s;
        Vec6 out = rk4_step(x, dt, g);
        if (out.head<3>().norm() < g.earth_radius)
            throw std::runtime_error("reentry (radius below Earth surface)");
        return out;
    };
    return window_from_members(cart, cfg, step);
}

SelectionMask make_mask(const AugmentedWindow& window, double time,
                        const std::vector<int>& components) {
    int ti = -1;
    for (size_t i = 0; i < window.saved_times.size(); ++i) {
        if (std::abs(window.saved_times[i] - time) <= 1e-9 * std::max(1.0, std::abs(time))) {
            ti = static_cast<int>(i);
            break;
        }
    }
    if (ti < 0) {
        double below = -1.0, above = -1.0;
        for (double t : window.saved_times) {
            if (t <= time) below = t;
            if (t >= time && above < 0.0) above = t;
        }
        std::ostringstream os;
        os << "make_mask: time " << time << " s is not on the saved grid (nearest saved times: "
           << below << ", " << above << ")";
        throw std::invalid_argument(os.str());
    }
    SelectionMask m;
    m.matrix = Mat::Zero(components.size(), window.aug_dim);
    int row = 0;
    for (int comp : components) {
        if (comp < 0 || comp >= window.state_dim)
            throw std::invalid_argument("make_mask: component index out of range");
        m.rows.emplace_back(ti, comp);
        m.matrix(row++, ti * window.state_dim + comp) = 1.0;
    }
    return m;
}

Mat sensor_noise_block(const WindowConfig& cfg, const std::vector<double>& per_sensor_variances) {
    size_t expected = 0;
    if (cfg.meas_components.empty()) {
        expected = 3 * cfg.meas_times.size();
    } else {
        for (const auto& c : cfg.meas_components) expected += c.size();
    }
    if (per_sensor_variances.size() != expected)
        throw std::invalid_argument("sensor_noise_block: expected " + std::to_string(expected) +
                                    " variances, got " +
                                    std::to_string(per_sensor_variances.size()));
    Mat r = Mat::Zero(expected, expected);
    for (size_t i = 0; i < expected; ++i) {
        if (per_sensor_variances[i] < 0.0)
            throw std::invalid_argument("sensor_noise_block: negative variance at index " +
                                        std::to_string(i));
        r(i, i) = per_sensor_variances[i];
    }
    return r;
}

AugmentedWindow restrict_window(const AugmentedWindow& window,
                                const std::vector<double>& keep_times) {
    std::vector<int> keep_idx;
    for (double t : keep_times) {
        int ti = -1;
        for (size_t i = 0; i < window.saved_times.size(); ++i)
            if (std::abs(window.saved_times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
                ti = static_cast<int>(i);
                break;
            }
        if (ti < 0)
            throw std::invalid_argument("restrict_window: time " + std::to_string(t) +
                                        " not on the saved grid");
        keep_idx.push_back(ti);
    }
    std::sort(keep_idx.begin(), keep_idx.end());
    keep_idx.erase(std::unique(keep_idx.begin(), keep_idx.end()), keep_idx.end());

    const int d = window.state_dim;
    const int n_new = static_cast<int>(keep_idx.size());
    std::vector<int> rows;
    rows.reserve(n_new * d);
    for (int ti : keep_idx)
        for (int c = 0; c < d; ++c) rows.push_back(ti * d + c);

    AugmentedWindow w;
    w.state_dim = d;
    w.aug_dim = n_new * d;
    for (int ti : keep_idx) w.saved_times.push_back(window.saved_times[ti]);
    w.mean.resize(w.aug_dim);
    w.prior.sigma_xx.resize(w.aug_dim, w.aug_dim);
    for (int a = 0; a < w.aug_dim; ++a) {
        w.mean(a) = window.mean(rows[a]);
        for (int b = 0; b < w.aug_dim; ++b)
            w.prior.sigma_xx(a, b) = window.prior.sigma_xx(rows[a], rows[b]);
    }

    // Each measurement row selects exactly one augmented index; remap it.
    const int meas_dim = static_cast<int>(window.meas_matrix.rows());
    w.meas_matrix = Mat::Zero(meas_dim, w.aug_dim);
    for (int r = 0; r < meas_dim; ++r) {
        int old_col = -1;
        for (int c = 0; c < window.aug_dim; ++c)
            if (window.meas_matrix(r, c) != 0.0) {
                old_col = c;
                break;
            }
        auto it = std::find(rows.begin(), rows.end(), old_col);
        if (it == rows.end())
            throw std::invalid_argument(
                "restrict_window: keep_times must include every measurement time");
        w.meas_matrix(r, static_cast<int>(it - rows.begin())) = 1.0;
    }
    w.prior.sigma_xy = w.prior.sigma_xx * w.meas_matrix.transpose();
    w.prior.sigma_yy = w.meas_matrix * w.prior.sigma_xx * w.meas_matrix.transpose();
    w.prior.r_sensor = window.prior.r_sensor;
    return w;
}

}  // namespace satpriv
