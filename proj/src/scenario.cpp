#include "satpriv/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace satpriv {

using ordered_json = nlohmann::ordered_json;

const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::utility: return "utility";
        case RunMode::privacy: return "privacy";
        case RunMode::utility_aware: return "utility_aware";
        case RunMode::privacy_aware: return "privacy_aware";
        case RunMode::precision: return "precision";
    }
    return "unknown";
}

namespace {

void require_keys(const ordered_json& obj, const std::set<std::string>& allowed,
                  const std::string& where) {
    if (!obj.is_object()) throw ScenarioError(where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key))
            throw ScenarioError(where + ": unknown key '" + key + "'");
    }
}

int component_index(const std::string& name) {
    static const std::vector<std::string> names = {"x", "y", "z", "vx", "vy", "vz"};
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ScenarioError("unknown state component '" + name + "'");
    return static_cast<int>(it - names.begin());
}

std::vector<int> component_list(const ordered_json& arr, const std::string& where) {
    if (!arr.is_array() || arr.empty())
        throw ScenarioError(where + ": components must be a non-empty array");
    std::vector<int> out;
    for (const auto& c : arr) out.push_back(component_index(c.get<std::string>()));
    return out;
}

ConstraintSpec parse_constraint(const ordered_json& j, const std::string& where, bool privacy) {
    std::set<std::string> allowed = {"time_s", "components", "gamma_km2"};
    if (privacy) allowed.insert("fraction_of_prior");
    require_keys(j, allowed, where);
    if (!j.contains("time_s")) throw ScenarioError(where + ": missing 'time_s'");
    ConstraintSpec c;
    c.time_s = j.at("time_s").get<double>();
    c.components = j.contains("components") ? component_list(j.at("components"), where)
                                            : std::vector<int>{0, 1, 2};
    if (j.contains("gamma_km2")) c.gamma_km2 = j.at("gamma_km2").get<double>();
    if (j.contains("fraction_of_prior"))
        c.fraction_of_prior = j.at("fraction_of_prior").get<double>();
    if (c.gamma_km2 && c.fraction_of_prior)
        throw ScenarioError(where + ": give either gamma_km2 or fraction_of_prior, not both");
    if (c.gamma_km2 && *c.gamma_km2 <= 0.0)
        throw ScenarioError(where + ": gamma_km2 must be > 0");
    if (c.fraction_of_prior && (*c.fraction_of_prior <= 0.0 || *c.fraction_of_prior > 1.0))
        throw ScenarioError(where + ": fraction_of_prior must lie in (0, 1]");
    return c;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

Scenario parse_scenario(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& ex) {
        throw ScenarioError(std::string("scenario parse error: ") + ex.what());
    }
    require_keys(j,
                 {"name", "orbit", "init_uncertainty", "filter", "window", "sensor_noise_km2",
                  "utility", "privacy", "mode", "solver"},
                 "scenario");

    Scenario s;
    if (j.contains("name")) s.name = j.at("name").get<std::string>();

    if (!j.contains("orbit")) throw ScenarioError("scenario: missing 'orbit'");
    require_keys(j.at("orbit"), {"tle", "elements"}, "orbit");
    if (j.at("orbit").contains("tle")) {
        const auto& t = j.at("orbit").at("tle");
        if (!t.is_array()) throw ScenarioError("orbit.tle: expected an array of lines");
        std::string text;
        for (const auto& line : t) text += line.get<std::string>() + "\n";
        s.tle = text;
    } else if (j.at("orbit").contains("elements")) {
        const auto& e = j.at("orbit").at("elements");
        require_keys(e,
                     {"semi_major_axis_km", "eccentricity", "inclination_deg", "raan_deg",
                      "arg_perigee_deg", "true_anomaly_deg"},
                     "orbit.elements");
        OrbitalElements el;
        el.semi_major_axis = e.at("semi_major_axis_km").get<double>();
        el.eccentricity = e.value("eccentricity", 0.0);
        el.inclination = e.value("inclination_deg", 0.0) * M_PI / 180.0;
        el.raan = e.value("raan_deg", 0.0) * M_PI / 180.0;
        el.arg_perigee = e.value("arg_perigee_deg", 0.0) * M_PI / 180.0;
        el.true_anomaly = e.value("true_anomaly_deg", 0.0) * M_PI / 180.0;
        s.elements = el;
    } else {
        throw ScenarioError("orbit: needs 'tle' or 'elements'");
    }

    if (j.contains("init_uncertainty")) {
        require_keys(j.at("init_uncertainty"), {"parameter", "sigma_fraction"},
                     "init_uncertainty");
        s.uncertainty_parameter =
            j.at("init_uncertainty").value("parameter", std::string("semi_major_axis"));
        s.sigma_fraction = j.at("init_uncertainty").value("sigma_fraction", 0.0);
        if (s.uncertainty_parameter != "semi_major_axis" &&
            s.uncertainty_parameter != "eccentricity" && s.uncertainty_parameter != "inclination")
            throw ScenarioError("init_uncertainty.parameter must be semi_major_axis, "
                                "eccentricity or inclination");
    } else {
        s.defaults_applied.push_back("init_uncertainty: none (deterministic orbit)");
    }

    if (j.contains("filter")) {
        require_keys(j.at("filter"), {"enkf", "ukf"}, "filter");
        if (j.at("filter").contains("enkf")) {
            const auto& f = j.at("filter").at("enkf");
            require_keys(f, {"n", "seed"}, "filter.enkf");
            EnkfKind k;
            k.n = f.value("n", 100);
            k.seed = f.value("seed", 0);
            if (k.n < 2) throw ScenarioError("filter.enkf.n must be >= 2");
            s.filter = k;
        } else if (j.at("filter").contains("ukf")) {
            const auto& f = j.at("filter").at("ukf");
            require_keys(f, {"alpha", "beta", "kappa"}, "filter.ukf");
            UkfKind k;
            k.cfg.alpha = f.value("alpha", 0.001);
            k.cfg.beta = f.value("beta", 2.0);
            k.cfg.kappa = f.value("kappa", 0.0);
            s.filter = k;
        } else {
            throw ScenarioError("filter: needs 'enkf' or 'ukf'");
        }
    } else {
        s.defaults_applied.push_back("filter: ukf(alpha=0.001, beta=2, kappa=0)");
    }

    if (!j.contains("window")) throw ScenarioError("scenario: missing 'window'");
    require_keys(j.at("window"),
                 {"horizon_s", "dt_s", "save_every_s", "measurement_times_s",
                  "measured_components"},
                 "window");
    const auto& w = j.at("window");
    if (!w.contains("horizon_s")) throw ScenarioError("window: missing 'horizon_s'");
    s.horizon_s = w.at("horizon_s").get<double>();
    s.dt_s = w.value("dt_s", 1.0);
    s.save_every_s = w.value("save_every_s", 100.0);
    if (!w.contains("measurement_times_s"))
        throw ScenarioError("window: missing 'measurement_times_s'");
    for (const auto& t : w.at("measurement_times_s"))
        s.measurement_times_s.push_back(t.get<double>());
    if (!std::is_sorted(s.measurement_times_s.begin(), s.measurement_times_s.end()))
        throw ScenarioError("window.measurement_times_s must be sorted");
    if (w.contains("measured_components"))
        s.measured_components = component_list(w.at("measured_components"), "window");
    else
        s.defaults_applied.push_back("window.measured_components: [x, y, z]");

    if (j.contains("sensor_noise_km2")) {
        s.sensor_noise_km2 = j.at("sensor_noise_km2").get<double>();
        if (s.sensor_noise_km2 < 0.0) throw ScenarioError("sensor_noise_km2 must be >= 0");
    } else {
        s.defaults_applied.push_back("sensor_noise_km2: 0.01 (paper leaves it unstated)");
    }

    for (size_t i = 0; j.contains("utility") && i < j.at("utility").size(); ++i)
        s.utility.push_back(
            parse_constraint(j.at("utility")[i], "utility[" + std::to_string(i) + "]", false));
    for (size_t i = 0; j.contains("privacy") && i < j.at("privacy").size(); ++i)
        s.privacy.push_back(
            parse_constraint(j.at("privacy")[i], "privacy[" + std::to_string(i) + "]", true));

    if (!j.contains("mode")) throw ScenarioError("scenario: missing 'mode'");
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "utility") s.mode = RunMode::utility;
    else if (mode == "privacy") s.mode = RunMode::privacy;
    else if (mode == "utility_aware") s.mode = RunMode::utility_aware;
    else if (mode == "privacy_aware") s.mode = RunMode::privacy_aware;
    else if (mode == "precision") s.mode = RunMode::precision;
    else throw ScenarioError("mode: unknown value '" + mode + "'");

    if (j.contains("solver")) {
        require_keys(j.at("solver"), {"tol", "eps", "max_iter"}, "solver");
        s.solver_tol = j.at("solver").value("tol", 1e-8);
        s.solver_eps = j.at("solver").value("eps", 1e-3);
        s.solver_max_iter = j.at("solver").value("max_iter", 50);
    } else {
        s.defaults_applied.push_back("solver: tol=1e-8, eps=1e-3, max_iter=50");
    }

    // Mode-required constraint lists.
    bool needs_utility = s.mode != RunMode::privacy;
    bool needs_privacy = s.mode == RunMode::privacy || s.mode == RunMode::utility_aware ||
                         s.mode == RunMode::privacy_aware;
    if (needs_utility && s.utility.empty())
        throw ScenarioError("mode '" + mode + "' requires at least one utility entry");
    if (needs_privacy && s.privacy.empty())
        throw ScenarioError("mode '" + mode + "' requires at least one privacy entry");
    for (const auto& u : s.utility)
        if (!u.gamma_km2) throw ScenarioError("utility entries need gamma_km2");
    if (s.mode == RunMode::privacy || s.mode == RunMode::privacy_aware)
        for (const auto& pr : s.privacy)
            if (!pr.gamma_km2 && !pr.fraction_of_prior)
                throw ScenarioError("privacy entries need gamma_km2 or fraction_of_prior");
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

namespace {

struct Csv {
    std::ofstream out;
    explicit Csv(const std::string& path) : out(path, std::ios::binary) {
        if (!out) throw ScenarioError("cannot write '" + path + "'");
    }
    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ",";
            out << cells[i];
        }
        out << "\n";
    }
};

}  // namespace

RunReport run(const Scenario& scenario, const std::string& out_dir, const RunOptions& ropts) {
    Scenario s = scenario;
    if (ropts.mode_override) s.mode = *ropts.mode_override;
    if (ropts.tol_override) s.solver_tol = *ropts.tol_override;
    if (ropts.filter_override) {
        if (*ropts.filter_override == "enkf") {
            EnkfKind k;
            if (std::holds_alternative<EnkfKind>(s.filter)) k = std::get<EnkfKind>(s.filter);
            s.filter = k;
        } else if (*ropts.filter_override == "ukf") {
            if (!std::holds_alternative<UkfKind>(s.filter)) s.filter = UkfKind{};
        } else {
            throw ScenarioError("filter override must be 'enkf' or 'ukf'");
        }
    }
    if (ropts.seed_override && std::holds_alternative<EnkfKind>(s.filter))
        std::get<EnkfKind>(s.filter).seed = *ropts.seed_override;

    std::filesystem::create_directories(out_dir);

    RunReport rep;
    rep.scenario = s;

    // ---- orbit + initial uncertainty
    GravityModel g = GravityModel::earth_j4();
    OrbitalElements el = s.elements ? *s.elements : parse_tle(s.tle, g);
    KeplerianUncertainty unc;
    unc.mean = el;
    if (s.uncertainty_parameter == "semi_major_axis") unc.sigma_fraction_a = s.sigma_fraction;
    if (s.uncertainty_parameter == "eccentricity") unc.sigma_fraction_e = s.sigma_fraction;
    if (s.uncertainty_parameter == "inclination") unc.sigma_fraction_i = s.sigma_fraction;

    // ---- window
    WindowConfig cfg;
    cfg.horizon = s.horizon_s;
    cfg.dt = s.dt_s;
    cfg.save_every = static_cast<int>(std::llround(s.save_every_s / s.dt_s));
    if (cfg.save_every < 1 ||
        std::abs(cfg.save_every * s.dt_s - s.save_every_s) > 1e-9 * std::max(1.0, s.save_every_s))
        throw ScenarioError("save_every_s must be a positive multiple of dt_s");
    cfg.meas_times = s.measurement_times_s;
    cfg.meas_components.assign(s.measurement_times_s.size(), s.measured_components);
    std::vector<double> constraint_times;
    for (const auto& u : s.utility) constraint_times.push_back(u.time_s);
    for (const auto& p : s.privacy) constraint_times.push_back(p.time_s);
    cfg.extra_save_times = constraint_times;

    AugmentedWindow full = build_window(unc, cfg, s.filter, g);
    const int axes_per_site = static_cast<int>(s.measured_components.size());
    const int m = static_cast<int>(full.meas_matrix.rows());
    std::vector<double> sensor_vars(m, s.sensor_noise_km2);
    full.prior.r_sensor = sensor_noise_block(cfg, sensor_vars);

    // Synthesis prior restricted to measurement + constraint times.
    std::vector<double> keep = s.measurement_times_s;
    keep.insert(keep.end(), constraint_times.begin(), constraint_times.end());
    AugmentedWindow win = restrict_window(full, keep);
    win.prior.r_sensor = full.prior.r_sensor;

    // ---- masks and resolved gammas
    TradeoffSpec spec;
    for (const auto& u : s.utility) {
        TradeoffEntry e;
        e.mask = make_mask(win, u.time_s, u.components);
        e.gamma = *u.gamma_km2;
        spec.utility.push_back(std::move(e));
        rep.resolved_utility_gammas.push_back(*u.gamma_km2);
    }
    for (const auto& p : s.privacy) {
        TradeoffEntry e;
        e.mask = make_mask(win, p.time_s, p.components);
        if (p.fraction_of_prior) {
            double prior = (e.mask.matrix * win.prior.sigma_xx * e.mask.matrix.transpose()).trace();
            e.gamma = *p.fraction_of_prior * prior;
        } else if (p.gamma_km2) {
            e.gamma = *p.gamma_km2;
        } else {
            e.gamma = 0.0;  // objective modes
        }
        spec.privacy.push_back(std::move(e));
        rep.resolved_privacy_gammas.push_back(spec.privacy.back().gamma);
    }

    SynthesisOptions opts;
    opts.tol = s.solver_tol;
    opts.eps = s.solver_eps;
    opts.max_iter = s.solver_max_iter;
    std::ofstream dump_stream;
    if (ropts.dump_problem) {
        dump_stream.open(out_dir + "/problem_dump.txt", std::ios::binary);
        opts.dump = &dump_stream;
    }

    // ---- dispatch
    SynthesisResult result;
    std::string stage = "synthesis";
    try {
        switch (s.mode) {
            case RunMode::utility:
                result = max_noise_for_utility(win.prior, spec, opts, &win.meas_matrix);
                break;
            case RunMode::precision:
                result = min_precision_for_utility(win.prior, win.meas_matrix, spec, opts);
                break;
            case RunMode::privacy:
                result = min_noise_for_privacy(win.prior, spec, opts);
                break;
            case RunMode::utility_aware:
                result = utility_aware_privacy(win.prior, win.meas_matrix, spec, opts);
                break;
            case RunMode::privacy_aware:
                result = privacy_aware_utility(win.prior, win.meas_matrix, spec, opts);
                break;
        }
    } catch (const std::exception& ex) {
        throw ScenarioError("stage " + stage + ": " + ex.what());
    }
    rep.result = result;

    // Utility-aware runs also report the precision-only baseline privacy.
    if (s.mode == RunMode::utility_aware && result.precisions) {
        SynthesisResult base = min_precision_for_utility(win.prior, win.meas_matrix,
                                                         TradeoffSpec{spec.utility, {}}, opts);
        bool base_certified = base.precisions.has_value();
        for (size_t i = 0; base_certified && i < base.achieved_utility.size(); ++i)
            base_certified = base.achieved_utility[i] <= spec.utility[i].gamma + 1e-6;
        if (base_certified && (base.status == SolveStatus::optimal ||
                               base.status == SolveStatus::max_iter) &&
            !spec.privacy.empty()) {
            std::vector<SelectionMask> pmasks;
            for (const auto& e : spec.privacy) pmasks.push_back(e.mask);
            auto base_tr = traces_with_precisions(win.prior, *base.precisions, pmasks, false);
            if (!result.achieved_privacy.empty() && base_tr[0] > 0.0) {
                rep.baseline_privacy_sqrt_trace = std::sqrt(base_tr[0]);
                rep.improvement_factor =
                    std::sqrt(result.achieved_privacy[0]) / std::sqrt(base_tr[0]);
            }
        }
    }

    // ---- per-site summaries
    bool use_sensor_in_total = s.mode != RunMode::precision;
    if (result.precisions) {
        const Vec& prec = *result.precisions;
        for (size_t site = 0; site < s.measurement_times_s.size(); ++site) {
            SiteReport sr;
            sr.site = static_cast<int>(site) + 1;
            sr.time_s = s.measurement_times_s[site];
            for (int a = 0; a < axes_per_site; ++a) {
                double lv = prec(static_cast<int>(site) * axes_per_site + a);
                sr.precisions.push_back(lv);
                sr.noise_variances.push_back(lv > 0.0 ? 1.0 / lv
                                                      : std::numeric_limits<double>::infinity());
            }
            rep.sites.push_back(std::move(sr));
        }
    }

    // ---- posterior trace over the full diagnostic grid
    {
        Mat post;
        if (result.precisions) {
            Vec sd = *result.precisions;
            std::vector<bool> active(m);
            int n_active = 0;
            for (int i = 0; i < m; ++i) {
                active[i] = sd(i) >= 1e-9;
                n_active += active[i];
            }
            if (n_active == 0) {
                post = full.prior.sigma_xx;
            } else {
                PriorMoments red = reduce_measurements(full.prior, active);
                if (!use_sensor_in_total) red.r_sensor.setZero();
                Vec r(n_active);
                int k = 0;
                for (int i = 0; i < m; ++i)
                    if (active[i]) r(k++) = 1.0 / sd(i);
                post = posterior_covariance(red, Mat(r.asDiagonal()));
            }
        } else if (result.r_data) {
            post = posterior_covariance(full.prior, *result.r_data);
        } else {
            post = full.prior.sigma_xx;
        }
        for (size_t ti = 0; ti < full.saved_times.size(); ++ti) {
            double tr_post = 0.0, tr_prior = 0.0;
            for (int c = 0; c < 3; ++c) {
                int idx = static_cast<int>(ti) * full.state_dim + c;
                tr_post += post(idx, idx);
                tr_prior += full.prior.sigma_xx(idx, idx);
            }
            rep.trace_times_s.push_back(full.saved_times[ti]);
            rep.posterior_sqrt_trace_km.push_back(std::sqrt(std::max(tr_post, 0.0)));
            rep.prior_sqrt_trace_km.push_back(std::sqrt(std::max(tr_prior, 0.0)));
        }
    }

    // ---- report files
    {
        Csv csv(out_dir + "/precisions.csv");
        csv.row({"site", "time_s", "axis", "precision", "noise_variance_km2"});
        static const char* axis_names[] = {"x", "y", "z", "vx", "vy", "vz"};
        for (const auto& sr : rep.sites) {
            for (size_t a = 0; a < sr.precisions.size(); ++a) {
                csv.row({std::to_string(sr.site), format_double(sr.time_s),
                         axis_names[s.measured_components[a]], format_double(sr.precisions[a]),
                         format_double(sr.noise_variances[a])});
            }
        }
    }
    {
        Csv csv(out_dir + "/posterior_trace.csv");
        csv.row({"time_s", "sqrt_trace_km", "prior_sqrt_trace_km"});
        for (size_t i = 0; i < rep.trace_times_s.size(); ++i)
            csv.row({format_double(rep.trace_times_s[i]),
                     format_double(rep.posterior_sqrt_trace_km[i]),
                     format_double(rep.prior_sqrt_trace_km[i])});
    }
    {
        Csv csv(out_dir + "/convergence.csv");
        csv.row({"iter", "gamma", "delta"});
        for (const auto& it : result.iterations)
            csv.row({std::to_string(it.iter), format_double(it.gamma),
                     format_double(it.delta)});
    }

    ordered_json summary;
    summary["scenario"] = {{"name", s.name},
                           {"mode", to_string(s.mode)},
                           {"horizon_s", s.horizon_s},
                           {"dt_s", s.dt_s},
                           {"measurement_times_s", s.measurement_times_s},
                           {"sensor_noise_km2", s.sensor_noise_km2}};
    summary["status"] = to_string(result.status);
    summary["message"] = result.message;
    ordered_json ach_u = ordered_json::array();
    for (size_t i = 0; i < result.achieved_utility.size(); ++i) {
        ach_u.push_back({{"time_s", s.utility[i].time_s},
                         {"gamma_km2", rep.resolved_utility_gammas[i]},
                         {"achieved_trace_km2", result.achieved_utility[i]},
                         {"achieved_sqrt_trace_km", std::sqrt(std::max(
                                                        result.achieved_utility[i], 0.0))}});
    }
    summary["achieved_utility"] = ach_u;
    ordered_json ach_p = ordered_json::array();
    for (size_t i = 0; i < result.achieved_privacy.size(); ++i) {
        ach_p.push_back({{"time_s", s.privacy[i].time_s},
                         {"gamma_km2", rep.resolved_privacy_gammas[i]},
                         {"achieved_trace_km2", result.achieved_privacy[i]},
                         {"achieved_sqrt_trace_km", std::sqrt(std::max(
                                                        result.achieved_privacy[i], 0.0))}});
    }
    summary["achieved_privacy"] = ach_p;
    ordered_json sites = ordered_json::array();
    for (const auto& sr : rep.sites) {
        double sum_prec = 0.0;
        for (double v : sr.precisions) sum_prec += v;
        sites.push_back({{"site", sr.site},
                         {"time_s", sr.time_s},
                         {"sum_precision", sum_prec},
                         {"per_axis_precision", sr.precisions},
                         {"per_axis_noise_km2", sr.noise_variances}});
    }
    summary["sites"] = sites;
    if (rep.improvement_factor) {
        summary["privacy_improvement_factor"] = *rep.improvement_factor;
        summary["baseline_privacy_sqrt_trace_km"] = *rep.baseline_privacy_sqrt_trace;
    }
    ordered_json iters = ordered_json::array();
    for (const auto& it : result.iterations)
        iters.push_back({{"iter", it.iter}, {"gamma", it.gamma}, {"delta", it.delta}});
    summary["iterations"] = iters;
    summary["solver"] = {{"iterations", result.stats.iterations},
                         {"primal_residual", result.stats.primal_residual},
                         {"dual_residual", result.stats.dual_residual},
                         {"duality_gap", result.stats.duality_gap},
                         {"tol", s.solver_tol},
                         {"eps", s.solver_eps},
                         {"max_iter", s.solver_max_iter}};
    ordered_json meta;
    meta["version"] = "satpriv 0.1.0";
    if (std::holds_alternative<EnkfKind>(s.filter)) {
        const auto& k = std::get<EnkfKind>(s.filter);
        meta["filter"] = {{"kind", "enkf"}, {"n", k.n}, {"seed", k.seed}};
    } else {
        const auto& k = std::get<UkfKind>(s.filter);
        meta["filter"] = {{"kind", "ukf"},
                          {"alpha", k.cfg.alpha},
                          {"beta", k.cfg.beta},
                          {"kappa", k.cfg.kappa}};
    }
    meta["sensor_noise_km2"] = s.sensor_noise_km2;
    meta["defaults_applied"] = s.defaults_applied;
    meta["excluded_axes"] = result.excluded_axes;
    summary["metadata"] = meta;

    rep.summary_path = out_dir + "/summary.json";
    std::ofstream sj(rep.summary_path, std::ios::binary);
    sj << summary.dump(2) << "\n";

    rep.exit_code = result.status == SolveStatus::optimal      ? 0
                    : result.status == SolveStatus::infeasible ? 2
                                                               : 1;
    return rep;
}

}  // namespace satpriv
