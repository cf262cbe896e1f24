#ifndef SATPRIV_SCENARIO_HPP
#define SATPRIV_SCENARIO_HPP

#include <optional>
#include <string>
#include <vector>

#include "satpriv/synthesis.hpp"

namespace satpriv {

enum class RunMode { utility, privacy, utility_aware, privacy_aware, precision };

const char* to_string(RunMode m);

struct ConstraintSpec {
    double time_s = 0.0;
    std::vector<int> components;       // state indices
    std::optional<double> gamma_km2;   // absolute bound
    std::optional<double> fraction_of_prior;  // privacy only
};

struct Scenario {
    std::string name;
    std::string tle;                       // empty when explicit elements given
    std::optional<OrbitalElements> elements;
    std::string uncertainty_parameter = "semi_major_axis";
    double sigma_fraction = 0.0;
    FilterKind filter = UkfKind{};
    double horizon_s = 0.0;
    double dt_s = 1.0;
    double save_every_s = 100.0;
    std::vector<double> measurement_times_s;
    std::vector<int> measured_components = {0, 1, 2};
    double sensor_noise_km2 = 0.01;
    std::vector<ConstraintSpec> utility;
    std::vector<ConstraintSpec> privacy;
    RunMode mode = RunMode::precision;
    double solver_tol = 1e-8;
    double solver_eps = 1e-3;
    int solver_max_iter = 50;
    std::vector<std::string> defaults_applied;
};

struct SiteReport {
    int site = 0;            // 1-based measurement-time index
    double time_s = 0.0;
    std::vector<double> precisions;       // per axis
    std::vector<double> noise_variances;  // per axis (km^2)
};

struct RunReport {
    Scenario scenario;
    SynthesisResult result;
    std::vector<SiteReport> sites;
    std::vector<double> resolved_utility_gammas;
    std::vector<double> resolved_privacy_gammas;
    std::vector<double> trace_times_s;
    std::vector<double> posterior_sqrt_trace_km;
    std::vector<double> prior_sqrt_trace_km;
    std::optional<double> improvement_factor;   // utility_aware vs precision baseline
    std::optional<double> baseline_privacy_sqrt_trace;
    std::string summary_path;
    int exit_code = 1;  // 0 optimal, 2 infeasible, 1 otherwise
};

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text);

struct RunOptions {
    std::optional<RunMode> mode_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> filter_override;  // "enkf" | "ukf"
    std::optional<double> tol_override;
    bool dump_problem = false;
};

RunReport run(const Scenario& s, const std::string& out_dir, const RunOptions& opts = {});

}  // namespace satpriv

#endif  // SATPRIV_SCENARIO_HPP
