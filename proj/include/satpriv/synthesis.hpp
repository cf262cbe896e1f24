#ifndef SATPRIV_SYNTHESIS_HPP
#define SATPRIV_SYNTHESIS_HPP

#include <optional>
#include <ostream>
#include <vector>

#include "satpriv/kalman.hpp"
#include "satpriv/lmi.hpp"
#include "satpriv/window.hpp"

namespace satpriv {

/** One masked trace bound; gamma is absolute (km^2). */
struct TradeoffEntry {
    SelectionMask mask;
    double gamma = 0.0;
};

struct TradeoffSpec {
    std::vector<TradeoffEntry> utility;  // trace(M S+ M^T) <= gamma
    std::vector<TradeoffEntry> privacy;  // trace(M S+ M^T) >= gamma
};

enum class NoiseStructure { diagonal, symmetric };

struct SynthesisOptions {
    NoiseStructure structure = NoiseStructure::diagonal;
    double tol = 1e-8;   // SDP duality-gap tolerance
    double eps = 1e-3;   // iterative-mode convergence threshold on gamma
    int max_iter = 50;   // iterative-mode outer iterations
    int solver_max_iterations = 200;
    bool solver_verbose = false;
    std::ostream* dump = nullptr;  // optional problem dump sink
};

struct IterationRecord {
    int iter = 0;
    double gamma = 0.0;
    double delta = 0.0;
};

struct SynthesisResult {
    SolveStatus status = SolveStatus::numerical_failure;
    std::optional<Mat> r_data;     // synthetic noise covariance (km^2)
    std::optional<Mat> s_data;     // its precision
    std::optional<Vec> precisions; // per measurement axis (may hold inf)
    std::optional<Mat> gain;       // K, zero rows outside the utility masks
    std::vector<double> achieved_utility;  // oracle-recomputed traces
    std::vector<double> achieved_privacy;
    std::vector<int> excluded_axes;        // "sensor unnecessary" axes
    std::vector<IterationRecord> iterations;
    SolverStats stats;
    std::string message;

    bool ok() const { return status == SolveStatus::optimal; }
};

/**
 * @brief The independent verification oracle: posterior via
 * posterior_covariance, then trace(M S+ M^T) per mask.
 */
std::vector<double> verify_traces(const PriorMoments& pm, const Mat& r_data,
                                  const std::vector<SelectionMask>& masks);

/** Drop measurement axes where active[i] is false. */
PriorMoments reduce_measurements(const PriorMoments& pm, const std::vector<bool>& active);

/**
 * @brief Oracle traces with per-axis data precisions; axes with precision
 * below `exclude_below` are dropped (infinite noise). `include_sensor`
 * keeps pm.r_sensor on the surviving axes.
 */
std::vector<double> traces_with_precisions(const PriorMoments& pm, const Vec& s_diag,
                                           const std::vector<SelectionMask>& masks,
                                           bool include_sensor, double exclude_below = 1e-9);

/**
 * @brief Maximum synthetic noise meeting every utility bound
 * (precision-variable LMI built on the inverse of Z = sigma_yy + r_sensor).
 * If Z is severely ill-conditioned and C is supplied, delegates to the
 * square-root formulation.
 */
SynthesisResult max_noise_for_utility(const PriorMoments& pm, const TradeoffSpec& spec,
                                      const SynthesisOptions& opts = {}, const Mat* C = nullptr);

/** Square-root/gain formulation of the same problem (linear model). */
SynthesisResult max_noise_for_utility_sqrt(const PriorMoments& pm, const Mat& C,
                                           const TradeoffSpec& spec,
                                           const SynthesisOptions& opts = {});

/**
 * @brief Minimum total per-axis sensing precision (l1) meeting the utility
 * bounds; pm.r_sensor is not used (the precision is the whole noise model).
 */
SynthesisResult min_precision_for_utility(const PriorMoments& pm, const Mat& C,
                                          const TradeoffSpec& spec,
                                          const SynthesisOptions& opts = {});

/** Minimum synthetic noise meeting every privacy lower bound. */
SynthesisResult min_noise_for_privacy(const PriorMoments& pm, const TradeoffSpec& spec,
                                      const SynthesisOptions& opts = {});

/**
 * @brief Iterative linearized scheme: maximize privacy subject to hard
 * utility bounds. Privacy entries' gamma values are ignored (the bound is
 * the objective).
 */
SynthesisResult utility_aware_privacy(const PriorMoments& pm, const Mat& C,
                                      const TradeoffSpec& spec,
                                      const SynthesisOptions& opts = {});

/** Mirror image: minimize the utility bound subject to hard privacy bounds. */
SynthesisResult privacy_aware_utility(const PriorMoments& pm, const Mat& C,
                                      const TradeoffSpec& spec,
                                      const SynthesisOptions& opts = {});

}  // namespace satpriv

#endif  // SATPRIV_SYNTHESIS_HPP
