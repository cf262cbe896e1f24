#ifndef SATPRIV_WINDOW_HPP
#define SATPRIV_WINDOW_HPP

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "satpriv/kalman.hpp"
#include "satpriv/orbital.hpp"

namespace satpriv {

/**
 * @brief Batch window layout: integration step, diagnostic save cadence,
 * measurement times/components, and extra times that must be saved (the
 * trade-off constraint times).
 *
 * All times must be nonnegative integer multiples of dt within the horizon;
 * the saved grid is the union of the uniform grid, meas_times and
 * extra_save_times.
 */
struct WindowConfig {
    double horizon = 0.0;     // [s]
    double dt = 1.0;          // [s]
    int save_every = 1;       // integrator steps between uniform saves
    std::vector<double> meas_times;                  // sorted [s]
    std::vector<std::vector<int>> meas_components;   // per meas time, state indices
    std::vector<double> extra_save_times;
};

/** 0/1 selection of (time, component) rows from the augmented state. */
struct SelectionMask {
    std::vector<std::pair<int, int>> rows;  // (time index, component index)
    Mat matrix;                             // rows x aug_dim
};

struct AugmentedWindow {
    std::vector<double> saved_times;
    int state_dim = 0;
    int aug_dim = 0;
    Mat meas_matrix;    // C: meas_dim x aug_dim
    PriorMoments prior; // sigma_xx over the augmented state, linear model blocks
    Vec mean;           // augmented prior mean
};

struct EnkfKind {
    int n = 100;
    std::uint64_t seed = 0;
};
struct UkfKind {
    SigmaConfig cfg;
};
using FilterKind = std::variant<EnkfKind, UkfKind>;

/** Maps a 6-dim state across one dt step at absolute time t. */
using StepFn = std::function<Vec(const Vec&, double t, double dt)>;

/**
 * @brief Keplerian initial uncertainty: independent Gaussians per element
 * (sigma as fraction of the mean element where fraction > 0).
 */
struct KeplerianUncertainty {
    OrbitalElements mean;
    double sigma_fraction_a = 0.0;
    double sigma_fraction_e = 0.0;
    double sigma_fraction_i = 0.0;
};

/**
 * @brief Build the augmented batch prior: generate members from the initial
 * belief, push every member through the horizon saving the configured grid,
 * and form the stacked moments with the linear measurement map y = Cx.
 *
 * No measurement updates happen inside the window; it is a pure prior.
 */
AugmentedWindow build_window(const GaussianBelief& init, const WindowConfig& cfg,
                             const FilterKind& filter, const StepFn& step);

AugmentedWindow build_window(const GaussianBelief& init, const WindowConfig& cfg,
                             const FilterKind& filter, const GravityModel& g);

/** Members are sampled in Keplerian space and converted per member. */
AugmentedWindow build_window(const KeplerianUncertainty& init, const WindowConfig& cfg,
                             const FilterKind& filter, const GravityModel& g);

SelectionMask make_mask(const AugmentedWindow& window, double time,
                        const std::vector<int>& components);

/** Block-diagonal sensor noise in measurement ordering; one variance each. */
Mat sensor_noise_block(const WindowConfig& cfg, const std::vector<double>& per_sensor_variances);

/**
 * @brief Restrict a window to the rows at `keep_times` (synthesis prior);
 * measurement times must all be kept.
 */
AugmentedWindow restrict_window(const AugmentedWindow& window,
                                const std::vector<double>& keep_times);

}  // namespace satpriv

#endif  // SATPRIV_WINDOW_HPP
