#ifndef SATPRIV_KALMAN_HPP
#define SATPRIV_KALMAN_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <random>

#include <Eigen/Core>

namespace satpriv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using StateMap = std::function<Vec(const Vec&)>;

enum class EnsembleKind { random, sigma };

/**
 * @brief A weighted sample set: EnKF random draws or UKF sigma points.
 *
 * Columns of `samples` are members. For random kind the mean weights are
 * 1/N and the covariance weights 1/(N-1); for sigma kind they carry the
 * unscented weights (the zeroth covariance weight may be negative).
 */
struct Ensemble {
    Mat samples;  // state_dim x n_samples
    EnsembleKind kind = EnsembleKind::random;
    Vec mean_weights;
    Vec cov_weights;
    std::optional<std::uint64_t> seed;

    Eigen::Index state_dim() const { return samples.rows(); }
    Eigen::Index size() const { return samples.cols(); }
};

struct GaussianBelief {
    Vec mean;
    Mat covariance;
};

/**
 * @brief Prior second moments of the joint (state, predicted measurement)
 * plus the hardware sensor noise.
 */
struct PriorMoments {
    Mat sigma_xx;  // state x state
    Mat sigma_xy;  // state x meas
    Mat sigma_yy;  // meas x meas
    Mat r_sensor;  // meas x meas

    Eigen::Index state_dim() const { return sigma_xx.rows(); }
    Eigen::Index meas_dim() const { return sigma_yy.rows(); }
};

/** Unscented transform tuning; defaults match the tracking setup. */
struct SigmaConfig {
    double alpha = 0.001;
    double beta = 2.0;
    double kappa = 0.0;
};

/** Deterministic standard-normal stream (mt19937_64 + Box-Muller). */
class GaussianSampler {
  public:
    explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}
    double next();
    Vec vector(Eigen::Index n);

  private:
    std::mt19937_64 rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/** Symmetrize and clip negative eigenvalues to zero. */
Mat clip_psd(const Mat& m);

/** Symmetric PSD square root; eigenvalues below 1e-12*lambda_max clip to 0. */
Mat symmetric_sqrt(const Mat& m);

Ensemble sample_ensemble(const GaussianBelief& belief, int n, std::uint64_t seed);

GaussianBelief ensemble_moments(const Ensemble& e);

Ensemble sigma_points(const GaussianBelief& belief, const SigmaConfig& cfg = {});

Ensemble propagate_ensemble(const Ensemble& e, const StateMap& dynamics);

/** Empirical cross/measurement covariances under the kind's weighting. */
PriorMoments cross_covariances(const Ensemble& e, const StateMap& h);

/**
 * @brief Perturbed-observation EnKF member update.
 *
 * r_total is the full measurement noise used both in the gain and for the
 * member perturbations (drawn deterministically from `seed`).
 */
Ensemble enkf_update(const Ensemble& e, const Vec& y, const StateMap& h,
                     const PriorMoments& pm, const Mat& r_total, std::uint64_t seed);

/**
 * @brief Posterior covariance
 *   sigma_xx - sigma_xy (sigma_yy + r_sensor + r_data)^-1 sigma_xy^T,
 * symmetrized; the inner matrix is trace-regularized when ill-conditioned.
 */
Mat posterior_covariance(const PriorMoments& pm, const Mat& r_data);

}  // namespace satpriv

#endif  // SATPRIV_KALMAN_HPP
