#include "satpriv/kalman.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace satpriv {

double GaussianSampler::next() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller on explicitly constructed uniforms; std::normal_distribution
    // is implementation-defined and would break cross-toolchain determinism.
    double u1, u2;
    do {
        u1 = (rng_() >> 11) * 0x1.0p-53;
    } while (u1 <= 0.0);
    u2 = (rng_() >> 11) * 0x1.0p-53;
    double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
}

Vec GaussianSampler::vector(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = next();
    return v;
}

Mat clip_psd(const Mat& m) {
    Mat sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    Vec lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) lam(i) = std::max(lam(i), 0.0);
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

Mat symmetric_sqrt(const Mat& m) {
    Mat sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    Vec lam = es.eigenvalues();
    double lmax = lam.size() ? lam.maxCoeff() : 0.0;
    double floor = 1e-12 * std::max(lmax, 0.0);
    for (Eigen::Index i = 0; i < lam.size(); ++i)
        lam(i) = lam(i) > floor ? std::sqrt(lam(i)) : 0.0;
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

Ensemble sample_ensemble(const GaussianBelief& belief, int n, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("sample_ensemble: need n >= 2 samples");
    const Eigen::Index d = belief.mean.size();
    Mat root = symmetric_sqrt(belief.covariance);

    GaussianSampler gs(seed);
    Ensemble e;
    e.kind = EnsembleKind::random;
    e.seed = seed;
    e.samples.resize(d, n);
    for (int j = 0; j < n; ++j) e.samples.col(j) = belief.mean + root * gs.vector(d);
    e.mean_weights = Vec::Constant(n, 1.0 / n);
    e.cov_weights = Vec::Constant(n, 1.0 / (n - 1.0));
    return e;
}

GaussianBelief ensemble_moments(const Ensemble& e) {
    if (e.size() == 0) throw std::invalid_argument("ensemble_moments: empty ensemble");
    GaussianBelief b;
    b.mean = e.samples * e.mean_weights;
    Mat centered = e.samples.colwise() - b.mean;
    b.covariance = clip_psd(centered * e.cov_weights.asDiagonal() * centered.transpose());
    return b;
}

Ensemble sigma_points(const GaussianBelief& belief, const SigmaConfig& cfg) {
    const Eigen::Index n = belief.mean.size();
    if (n < 1) throw std::invalid_argument("sigma_points: dimension must be >= 1");
    if (cfg.alpha <= 0.0) throw std::invalid_argument("sigma_points: alpha must be > 0");
    const double rho = cfg.alpha * cfg.alpha * (n + cfg.kappa) - n;
    const double scale = n + rho;
    if (scale <= 0.0)
        throw std::invalid_argument("sigma_points: (n + rho) <= 0, invalid scaling");

    Mat root = symmetric_sqrt(scale * belief.covariance);

    Ensemble e;
    e.kind = EnsembleKind::sigma;
    e.samples.resize(n, 2 * n + 1);
    e.samples.col(0) = belief.mean;
    for (Eigen::Index i = 0; i < n; ++i) {
        e.samples.col(1 + i) = belief.mean + root.col(i);
        e.samples.col(1 + n + i) = belief.mean - root.col(i);
    }
    e.mean_weights = Vec::Constant(2 * n + 1, 1.0 / (2.0 * scale));
    e.cov_weights = e.mean_weights;
    e.mean_weights(0) = rho / scale;
    e.cov_weights(0) = rho / scale + (1.0 - cfg.alpha * cfg.alpha + cfg.beta);
    return e;
}

Ensemble propagate_ensemble(const Ensemble& e, const StateMap& dynamics) {
    Ensemble out = e;
    for (Eigen::Index j = 0; j < e.size(); ++j) {
        try {
            Vec mapped = dynamics(e.samples.col(j));
            if (j == 0) out.samples.resize(mapped.size(), e.size());
            out.samples.col(j) = mapped;
        } catch (const std::exception& ex) {
            throw std::runtime_error("propagate_ensemble: member " + std::to_string(j) +
                                     " failed: " + ex.what());
        }
    }
    return out;
}

PriorMoments cross_covariances(const Ensemble& e, const StateMap& h) {
    if (e.size() == 0) throw std::invalid_argument("cross_covariances: empty ensemble");
    Mat ys;
    for (Eigen::Index j = 0; j < e.size(); ++j) {
        Vec yj = h(e.samples.col(j));
        if (j == 0) ys.resize(yj.size(), e.size());
        else if (yj.size() != ys.rows())
            throw std::invalid_argument("cross_covariances: member " + std::to_string(j) +
                                        " has measurement dimension " + std::to_string(yj.size()) +
                                        ", expected " + std::to_string(ys.rows()));
        ys.col(j) = yj;
    }
    Vec xbar = e.samples * e.mean_weights;
    Vec ybar = ys * e.mean_weights;
    Mat xc = e.samples.colwise() - xbar;
    Mat yc = ys.colwise() - ybar;

    PriorMoments pm;
    pm.sigma_xx = clip_psd(xc * e.cov_weights.asDiagonal() * xc.transpose());
    pm.sigma_xy = xc * e.cov_weights.asDiagonal() * yc.transpose();
    pm.sigma_yy = clip_psd(yc * e.cov_weights.asDiagonal() * yc.transpose());
    pm.r_sensor = Mat::Zero(ys.rows(), ys.rows());
    return pm;
}

namespace {

// Inverse of a symmetric matrix with the documented trace-scaled jitter when
// the condition number exceeds 1e12.
Mat regularized_inverse(const Mat& m) {
    Mat sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    double lmax = es.eigenvalues().maxCoeff();
    double lmin = es.eigenvalues().minCoeff();
    if (!(lmax > 0.0))
        throw std::runtime_error("posterior_covariance: inner matrix not positive");
    if (lmin <= 0.0 || lmax / lmin > 1e12) {
        double jitter = 1e-12 * (sym.trace() / sym.rows());
        sym += jitter * Mat::Identity(sym.rows(), sym.cols());
        es.compute(sym);
        lmin = es.eigenvalues().minCoeff();
        if (lmin <= 0.0)
            throw std::runtime_error(
                "posterior_covariance: inner matrix singular after regularization");
    }
    Vec inv_lam = es.eigenvalues().cwiseInverse();
    return es.eigenvectors() * inv_lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Ensemble enkf_update(const Ensemble& e, const Vec& y, const StateMap& h,
                     const PriorMoments& pm, const Mat& r_total, std::uint64_t seed) {
    if (e.kind != EnsembleKind::random)
        throw std::invalid_argument("enkf_update: requires a random-kind ensemble");
    Mat inner_inv = regularized_inverse(pm.sigma_yy + r_total);
    Mat gain = pm.sigma_xy * inner_inv;
    Mat noise_root = symmetric_sqrt(r_total);

    GaussianSampler gs(seed);
    Ensemble out = e;
    out.seed = seed;
    for (Eigen::Index j = 0; j < e.size(); ++j) {
        Vec eps = noise_root * gs.vector(y.size());
        out.samples.col(j) = e.samples.col(j) + gain * (y - h(e.samples.col(j)) + eps);
    }
    return out;
}

Mat posterior_covariance(const PriorMoments& pm, const Mat& r_data) {
    Mat inner = pm.sigma_yy + pm.r_sensor + r_data;
    Mat inner_inv = regularized_inverse(inner);
    Mat post = pm.sigma_xx - pm.sigma_xy * inner_inv * pm.sigma_xy.transpose();
    return 0.5 * (post + post.transpose());
}

}  // namespace satpriv
