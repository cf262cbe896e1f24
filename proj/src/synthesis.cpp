#include "satpriv/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace satpriv {

namespace {

constexpr double kExcludeBelow = 1e-9;
constexpr double kCertSlack = 1e-6;

double mask_prior_trace(const PriorMoments& pm, const SelectionMask& m) {
    return (m.matrix * pm.sigma_xx * m.matrix.transpose()).trace();
}

std::vector<SelectionMask> all_masks(const TradeoffSpec& spec) {
    std::vector<SelectionMask> ms;
    for (const auto& e : spec.utility) ms.push_back(e.mask);
    for (const auto& e : spec.privacy) ms.push_back(e.mask);
    return ms;
}

// Augmented-state row selected by each mask row (masks have one 1 per row).
int mask_row_state(const SelectionMask& m, int row) {
    for (int c = 0; c < m.matrix.cols(); ++c)
        if (m.matrix(row, c) != 0.0) return c;
    throw std::invalid_argument("mask row selects nothing");
}

// Gain support: the union of augmented rows selected by utility masks, plus
// per-mask selectors into that reduced row set.
struct KSupport {
    std::vector<int> rows;        // augmented indices
    std::vector<Mat> selectors;   // per utility entry: u_i x |rows|
};

KSupport k_support(const std::vector<TradeoffEntry>& utility) {
    KSupport ks;
    for (const auto& e : utility) {
        for (int r = 0; r < e.mask.matrix.rows(); ++r) {
            int s = mask_row_state(e.mask, r);
            if (std::find(ks.rows.begin(), ks.rows.end(), s) == ks.rows.end())
                ks.rows.push_back(s);
        }
    }
    for (const auto& e : utility) {
        Mat sel = Mat::Zero(e.mask.matrix.rows(), ks.rows.size());
        for (int r = 0; r < e.mask.matrix.rows(); ++r) {
            int s = mask_row_state(e.mask, r);
            auto it = std::find(ks.rows.begin(), ks.rows.end(), s);
            sel(r, static_cast<int>(it - ks.rows.begin())) = 1.0;
        }
        ks.selectors.push_back(std::move(sel));
    }
    return ks;
}

void add_trace_upper(LmiProblem& p, int q_var, int dim, double gamma, const std::string& label) {
    int blk = p.add_psd_block(1, label);
    p.add_block_constant(blk, 0, 0, gamma);
    for (int i = 0; i < dim; ++i) p.add_block_term(blk, 0, 0, q_var, i, i, -1.0);
}

// trace(Q) >= gamma, where gamma is a constant or (gamma_var >= 0) a scalar
// decision variable.
void add_trace_lower(LmiProblem& p, int q_var, int dim, double gamma, int gamma_var,
                     const std::string& label) {
    int blk = p.add_psd_block(1, label);
    for (int i = 0; i < dim; ++i) p.add_block_term(blk, 0, 0, q_var, i, i, 1.0);
    if (gamma_var >= 0)
        p.add_block_term(blk, 0, 0, gamma_var, 0, 0, -1.0);
    else
        p.add_block_constant(blk, 0, 0, -gamma);
}

struct UtilityLmiTail {
    const Mat* rs_inv = nullptr;  // sensor-precision block
    int s_var = -1;               // data-precision block variable
    Mat s_const;                  // constant part of the data-precision block
    int lambda_var = -1;          // total-precision (diagonal) block variable
};

// The gain-form utility certificate block
//   [ Q, M(I-KC)G, MK(, MK) ; ... ] >= 0
// with tail diag(sensor precision / data precision / lambda) per `tail`.
void add_utility_lmi(LmiProblem& p, const SelectionMask& mask, const Mat& E, int k_var, int q_var,
                     const Mat& G, const Mat& CG, const UtilityLmiTail& tail,
                     const std::string& label) {
    const int u = static_cast<int>(mask.matrix.rows());
    const int n = static_cast<int>(G.rows());
    const int m = static_cast<int>(CG.rows());
    int dim = u + n + (tail.rs_inv ? m : 0) + (tail.s_var >= 0 ? m : 0) +
              (tail.lambda_var >= 0 ? m : 0);
    int blk = p.add_psd_block(dim, label);
    Mat Iu = Mat::Identity(u, u);
    Mat Im = Mat::Identity(m, m);

    p.add_block_matrix_term(blk, 0, 0, Iu, q_var, Iu, 1.0);

    Mat MG = mask.matrix * G;
    p.add_block_constant_matrix(blk, 0, u, MG);
    p.add_block_constant_matrix(blk, u, 0, MG.transpose());
    if (k_var >= 0) {
        p.add_block_matrix_term(blk, 0, u, E, k_var, CG, -1.0);
        p.add_block_matrix_term(blk, u, 0, CG.transpose(), k_var, E.transpose(), -1.0, true);
    }
    p.add_block_constant_matrix(blk, u, u, Mat::Identity(n, n));

    int off = u + n;
    auto add_gain_column = [&](int o) {
        if (k_var < 0) return;
        p.add_block_matrix_term(blk, 0, o, E, k_var, Im, 1.0);
        p.add_block_matrix_term(blk, o, 0, Im, k_var, E.transpose(), 1.0, true);
    };
    if (tail.rs_inv) {
        p.add_block_constant_matrix(blk, off, off, *tail.rs_inv);
        add_gain_column(off);
        off += m;
    }
    if (tail.s_var >= 0) {
        if (tail.s_const.size()) p.add_block_constant_matrix(blk, off, off, tail.s_const);
        p.add_block_matrix_term(blk, off, off, Im, tail.s_var, Im, 1.0);
        add_gain_column(off);
        off += m;
    }
    if (tail.lambda_var >= 0) {
        p.add_block_matrix_term(blk, off, off, Im, tail.lambda_var, Im, 1.0);
        add_gain_column(off);
    }
}

// Privacy certificate block
//   [ M Sxx M^T - Q_p, M Sxy ; Sxy^T M^T, Syy + Rs + Rdata ] >= 0
// where Rdata = r_const (+ r_var if given).
void add_privacy_lmi(LmiProblem& p, const PriorMoments& pm, const SelectionMask& mask, int q_var,
                     const Mat& r_const, int r_var, const std::string& label) {
    const int u = static_cast<int>(mask.matrix.rows());
    const int m = static_cast<int>(pm.meas_dim());
    int blk = p.add_psd_block(u + m, label);
    Mat Iu = Mat::Identity(u, u);
    Mat Im = Mat::Identity(m, m);

    Mat msm = mask.matrix * pm.sigma_xx * mask.matrix.transpose();
    p.add_block_constant_matrix(blk, 0, 0, 0.5 * (msm + msm.transpose()));
    p.add_block_matrix_term(blk, 0, 0, Iu, q_var, Iu, -1.0);

    Mat msxy = mask.matrix * pm.sigma_xy;
    p.add_block_constant_matrix(blk, 0, u, msxy);
    p.add_block_constant_matrix(blk, u, 0, msxy.transpose());

    Mat inner = pm.sigma_yy + pm.r_sensor + r_const;
    p.add_block_constant_matrix(blk, u, u, 0.5 * (inner + inner.transpose()));
    if (r_var >= 0) p.add_block_matrix_term(blk, u, u, Im, r_var, Im, 1.0);
}

std::vector<LmiProblem::LinTerm> diag_terms(const LmiProblem& p, int var, int dim, double coeff) {
    std::vector<LmiProblem::LinTerm> ts;
    for (int i = 0; i < dim; ++i) ts.push_back({p.entry_index(var, i, i), coeff});
    return ts;
}

Mat spd_inverse(const Mat& m, const char* what) {
    Eigen::LLT<Mat> llt(0.5 * (m + m.transpose()));
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(std::string(what) + ": matrix is not positive definite");
    return llt.solve(Mat::Identity(m.rows(), m.cols()));
}

// Z with the documented conditioning guard (trace-scaled jitter over 1e12).
Mat conditioned(const Mat& z, double* cond_out = nullptr) {
    Mat sym = 0.5 * (z + z.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    double lmax = es.eigenvalues().maxCoeff();
    double lmin = es.eigenvalues().minCoeff();
    double cond = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
    if (cond_out) *cond_out = cond;
    if (lmin <= 0.0 || cond > 1e12)
        sym += (1e-12 * sym.trace() / sym.rows()) * Mat::Identity(sym.rows(), sym.cols());
    return sym;
}

void maybe_dump(const SynthesisOptions& opts, const LmiProblem& p, const char* name) {
    if (!opts.dump) return;
    *opts.dump << "## problem: " << name << "\n";
    dump_problem(p, *opts.dump);
}

// Interior-point solutions sit on the constraint boundary to solver accuracy,
// which on km^2-scale data can miss the absolute 1e-6 certification slack.
// Nudges the iterate along the feasible direction (geometrically growing
// steps) until the oracle predicate holds.
template <class Apply, class Ok>
bool restore_feasibility(Apply&& apply, Ok&& ok) {
    if (ok()) return true;
    double step = 1e-7;
    for (int k = 0; k < 60; ++k) {
        apply(1.0 + step);
        if (ok()) return true;
        step = std::min(step * 2.0, 0.05);
    }
    return false;
}

// A solution whose z-iterate is feasible and nearly optimal is still worth
// extracting; the oracle certification below decides whether it stands.
bool usable_solution(const LmiSolution& sol) {
    if (sol.status == SolveStatus::optimal) return true;
    return sol.status == SolveStatus::max_iter && sol.stats.primal_residual <= 1e-7 &&
           sol.stats.duality_gap <= 3e-4;
}

SolveOptions solver_options(const SynthesisOptions& opts) {
    SolveOptions so;
    so.tol = opts.tol;
    so.max_iterations = opts.solver_max_iterations;
    so.verbose = opts.solver_verbose;
    return so;
}

Mat full_gain(const LmiSolution& sol, const KSupport& ks, int n, int m) {
    Mat K = Mat::Zero(n, m);
    auto it = sol.values.find("K");
    if (it != sol.values.end())
        for (size_t r = 0; r < ks.rows.size(); ++r) K.row(ks.rows[r]) = it->second.row(r);
    return K;
}

// Certify utility bounds against the oracle; downgrade on violation.
void certify_upper(SynthesisResult& res, const std::vector<double>& traces,
                   const std::vector<TradeoffEntry>& entries, const char* side) {
    for (size_t i = 0; i < entries.size(); ++i) {
        if (traces[i] > entries[i].gamma + kCertSlack) {
            res.status = SolveStatus::numerical_failure;
            std::ostringstream os;
            os << "; oracle re-check failed: " << side << " trace " << traces[i]
               << " exceeds bound " << entries[i].gamma;
            res.message += os.str();
        }
    }
}

void certify_lower(SynthesisResult& res, const std::vector<double>& traces,
                   const std::vector<TradeoffEntry>& entries, const char* side) {
    for (size_t i = 0; i < entries.size(); ++i) {
        if (traces[i] < entries[i].gamma - kCertSlack) {
            res.status = SolveStatus::numerical_failure;
            std::ostringstream os;
            os << "; oracle re-check failed: " << side << " trace " << traces[i]
               << " below bound " << entries[i].gamma;
            res.message += os.str();
        }
    }
}

// Inflate the active per-axis precisions until every utility bound certifies
// against the oracle (monotone: more precision, smaller posterior trace).
bool restore_upper_diag(const PriorMoments& pm, const TradeoffSpec& spec, Vec& sd,
                        bool include_sensor) {
    auto ok = [&] {
        auto tr = traces_with_precisions(pm, sd, all_masks(spec), include_sensor);
        for (size_t i = 0; i < spec.utility.size(); ++i)
            if (tr[i] > spec.utility[i].gamma + 0.5 * kCertSlack) return false;
        return true;
    };
    return restore_feasibility(
        [&](double f) {
            for (Eigen::Index i = 0; i < sd.size(); ++i)
                if (sd(i) >= kExcludeBelow) sd(i) *= f;
        },
        ok);
}

}  // namespace

std::vector<double> verify_traces(const PriorMoments& pm, const Mat& r_data,
                                  const std::vector<SelectionMask>& masks) {
    Mat post = posterior_covariance(pm, r_data);
    std::vector<double> out;
    out.reserve(masks.size());
    for (const auto& m : masks) out.push_back((m.matrix * post * m.matrix.transpose()).trace());
    return out;
}

PriorMoments reduce_measurements(const PriorMoments& pm, const std::vector<bool>& active) {
    std::vector<int> idx;
    for (size_t i = 0; i < active.size(); ++i)
        if (active[i]) idx.push_back(static_cast<int>(i));
    PriorMoments out;
    out.sigma_xx = pm.sigma_xx;
    out.sigma_xy.resize(pm.state_dim(), idx.size());
    out.sigma_yy.resize(idx.size(), idx.size());
    out.r_sensor.resize(idx.size(), idx.size());
    for (size_t a = 0; a < idx.size(); ++a) {
        out.sigma_xy.col(a) = pm.sigma_xy.col(idx[a]);
        for (size_t b = 0; b < idx.size(); ++b) {
            out.sigma_yy(a, b) = pm.sigma_yy(idx[a], idx[b]);
            out.r_sensor(a, b) = pm.r_sensor(idx[a], idx[b]);
        }
    }
    return out;
}

std::vector<double> traces_with_precisions(const PriorMoments& pm, const Vec& s_diag,
                                           const std::vector<SelectionMask>& masks,
                                           bool include_sensor, double exclude_below) {
    std::vector<bool> active(s_diag.size());
    int n_active = 0;
    for (Eigen::Index i = 0; i < s_diag.size(); ++i) {
        active[i] = s_diag(i) >= exclude_below;
        n_active += active[i];
    }
    if (n_active == 0) {
        std::vector<double> out;
        for (const auto& m : masks)
            out.push_back((m.matrix * pm.sigma_xx * m.matrix.transpose()).trace());
        return out;
    }
    PriorMoments red = reduce_measurements(pm, active);
    if (!include_sensor) red.r_sensor.setZero();
    Vec r(n_active);
    int k = 0;
    for (Eigen::Index i = 0; i < s_diag.size(); ++i)
        if (active[i]) r(k++) = 1.0 / s_diag(i);
    return verify_traces(red, Mat(r.asDiagonal()), masks);
}

SynthesisResult max_noise_for_utility(const PriorMoments& pm, const TradeoffSpec& spec,
                                      const SynthesisOptions& opts, const Mat* C) {
    if (spec.utility.empty())
        throw std::invalid_argument("max_noise_for_utility: need at least one utility entry");
    const int m = static_cast<int>(pm.meas_dim());

    double cond = 0.0;
    Mat Z = conditioned(pm.sigma_yy + pm.r_sensor, &cond);
    if (cond > 1e10 && C) return max_noise_for_utility_sqrt(pm, *C, spec, opts);

    SynthesisResult res;
    std::vector<double> floors = verify_traces(pm, Mat::Zero(m, m), all_masks(spec));
    for (size_t i = 0; i < spec.utility.size(); ++i) {
        if (spec.utility[i].gamma < floors[i] - 1e-9) {
            res.status = SolveStatus::infeasible;
            std::ostringstream os;
            os << "utility bound " << spec.utility[i].gamma << " is below the zero-noise floor "
               << floors[i] << " for mask " << i;
            res.message = os.str();
            return res;
        }
    }

    LmiProblem p;
    bool diag = opts.structure == NoiseStructure::diagonal;
    int sv = p.add_variable({"S", m, diag ? VarStructure::diagonal : VarStructure::symmetric});
    p.add_psd_variable_block(sv);
    Mat Zinv = spd_inverse(Z, "max_noise_for_utility");
    for (size_t i = 0; i < spec.utility.size(); ++i) {
        const auto& e = spec.utility[i];
        const int u = static_cast<int>(e.mask.matrix.rows());
        int qv = p.add_variable({"Q_u" + std::to_string(i), u, VarStructure::symmetric});
        p.add_psd_variable_block(qv);
        int blk = p.add_psd_block(u + m, "utility" + std::to_string(i));
        Mat Iu = Mat::Identity(u, u);
        Mat msxy = e.mask.matrix * pm.sigma_xy;
        Mat c11 = -e.mask.matrix * pm.sigma_xx * e.mask.matrix.transpose() +
                  msxy * Zinv * msxy.transpose();
        p.add_block_constant_matrix(blk, 0, 0, 0.5 * (c11 + c11.transpose()));
        p.add_block_matrix_term(blk, 0, 0, Iu, qv, Iu, 1.0);
        p.add_block_constant_matrix(blk, 0, u, msxy);
        p.add_block_constant_matrix(blk, u, 0, msxy.transpose());
        p.add_block_constant_matrix(blk, u, u, Z);
        p.add_block_matrix_term(blk, u, u, Z, sv, Z, 1.0);
        add_trace_upper(p, qv, u, e.gamma, "trace_u" + std::to_string(i));
    }
    p.set_objective(diag_terms(p, sv, m, 1.0), 0.0, false);
    maybe_dump(opts, p, "max_noise_for_utility");

    LmiSolution sol = solve(p, solver_options(opts));
    res.status = sol.status;
    res.stats = sol.stats;
    res.message += sol.message;
    if (!usable_solution(sol)) return res;

    Mat S = sol.values.at("S");
    if (diag) {
        Vec sd = S.diagonal();
        restore_upper_diag(pm, spec, sd, true);
        res.s_data = Mat(sd.asDiagonal());
        res.precisions = sd;
        bool all_active = true;
        for (int i = 0; i < m; ++i) {
            if (sd(i) < kExcludeBelow) {
                res.excluded_axes.push_back(i);
                all_active = false;
            }
        }
        if (all_active) res.r_data = Mat(sd.cwiseInverse().asDiagonal());
        else
            res.message += "; noise unbounded on " + std::to_string(res.excluded_axes.size()) +
                           " axes (reported as excluded sensors)";
        auto traces = traces_with_precisions(pm, sd, all_masks(spec), true);
        res.achieved_utility.assign(traces.begin(), traces.begin() + spec.utility.size());
        res.achieved_privacy.assign(traces.begin() + spec.utility.size(), traces.end());
    } else {
        auto traces_of = [&](const Mat& sm) {
            Eigen::SelfAdjointEigenSolver<Mat> es(sm);
            double jitter = es.eigenvalues().minCoeff() >= kExcludeBelow
                                ? 0.0
                                : std::max(1e-12 * es.eigenvalues().maxCoeff(), 1e-15);
            Mat r = spd_inverse(sm + jitter * Mat::Identity(m, m), "max_noise_for_utility");
            return std::make_pair(r, verify_traces(pm, r, all_masks(spec)));
        };
        restore_feasibility([&](double f) { S *= f; },
                            [&] {
                                auto [r, tr] = traces_of(S);
                                for (size_t i = 0; i < spec.utility.size(); ++i)
                                    if (tr[i] > spec.utility[i].gamma + 0.5 * kCertSlack)
                                        return false;
                                return true;
                            });
        res.s_data = S;
        auto [r, traces] = traces_of(S);
        res.r_data = r;
        res.achieved_utility.assign(traces.begin(), traces.begin() + spec.utility.size());
        res.achieved_privacy.assign(traces.begin() + spec.utility.size(), traces.end());
    }
    certify_upper(res, res.achieved_utility, spec.utility, "utility");
    return res;
}

SynthesisResult max_noise_for_utility_sqrt(const PriorMoments& pm, const Mat& C,
                                           const TradeoffSpec& spec,
                                           const SynthesisOptions& opts) {
    if (spec.utility.empty())
        throw std::invalid_argument("max_noise_for_utility_sqrt: need a utility entry");
    const int n = static_cast<int>(pm.state_dim());
    const int m = static_cast<int>(pm.meas_dim());

    SynthesisResult res;
    std::vector<double> floors = verify_traces(pm, Mat::Zero(m, m), all_masks(spec));
    for (size_t i = 0; i < spec.utility.size(); ++i) {
        if (spec.utility[i].gamma < floors[i] - 1e-9) {
            res.status = SolveStatus::infeasible;
            std::ostringstream os;
            os << "utility bound " << spec.utility[i].gamma << " is below the zero-noise floor "
               << floors[i] << " for mask " << i;
            res.message = os.str();
            return res;
        }
    }

    Mat G = symmetric_sqrt(pm.sigma_xx);
    Mat CG = C * G;
    Mat rs_inv = spd_inverse(pm.r_sensor, "max_noise_for_utility_sqrt (sensor noise)");

    LmiProblem p;
    bool diag = opts.structure == NoiseStructure::diagonal;
    int sv = p.add_variable({"S", m, diag ? VarStructure::diagonal : VarStructure::symmetric});
    p.add_psd_variable_block(sv);
    KSupport ks = k_support(spec.utility);
    int kv = p.add_variable(
        {"K", static_cast<int>(ks.rows.size()), VarStructure::full, m});
    for (size_t i = 0; i < spec.utility.size(); ++i) {
        const auto& e = spec.utility[i];
        const int u = static_cast<int>(e.mask.matrix.rows());
        int qv = p.add_variable({"Q_u" + std::to_string(i), u, VarStructure::symmetric});
        p.add_psd_variable_block(qv);
        UtilityLmiTail tail;
        tail.rs_inv = &rs_inv;
        tail.s_var = sv;
        add_utility_lmi(p, e.mask, ks.selectors[i], kv, qv, G, CG, tail,
                        "utility" + std::to_string(i));
        add_trace_upper(p, qv, u, e.gamma, "trace_u" + std::to_string(i));
    }
    p.set_objective(diag_terms(p, sv, m, 1.0), 0.0, false);
    maybe_dump(opts, p, "max_noise_for_utility_sqrt");

    LmiSolution sol = solve(p, solver_options(opts));
    res.status = sol.status;
    res.stats = sol.stats;
    res.message += sol.message;
    if (!usable_solution(sol)) return res;

    Mat S = sol.values.at("S");
    res.gain = full_gain(sol, ks, n, m);
    if (diag) {
        Vec sd = S.diagonal();
        restore_upper_diag(pm, spec, sd, true);
        res.s_data = Mat(sd.asDiagonal());
        res.precisions = sd;
        for (int i = 0; i < m; ++i)
            if (sd(i) < kExcludeBelow) res.excluded_axes.push_back(i);
        if (res.excluded_axes.empty()) res.r_data = Mat(sd.cwiseInverse().asDiagonal());
        auto traces = traces_with_precisions(pm, sd, all_masks(spec), true);
        res.achieved_utility.assign(traces.begin(), traces.begin() + spec.utility.size());
        res.achieved_privacy.assign(traces.begin() + spec.utility.size(), traces.end());
    } else {
        auto r_of = [&](const Mat& sm) {
            Eigen::SelfAdjointEigenSolver<Mat> es(sm);
            double jitter = es.eigenvalues().minCoeff() >= kExcludeBelow
                                ? 0.0
                                : std::max(1e-12 * es.eigenvalues().maxCoeff(), 1e-15);
            return Mat(spd_inverse(sm + jitter * Mat::Identity(m, m),
                                   "max_noise_for_utility_sqrt"));
        };
        restore_feasibility([&](double f) { S *= f; },
                            [&] {
                                auto tr = verify_traces(pm, r_of(S), all_masks(spec));
                                for (size_t i = 0; i < spec.utility.size(); ++i)
                                    if (tr[i] > spec.utility[i].gamma + 0.5 * kCertSlack)
                                        return false;
                                return true;
                            });
        res.s_data = S;
        res.r_data = r_of(S);
        auto traces = verify_traces(pm, *res.r_data, all_masks(spec));
        res.achieved_utility.assign(traces.begin(), traces.begin() + spec.utility.size());
        res.achieved_privacy.assign(traces.begin() + spec.utility.size(), traces.end());
    }
    certify_upper(res, res.achieved_utility, spec.utility, "utility");
    return res;
}

SynthesisResult min_precision_for_utility(const PriorMoments& pm, const Mat& C,
                                          const TradeoffSpec& spec,
                                          const SynthesisOptions& opts) {
    if (spec.utility.empty())
        throw std::invalid_argument("min_precision_for_utility: need a utility entry");
    const int n = static_cast<int>(pm.state_dim());
    const int m = static_cast<int>(pm.meas_dim());

    SynthesisResult res;
    // Perfect-measurement floor: posterior with infinite precision.
    {
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (pm.sigma_yy + pm.sigma_yy.transpose()));
        Vec lam = es.eigenvalues();
        double lmax = lam.maxCoeff();
        Vec pinv = lam;
        for (Eigen::Index i = 0; i < lam.size(); ++i)
            pinv(i) = lam(i) > 1e-12 * std::max(lmax, 1.0) ? 1.0 / lam(i) : 0.0;
        Mat syy_pinv = es.eigenvectors() * pinv.asDiagonal() * es.eigenvectors().transpose();
        Mat post = pm.sigma_xx - pm.sigma_xy * syy_pinv * pm.sigma_xy.transpose();
        for (size_t i = 0; i < spec.utility.size(); ++i) {
            const auto& e = spec.utility[i];
            double floor = (e.mask.matrix * post * e.mask.matrix.transpose()).trace();
            if (e.gamma < floor - 1e-9) {
                res.status = SolveStatus::infeasible;
                std::ostringstream os;
                os << "utility bound " << e.gamma
                   << " is below the perfect-measurement floor " << floor << " for mask " << i;
                res.message = os.str();
                return res;
            }
        }
    }

    Mat G = symmetric_sqrt(pm.sigma_xx);
    Mat CG = C * G;

    LmiProblem p;
    int lv = p.add_variable({"lambda", m, VarStructure::diagonal});
    p.add_psd_variable_block(lv);
    KSupport ks = k_support(spec.utility);
    int kv = p.add_variable({"K", static_cast<int>(ks.rows.size()), VarStructure::full, m});
    for (size_t i = 0; i < spec.utility.size(); ++i) {
        const auto& e = spec.utility[i];
        const int u = static_cast<int>(e.mask.matrix.rows());
        int qv = p.add_variable({"Q_u" + std::to_string(i), u, VarStructure::symmetric});
        p.add_psd_variable_block(qv);
        UtilityLmiTail tail;
        tail.lambda_var = lv;
        add_utility_lmi(p, e.mask, ks.selectors[i], kv, qv, G, CG, tail,
                        "utility" + std::to_string(i));
        add_trace_upper(p, qv, u, e.gamma, "trace_u" + std::to_string(i));
    }
    p.set_objective(diag_terms(p, lv, m, 1.0), 0.0, false);
    maybe_dump(opts, p, "min_precision_for_utility");

    LmiSolution sol = solve(p, solver_options(opts));
    res.status = sol.status;
    res.stats = sol.stats;
    res.message += sol.message;
    if (!usable_solution(sol)) return res;

    Vec lambda = sol.values.at("lambda").diagonal();
    restore_upper_diag(pm, spec, lambda, false);
    res.precisions = lambda;
    res.s_data = Mat(lambda.asDiagonal());
    res.gain = full_gain(sol, ks, n, m);
    for (int i = 0; i < m; ++i)
        if (lambda(i) < kExcludeBelow) res.excluded_axes.push_back(i);
    if (res.excluded_axes.empty()) res.r_data = Mat(lambda.cwiseInverse().asDiagonal());

    auto traces = traces_with_precisions(pm, lambda, all_masks(spec), false);
    res.achieved_utility.assign(traces.begin(), traces.begin() + spec.utility.size());
    res.achieved_privacy.assign(traces.begin() + spec.utility.size(), traces.end());
    certify_upper(res, res.achieved_utility, spec.utility, "utility");
    return res;
}

SynthesisResult min_noise_for_privacy(const PriorMoments& pm, const TradeoffSpec& spec,
                                      const SynthesisOptions& opts) {
    if (spec.privacy.empty())
        throw std::invalid_argument("min_noise_for_privacy: need at least one privacy entry");
    const int m = static_cast<int>(pm.meas_dim());

    SynthesisResult res;
    for (size_t i = 0; i < spec.privacy.size(); ++i) {
        double ceiling = mask_prior_trace(pm, spec.privacy[i].mask);
        if (spec.privacy[i].gamma > ceiling + 1e-9) {
            res.status = SolveStatus::infeasible;
            std::ostringstream os;
            os << "privacy bound " << spec.privacy[i].gamma
               << " exceeds the prior-trace ceiling " << ceiling << " for mask " << i;
            res.message = os.str();
            return res;
        }
    }

    LmiProblem p;
    bool diag = opts.structure == NoiseStructure::diagonal;
    int rv = p.add_variable({"R", m, diag ? VarStructure::diagonal : VarStructure::symmetric});
    p.add_psd_variable_block(rv);
    for (size_t i = 0; i < spec.privacy.size(); ++i) {
        const auto& e = spec.privacy[i];
        const int u = static_cast<int>(e.mask.matrix.rows());
        int qv = p.add_variable({"Q_p" + std::to_string(i), u, VarStructure::symmetric});
        p.add_psd_variable_block(qv);
        add_privacy_lmi(p, pm, e.mask, qv, Mat::Zero(m, m), rv, "privacy" + std::to_string(i));
        add_trace_lower(p, qv, u, e.gamma, -1, "trace_p" + std::to_string(i));
    }
    p.set_objective(diag_terms(p, rv, m, 1.0), 0.0, false);
    maybe_dump(opts, p, "min_noise_for_privacy");

    LmiSolution sol = solve(p, solver_options(opts));
    res.status = sol.status;
    res.stats = sol.stats;
    res.message += sol.message;
    if (!usable_solution(sol)) return res;

    Mat R = clip_psd(sol.values.at("R"));
    restore_feasibility([&](double f) { R *= f; },
                        [&] {
                            auto tr = verify_traces(pm, R, all_masks(spec));
                            for (size_t i = 0; i < spec.privacy.size(); ++i)
                                if (tr[spec.utility.size() + i] <
                                    spec.privacy[i].gamma - 0.5 * kCertSlack)
                                    return false;
                            return true;
                        });
    res.r_data = R;
    if (diag) {
        Vec rd = R.diagonal();
        Vec prec(m);
        for (int i = 0; i < m; ++i)
            prec(i) = rd(i) > 0.0 ? 1.0 / rd(i) : std::numeric_limits<double>::infinity();
        res.precisions = prec;
        Eigen::SelfAdjointEigenSolver<Mat> es(R);
        if (es.eigenvalues().minCoeff() > 1e-12) res.s_data = spd_inverse(R, "min_noise");
    }
    auto traces = verify_traces(pm, R, all_masks(spec));
    res.achieved_utility.assign(traces.begin(), traces.begin() + spec.utility.size());
    res.achieved_privacy.assign(traces.begin() + spec.utility.size(), traces.end());
    certify_lower(res, res.achieved_privacy, spec.privacy, "privacy");
    return res;
}

namespace {

// Shared body for the two linearized iterative schemes.
SynthesisResult iterate_tradeoff(const PriorMoments& pm, const Mat& C, const TradeoffSpec& spec,
                                 const SynthesisOptions& opts, bool utility_aware) {
    const int m = static_cast<int>(pm.meas_dim());
    const bool diag = opts.structure == NoiseStructure::diagonal;

    SynthesisResult res;
    if (utility_aware && spec.privacy.empty())
        throw std::invalid_argument("utility_aware_privacy: need a privacy mask");
    if (!utility_aware && spec.privacy.empty())
        throw std::invalid_argument("privacy_aware_utility: need a privacy entry");

    // Hard-side feasibility pre-checks. The probe solution doubles as a
    // warm initialization when the linearized first subproblem is infeasible
    // (the coupling bounds each iterate to at most doubling S or R, so the
    // identity start cannot always reach the feasible region).
    std::optional<Mat> warm_s;
    if (utility_aware && !spec.utility.empty()) {
        auto probe = max_noise_for_utility(pm, TradeoffSpec{spec.utility, {}}, opts, &C);
        if (probe.status == SolveStatus::infeasible) {
            res.status = SolveStatus::infeasible;
            res.message = "utility constraints infeasible: " + probe.message;
            return res;
        }
        if (probe.ok() && probe.s_data) warm_s = probe.s_data;
    }
    if (!utility_aware) {
        for (size_t i = 0; i < spec.privacy.size(); ++i) {
            double ceiling = mask_prior_trace(pm, spec.privacy[i].mask);
            if (spec.privacy[i].gamma > ceiling + 1e-9) {
                res.status = SolveStatus::infeasible;
                std::ostringstream os;
                os << "privacy bound " << spec.privacy[i].gamma
                   << " exceeds the prior-trace ceiling " << ceiling << " for mask " << i;
                res.message = os.str();
                return res;
            }
        }
        // Privacy already slack with zero noise: the minimum-utility answer is
        // exactly R = 0 (utility traces are monotone in the noise).
        auto zero_traces = verify_traces(pm, Mat::Zero(m, m), all_masks(spec));
        bool slack = true;
        for (size_t i = 0; i < spec.privacy.size(); ++i)
            if (zero_traces[spec.utility.size() + i] < spec.privacy[i].gamma - 1e-12)
                slack = false;
        if (slack) {
            res.status = SolveStatus::optimal;
            res.r_data = Mat::Zero(m, m);
            res.achieved_utility.assign(zero_traces.begin(),
                                        zero_traces.begin() + spec.utility.size());
            res.achieved_privacy.assign(zero_traces.begin() + spec.utility.size(),
                                        zero_traces.end());
            double gamma = 0.0;
            for (double t : res.achieved_utility) gamma += t;
            res.iterations.push_back({0, gamma, 0.0});
            res.message = "privacy bounds hold with zero noise; utility floor attained at R = 0";
            return res;
        }
    }

    Mat G = symmetric_sqrt(pm.sigma_xx);
    Mat CG = C * G;
    bool have_rs = pm.r_sensor.norm() > 0.0;
    Mat rs_inv;
    if (!spec.utility.empty()) {
        if (!have_rs)
            throw std::invalid_argument(
                "iterative tradeoff: the gain-form utility block needs r_sensor > 0");
        rs_inv = spd_inverse(pm.r_sensor, "iterative tradeoff (sensor noise)");
    }
    KSupport ks = k_support(spec.utility);

    Mat Sbar = Mat::Identity(m, m);
    Mat Rbar = Mat::Identity(m, m);
    // Keeps each axis inside [1e-6, 1e6] before inversion: "off" and
    // "perfect" sensors stay representable without degenerate blocks, and
    // Sbar*Rbar = I holds exactly.
    auto clamp_diag = [m](Mat& a) {
        for (int i = 0; i < m; ++i) a(i, i) = std::clamp(a(i, i), 1e-6, 1e6);
    };
    auto warm_restart = [&]() -> bool {
        if (utility_aware) {
            if (!warm_s) return false;
            Sbar = *warm_s;
        } else {
            auto probe = min_noise_for_privacy(pm, TradeoffSpec{{}, spec.privacy}, opts);
            if (!probe.ok() || !probe.r_data) return false;
            Rbar = *probe.r_data;
            clamp_diag(Rbar);
            if (diag) {
                Sbar.setZero();
                for (int i = 0; i < m; ++i) Sbar(i, i) = 1.0 / Rbar(i, i);
            } else {
                Sbar = spd_inverse(Rbar + 1e-12 * Mat::Identity(m, m), "warm start");
            }
            return true;
        }
        clamp_diag(Sbar);
        if (diag) {
            Rbar.setZero();
            for (int i = 0; i < m; ++i) Rbar(i, i) = 1.0 / Sbar(i, i);
        } else {
            Rbar = spd_inverse(Sbar + 1e-12 * Mat::Identity(m, m), "warm start");
        }
        return true;
    };
    bool warm_tried = false;
    double gamma_old = 1e10;
    double gamma_cur = 0.0;
    SolveStatus final_status = SolveStatus::max_iter;

    auto hard_ok = [&](const Mat& s_candidate) {
        if (utility_aware) {
            if (spec.utility.empty()) return true;
            std::vector<double> tr;
            if (diag)
                tr = traces_with_precisions(pm, s_candidate.diagonal(),
                                            all_masks({spec.utility, {}}), true);
            else {
                Mat rr = spd_inverse(
                    s_candidate + 1e-14 * Mat::Identity(m, m) * s_candidate.norm(), "update");
                tr = verify_traces(pm, rr, all_masks({spec.utility, {}}));
            }
            for (size_t i = 0; i < spec.utility.size(); ++i)
                if (tr[i] > spec.utility[i].gamma + kCertSlack) return false;
            return true;
        }
        return true;  // privacy side is checked on the R update below
    };
    auto hard_ok_privacy = [&](const Mat& r_candidate) {
        std::vector<double> tr = verify_traces(pm, r_candidate, all_masks({{}, spec.privacy}));
        for (size_t i = 0; i < spec.privacy.size(); ++i)
            if (tr[i] < spec.privacy[i].gamma - kCertSlack) return false;
        return true;
    };

    for (int it = 0; it < opts.max_iter; ++it) {
        LmiProblem p;
        VarStructure noise_struct = diag ? VarStructure::diagonal : VarStructure::symmetric;
        int sv = p.add_variable({"Stilde", m, noise_struct});
        int rv = p.add_variable({"Rtilde", m, noise_struct});
        int kv = -1;
        if (!spec.utility.empty())
            kv = p.add_variable({"K", static_cast<int>(ks.rows.size()), VarStructure::full, m});

        // S_bar + S_tilde >= 0 and R_bar + R_tilde >= 0.
        if (diag) {
            for (int i = 0; i < m; ++i) {
                int b1 = p.add_psd_block(1, "Spos" + std::to_string(i));
                p.add_block_constant(b1, 0, 0, Sbar(i, i));
                p.add_block_term(b1, 0, 0, sv, i, i, 1.0);
                int b2 = p.add_psd_block(1, "Rpos" + std::to_string(i));
                p.add_block_constant(b2, 0, 0, Rbar(i, i));
                p.add_block_term(b2, 0, 0, rv, i, i, 1.0);
            }
        } else {
            Mat Im = Mat::Identity(m, m);
            int b1 = p.add_psd_block(m, "Spos");
            p.add_block_constant_matrix(b1, 0, 0, Sbar);
            p.add_block_matrix_term(b1, 0, 0, Im, sv, Im, 1.0);
            int b2 = p.add_psd_block(m, "Rpos");
            p.add_block_constant_matrix(b2, 0, 0, Rbar);
            p.add_block_matrix_term(b2, 0, 0, Im, rv, Im, 1.0);
        }

        // Linearized coupling Stilde*Rbar + Sbar*Rtilde = 0.
        if (diag) {
            for (int i = 0; i < m; ++i)
                p.add_eq({{p.entry_index(sv, i, i), Rbar(i, i)},
                          {p.entry_index(rv, i, i), Sbar(i, i)}},
                         0.0, "couple" + std::to_string(i));
        } else {
            for (int a = 0; a < m; ++a) {
                for (int b = 0; b < m; ++b) {
                    std::vector<LmiProblem::LinTerm> ts;
                    for (int k = 0; k < m; ++k) {
                        if (Rbar(k, b) != 0.0) ts.push_back({p.entry_index(sv, a, k), Rbar(k, b)});
                        if (Sbar(a, k) != 0.0) ts.push_back({p.entry_index(rv, k, b), Sbar(a, k)});
                    }
                    p.add_eq(std::move(ts), 0.0,
                             "couple" + std::to_string(a) + "," + std::to_string(b));
                }
            }
        }

        // Utility certificates with S = Sbar + Stilde.
        std::vector<int> quvars;
        for (size_t i = 0; i < spec.utility.size(); ++i) {
            const auto& e = spec.utility[i];
            const int u = static_cast<int>(e.mask.matrix.rows());
            int qv = p.add_variable({"Q_u" + std::to_string(i), u, VarStructure::symmetric});
            quvars.push_back(qv);
            p.add_psd_variable_block(qv);
            UtilityLmiTail tail;
            tail.rs_inv = &rs_inv;
            tail.s_var = sv;
            tail.s_const = Sbar;
            add_utility_lmi(p, e.mask, ks.selectors[i], kv, qv, G, CG, tail,
                            "utility" + std::to_string(i));
            if (utility_aware) {
                add_trace_upper(p, qv, u, e.gamma, "trace_u" + std::to_string(i));
            }
        }
        // Privacy certificates with R = Rbar + Rtilde.
        std::vector<int> gamma_vars;
        std::vector<LmiProblem::LinTerm> obj;
        for (size_t i = 0; i < spec.privacy.size(); ++i) {
            const auto& e = spec.privacy[i];
            const int u = static_cast<int>(e.mask.matrix.rows());
            int qv = p.add_variable({"Q_p" + std::to_string(i), u, VarStructure::symmetric});
            p.add_psd_variable_block(qv);
            add_privacy_lmi(p, pm, e.mask, qv, Rbar, rv, "privacy" + std::to_string(i));
            if (utility_aware) {
                int gv = p.add_variable({"gamma_p" + std::to_string(i), 1, VarStructure::scalar});
                gamma_vars.push_back(gv);
                add_trace_lower(p, qv, u, 0.0, gv, "trace_p" + std::to_string(i));
                obj.push_back({p.entry_index(gv, 0, 0), 1.0});
            } else {
                add_trace_lower(p, qv, u, e.gamma, -1, "trace_p" + std::to_string(i));
            }
        }
        if (!utility_aware) {
            for (size_t i = 0; i < spec.utility.size(); ++i) {
                int gv = p.add_variable({"gamma_u" + std::to_string(i), 1, VarStructure::scalar});
                gamma_vars.push_back(gv);
                // trace(Q_u) <= gamma_u with gamma_u minimized.
                int blk = p.add_psd_block(1, "trace_u" + std::to_string(i));
                p.add_block_term(blk, 0, 0, gv, 0, 0, 1.0);
                const int u = static_cast<int>(spec.utility[i].mask.matrix.rows());
                for (int d = 0; d < u; ++d) p.add_block_term(blk, 0, 0, quvars[i], d, d, -1.0);
                obj.push_back({p.entry_index(gv, 0, 0), 1.0});
            }
        }
        p.set_objective(obj, 0.0, utility_aware);
        if (it == 0) maybe_dump(opts, p, utility_aware ? "utility_aware" : "privacy_aware");

        LmiSolution sol = solve(p, solver_options(opts));
        // An iteration-capped subproblem whose z iterate is feasible (tiny
        // LMI residual) is still a usable step; the oracle acceptance check
        // below guards the hard side regardless.
        if (!usable_solution(sol)) {
            if (it == 0 && !warm_tried && sol.status == SolveStatus::infeasible) {
                // The identity start is outside the linearization's reach;
                // restart from the hard-side optimal noise.
                warm_tried = true;
                if (warm_restart()) {
                    res.message += "; identity start infeasible, warm restart applied";
                    --it;
                    continue;
                }
            }
            res.status = it == 0 ? sol.status : SolveStatus::max_iter;
            std::ostringstream os;
            os << "; subproblem at iteration " << it << ": " << to_string(sol.status)
               << " (gap " << sol.stats.duality_gap << ", lmi residual "
               << sol.stats.primal_residual << ", multiplier residual "
               << sol.stats.dual_residual << ") " << sol.message;
            res.message += os.str();
            final_status = res.status;
            break;
        }
        gamma_cur = sol.objective_value;
        res.stats = sol.stats;

        Mat Stilde = sol.values.at("Stilde");
        Mat Rtilde = sol.values.at("Rtilde");

        // Step acceptance on the hard side; halve the delta on violation.
        bool accepted = false;
        for (int attempt = 0; attempt < 6; ++attempt) {
            if (utility_aware) {
                Mat cand = Sbar + Stilde;
                if (hard_ok(cand)) {
                    Sbar = cand;
                    clamp_diag(Sbar);
                    if (diag) {
                        Rbar.setZero();
                        for (int i = 0; i < m; ++i) Rbar(i, i) = 1.0 / Sbar(i, i);
                    } else {
                        Rbar = spd_inverse(
                            Sbar + 1e-14 * std::max(Sbar.norm(), 1.0) * Mat::Identity(m, m),
                            "update");
                    }
                    accepted = true;
                    break;
                }
            } else {
                Mat cand = Rbar + Rtilde;
                if (hard_ok_privacy(cand)) {
                    Rbar = cand;
                    clamp_diag(Rbar);
                    if (diag) {
                        Sbar.setZero();
                        for (int i = 0; i < m; ++i) Sbar(i, i) = 1.0 / Rbar(i, i);
                    } else {
                        Sbar = spd_inverse(
                            Rbar + 1e-14 * std::max(Rbar.norm(), 1.0) * Mat::Identity(m, m),
                            "update");
                    }
                    accepted = true;
                    break;
                }
            }
            Stilde *= 0.5;
            Rtilde *= 0.5;
        }

        double delta = std::abs(gamma_cur - gamma_old);
        res.iterations.push_back({it, gamma_cur, delta});
        if (!accepted) {
            res.message += "; iterate rejected after 5 halvings at iteration " +
                           std::to_string(it);
            final_status = delta <= opts.eps ? SolveStatus::optimal : SolveStatus::max_iter;
            break;
        }
        if (delta <= opts.eps) {
            final_status = SolveStatus::optimal;
            break;
        }
        gamma_old = gamma_cur;
    }

    res.status = final_status;
    res.s_data = Sbar;
    res.r_data = Rbar;
    if (diag) res.precisions = Sbar.diagonal();
    for (int i = 0; i < m; ++i)
        if (Sbar(i, i) < kExcludeBelow) res.excluded_axes.push_back(i);

    // Final oracle certification; achieved traces are the oracle values.
    std::vector<double> traces;
    if (diag)
        traces = traces_with_precisions(pm, Sbar.diagonal(), all_masks(spec), true);
    else
        traces = verify_traces(pm, Rbar, all_masks(spec));
    res.achieved_utility.assign(traces.begin(), traces.begin() + spec.utility.size());
    res.achieved_privacy.assign(traces.begin() + spec.utility.size(), traces.end());
    if (res.status == SolveStatus::optimal) {
        if (utility_aware)
            certify_upper(res, res.achieved_utility, spec.utility, "utility");
        else
            certify_lower(res, res.achieved_privacy, spec.privacy, "privacy");
    }
    return res;
}

}  // namespace

SynthesisResult utility_aware_privacy(const PriorMoments& pm, const Mat& C,
                                      const TradeoffSpec& spec, const SynthesisOptions& opts) {
    return iterate_tradeoff(pm, C, spec, opts, true);
}

SynthesisResult privacy_aware_utility(const PriorMoments& pm, const Mat& C,
                                      const TradeoffSpec& spec, const SynthesisOptions& opts) {
    return iterate_tradeoff(pm, C, spec, opts, false);
}

}  // namespace satpriv
