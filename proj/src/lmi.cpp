#include "satpriv/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace satpriv {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::unbounded: return "unbounded";
        case SolveStatus::numerical_failure: return "numerical_failure";
        case SolveStatus::max_iter: return "max_iter";
    }
    return "unknown";
}

int MatrixVar::entry_count() const {
    switch (structure) {
        case VarStructure::scalar: return 1;
        case VarStructure::diagonal: return dim;
        case VarStructure::symmetric: return dim * (dim + 1) / 2;
        case VarStructure::full: return rows_count() * cols_count();
    }
    return 0;
}

int LmiProblem::add_variable(const MatrixVar& v) {
    if (v.dim < 1) throw std::invalid_argument("add_variable: dim must be >= 1");
    if (v.structure == VarStructure::diagonal && v.cols > 0 && v.cols != v.dim)
        throw std::invalid_argument("add_variable: diagonal variables are square");
    vars_.push_back(v);
    offsets_.push_back(total_entries_);
    total_entries_ += v.entry_count();
    return static_cast<int>(vars_.size()) - 1;
}

int LmiProblem::entry_index(int var, int i, int j) const {
    const MatrixVar& v = vars_[var];
    const int off = offsets_[var];
    switch (v.structure) {
        case VarStructure::scalar:
            return off;
        case VarStructure::diagonal:
            if (i != j) throw std::invalid_argument("entry_index: off-diagonal of diagonal var");
            return off + i;
        case VarStructure::symmetric: {
            if (i > j) std::swap(i, j);
            return off + i * v.dim - i * (i + 1) / 2 + j;
        }
        case VarStructure::full:
            return off + i * v.cols_count() + j;
    }
    return -1;
}

int LmiProblem::add_psd_block(int dim, std::string label) {
    Block b;
    b.dim = dim;
    b.label = std::move(label);
    b.constant = Mat::Zero(dim, dim);
    blocks_.push_back(std::move(b));
    return static_cast<int>(blocks_.size()) - 1;
}

void LmiProblem::add_block_constant(int block, int r, int c, double v) {
    blocks_[block].constant(r, c) += v;
}

void LmiProblem::add_block_constant_matrix(int block, int r0, int c0, const Mat& m, double sign) {
    blocks_[block].constant.block(r0, c0, m.rows(), m.cols()) += sign * m;
}

void LmiProblem::add_block_term(int block, int r, int c, int var, int i, int j, double coeff) {
    if (coeff == 0.0) return;
    blocks_[block].terms.push_back({entry_index(var, i, j), r, c, coeff});
}

void LmiProblem::add_block_matrix_term(int block, int r0, int c0, const Mat& L, int var,
                                       const Mat& R, double sign, bool transpose_var) {
    const MatrixVar& v = vars_[var];
    const int vr = transpose_var ? v.cols_count() : v.rows_count();
    const int vc = transpose_var ? v.rows_count() : v.cols_count();
    if (L.cols() != vr || R.rows() != vc)
        throw std::invalid_argument("add_block_matrix_term: dimension mismatch for variable '" +
                                    v.name + "'");
    for (int a = 0; a < L.rows(); ++a) {
        for (int i = 0; i < vr; ++i) {
            double l = L(a, i);
            if (l == 0.0) continue;
            for (int j = 0; j < vc; ++j) {
                int ei = transpose_var ? j : i;
                int ej = transpose_var ? i : j;
                if (v.structure == VarStructure::diagonal || v.structure == VarStructure::scalar) {
                    if (ei != ej) continue;
                }
                for (int b = 0; b < R.cols(); ++b) {
                    double coeff = sign * l * R(j, b);
                    if (coeff != 0.0) add_block_term(block, r0 + a, c0 + b, var, ei, ej, coeff);
                }
            }
        }
    }
}

void LmiProblem::add_psd_variable_block(int var) {
    const MatrixVar& v = vars_[var];
    if (v.structure == VarStructure::full)
        throw std::invalid_argument("add_psd_variable_block: full variables are not symmetric");
    if (v.structure == VarStructure::scalar) {
        int b = add_psd_block(1, v.name + ">=0");
        add_block_term(b, 0, 0, var, 0, 0, 1.0);
        return;
    }
    if (v.structure == VarStructure::diagonal) {
        for (int i = 0; i < v.dim; ++i) {
            int b = add_psd_block(1, v.name + "[" + std::to_string(i) + "]>=0");
            add_block_term(b, 0, 0, var, i, i, 1.0);
        }
        return;
    }
    int b = add_psd_block(v.dim, v.name + ">=0");
    for (int i = 0; i < v.dim; ++i)
        for (int j = 0; j < v.dim; ++j) add_block_term(b, i, j, var, i, j, 1.0);
}

void LmiProblem::add_eq(std::vector<LinTerm> terms, double rhs, std::string label) {
    eqs_.push_back({std::move(terms), rhs, std::move(label)});
}

void LmiProblem::set_objective(std::vector<LinTerm> terms, double constant, bool maximize) {
    obj_terms_ = std::move(terms);
    obj_constant_ = constant;
    maximize_ = maximize;
}

Mat LmiProblem::value_of(int var, const Vec& entries) const {
    const MatrixVar& v = vars_[var];
    Mat m = Mat::Zero(v.rows_count(), v.cols_count());
    switch (v.structure) {
        case VarStructure::scalar:
            m(0, 0) = entries(offsets_[var]);
            break;
        case VarStructure::diagonal:
            for (int i = 0; i < v.dim; ++i) m(i, i) = entries(entry_index(var, i, i));
            break;
        case VarStructure::symmetric:
            for (int i = 0; i < v.dim; ++i)
                for (int j = i; j < v.dim; ++j)
                    m(i, j) = m(j, i) = entries(entry_index(var, i, j));
            break;
        case VarStructure::full:
            for (int i = 0; i < v.rows_count(); ++i)
                for (int j = 0; j < v.cols_count(); ++j)
                    m(i, j) = entries(entry_index(var, i, j));
            break;
    }
    return m;
}

void dump_problem(const LmiProblem& p, std::ostream& os) {
    os << "# satpriv LMI problem dump\n";
    os << "# objective " << (p.maximize() ? "maximize" : "minimize") << ", constant "
       << p.objective_constant() << "\n";
    os << "# line format: <constraint-id> <var:entry|const> <row> <col> <coeff>\n";
    auto entry_name = [&p](int entry) {
        for (int v = 0; v < p.num_variables(); ++v) {
            const MatrixVar& mv = p.variable(v);
            for (int i = 0; i < mv.rows_count(); ++i)
                for (int j = 0; j < mv.cols_count(); ++j) {
                    if (mv.structure == VarStructure::diagonal && i != j) continue;
                    if (mv.structure == VarStructure::symmetric && i > j) continue;
                    if (p.entry_index(v, i, j) == entry)
                        return mv.name + ":" + std::to_string(i) + "," + std::to_string(j);
                }
        }
        return std::string("entry") + std::to_string(entry);
    };
    for (const auto& t : p.objective_terms())
        os << "obj " << entry_name(t.entry) << " 0 0 " << t.coeff << "\n";
    for (size_t b = 0; b < p.blocks().size(); ++b) {
        const auto& blk = p.blocks()[b];
        std::string id = "psd" + std::to_string(b) +
                         (blk.label.empty() ? "" : ("(" + blk.label + ")"));
        for (int r = 0; r < blk.dim; ++r)
            for (int c = 0; c < blk.dim; ++c)
                if (blk.constant(r, c) != 0.0)
                    os << id << " const " << r << " " << c << " " << blk.constant(r, c) << "\n";
        for (const auto& t : blk.terms)
            os << id << " " << entry_name(t.entry) << " " << t.r << " " << t.c << " " << t.coeff
               << "\n";
    }
    for (size_t e = 0; e < p.equalities().size(); ++e) {
        const auto& eq = p.equalities()[e];
        std::string id = "eq" + std::to_string(e);
        for (const auto& t : eq.terms)
            os << id << " " << entry_name(t.entry) << " 0 0 " << t.coeff << "\n";
        os << id << " rhs 0 0 " << eq.rhs << "\n";
    }
}

SchurCheck schur_lemma_check(const Mat& A, const Mat& B, const Mat& C) {
    const auto na = A.rows();
    const auto nc = C.rows();
    Mat full(na + nc, na + nc);
    full << A, B, B.transpose(), C;
    full = 0.5 * (full + full.transpose());

    auto min_eig = [](const Mat& m) {
        Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    };
    double scale = 1.0 + full.norm();
    SchurCheck chk;
    chk.block_psd = min_eig(full) >= -1e-10 * scale;
    double cmin = min_eig(0.5 * (C + C.transpose()));
    if (cmin > 0.0) {
        Mat schur = A - B * C.llt().solve(B.transpose());
        chk.schur_psd = min_eig(0.5 * (schur + schur.transpose())) >= -1e-10 * scale;
    } else {
        chk.schur_psd = false;
    }
    return chk;
}

std::pair<Mat, Mat> hua_identity(const Mat& Z, const Mat& R) {
    Eigen::LLT<Mat> zllt(Z), rllt(R);
    if (zllt.info() != Eigen::Success || rllt.info() != Eigen::Success)
        throw std::runtime_error("hua_identity: inputs must be symmetric positive definite");
    const auto n = Z.rows();
    Mat I = Mat::Identity(n, n);
    Mat lhs = (Z + R).llt().solve(I);
    Mat zinv = zllt.solve(I);
    Mat inner = Z + Z * rllt.solve(Z);
    Mat rhs = zinv - inner.llt().solve(I);
    return {lhs, rhs};
}

// -------------------------------------------------------------------------
// Interior-point solver (primal-dual path following with NT scaling).
//
// Internal standard form after preprocessing:
//   minimize  c^T z   s.t.   S(z) = C0_b + sum_j z_j A_jb  PSD for all blocks.
// -------------------------------------------------------------------------

namespace {

struct CanonTriplet {
    int r, c;        // r <= c
    double v;
};

struct CanonBlock {
    int dim = 0;
    Mat constant;
    // per variable entry: coalesced upper triplets
    std::vector<std::vector<CanonTriplet>> coeffs;  // indexed by column id
    std::vector<int> touching;                      // columns with nonzero coeffs here
};

double inner_sym(const std::vector<CanonTriplet>& ts, const Mat& m) {
    double acc = 0.0;
    for (const auto& t : ts) acc += t.v * m(t.r, t.c) * (t.r == t.c ? 1.0 : 2.0);
    return acc;
}

void add_sym(Mat& m, const std::vector<CanonTriplet>& ts, double scale) {
    for (const auto& t : ts) {
        m(t.r, t.c) += scale * t.v;
        if (t.r != t.c) m(t.c, t.r) += scale * t.v;
    }
}

// W * A * W accumulated via rank-one outer products of W's columns.
void accumulate_waw(Mat& out, const std::vector<CanonTriplet>& ts, const Mat& w) {
    for (const auto& t : ts) {
        out.noalias() += t.v * (w.col(t.r) * w.col(t.c).transpose());
        if (t.r != t.c) out.noalias() += t.v * (w.col(t.c) * w.col(t.r).transpose());
    }
}

struct CoreProblem {
    int m = 0;  // number of free scalar unknowns
    Vec c;
    double c0 = 0.0;
    std::vector<CanonBlock> blocks;
    int n_total = 0;
};

double max_step(const Mat& p, const Eigen::LLT<Mat>& llt, const Mat& dp) {
    (void)p;
    Mat tmp = llt.matrixL().solve(dp);
    Mat q = llt.matrixL().solve(tmp.transpose());
    q = 0.5 * (q + q.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(q, Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues().minCoeff();
    return lmin < 0.0 ? -1.0 / lmin : kInf;
}

struct IpResult {
    SolveStatus status = SolveStatus::max_iter;
    Vec z;
    SolverStats stats;
    std::string message;
};

IpResult interior_point(const CoreProblem& p, const SolveOptions& opts) {
    IpResult res;
    const int m = p.m;
    const int nb = static_cast<int>(p.blocks.size());
    const double feas_tol = std::max(opts.tol, 1e-10);

    Vec z = Vec::Zero(m);
    std::vector<Mat> X(nb), S(nb);
    double c0norm = 0.0;
    for (int b = 0; b < nb; ++b) c0norm = std::max(c0norm, p.blocks[b].constant.norm());
    double xi = std::max(10.0, std::sqrt(static_cast<double>(p.n_total)));
    double si = std::max(xi, 1.5 * c0norm);
    for (int b = 0; b < nb; ++b) {
        X[b] = xi * Mat::Identity(p.blocks[b].dim, p.blocks[b].dim);
        S[b] = si * Mat::Identity(p.blocks[b].dim, p.blocks[b].dim);
    }

    const double cnorm = p.c.size() ? p.c.template lpNorm<Eigen::Infinity>() : 0.0;
    int stall = 0;
    double best_gap = kInf;
    int since_best = 0;
    double last_gap = kInf;
    int corr_stall = 0;
    bool use_corrector = true;

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        res.stats.iterations = iter;

        // Residuals and convergence metrics.
        double gap = 0.0;
        for (int b = 0; b < nb; ++b) gap += (X[b].array() * S[b].array()).sum();
        double mu = gap / p.n_total;

        std::vector<Mat> Rd(nb);
        double rd_norm = 0.0;
        for (int b = 0; b < nb; ++b) {
            Mat s_of_z = p.blocks[b].constant;
            for (int j : p.blocks[b].touching) add_sym(s_of_z, p.blocks[b].coeffs[j], z(j));
            Rd[b] = s_of_z - S[b];
            rd_norm = std::max(rd_norm, Rd[b].norm() / (1.0 + p.blocks[b].constant.norm()));
        }
        Vec ax = Vec::Zero(m);
        for (int b = 0; b < nb; ++b)
            for (int j : p.blocks[b].touching) ax(j) += inner_sym(p.blocks[b].coeffs[j], X[b]);
        Vec rp = p.c - ax;
        double rp_norm = m ? rp.template lpNorm<Eigen::Infinity>() / (1.0 + cnorm) : 0.0;

        double pobj = p.c.size() ? p.c.dot(z) : 0.0;
        double dobj = 0.0;
        for (int b = 0; b < nb; ++b) dobj -= (p.blocks[b].constant.array() * X[b].array()).sum();
        double relgap = gap / (1.0 + std::abs(pobj) + std::abs(dobj));

        res.z = z;
        res.stats.primal_residual = rd_norm;
        res.stats.dual_residual = rp_norm;
        res.stats.duality_gap = relgap;

        if (opts.verbose) {
            std::ostringstream os;
            os << "it " << iter << " gap " << relgap << " rd " << rd_norm << " rp " << rp_norm
               << " pobj " << pobj;
            res.message += os.str() + "\n";
        }

        if (relgap <= opts.tol && rd_norm <= feas_tol && rp_norm <= feas_tol) {
            res.status = SolveStatus::optimal;
            return res;
        }
        // Degenerate endgames shrink the gap glacially; once the iterate is
        // feasible and the gap is already tiny, further grinding buys nothing.
        if (relgap < 0.8 * best_gap) {
            best_gap = relgap;
            since_best = 0;
        } else if (++since_best >= 30 && relgap <= 1e-5 && rd_norm <= 1e-7) {
            res.status = SolveStatus::max_iter;
            res.message += "stopped early: gap stagnated near convergence";
            return res;
        }
        // The second-order term helps early but can thrash near degenerate
        // faces; drop it once it stops paying.
        if (use_corrector) {
            if (relgap > 0.9 * last_gap) {
                if (++corr_stall >= 3) use_corrector = false;
            } else {
                corr_stall = 0;
            }
        }
        last_gap = relgap;

        // Farkas-style certificate of LMI infeasibility: X >= 0 with
        // A(X) ~ 0 and <C0, X> < 0 scaling up.
        double g0x = -dobj;
        double ax_norm = m ? ax.template lpNorm<Eigen::Infinity>() : 0.0;
        double x_norm = 0.0;
        for (int b = 0; b < nb; ++b) x_norm = std::max(x_norm, X[b].norm());
        if (g0x < -1e-6 && ax_norm <= 1e-9 * (-g0x) && x_norm > 1e4) {
            res.status = SolveStatus::infeasible;
            res.message += "infeasibility certificate: <C0,X> < 0 with A(X) ~ 0";
            return res;
        }
        if (z.size() && z.template lpNorm<Eigen::Infinity>() > 1e11 && pobj < 0.0 &&
            rd_norm <= 1e-6) {
            res.status = SolveStatus::unbounded;
            res.message += "objective ray detected (iterates diverge while staying feasible)";
            return res;
        }

        // NT scaling point per block.
        std::vector<Eigen::LLT<Mat>> lx(nb), ls(nb);
        std::vector<Mat> W(nb);
        bool chol_ok = true;
        for (int b = 0; b < nb; ++b) {
            lx[b].compute(X[b]);
            ls[b].compute(S[b]);
            if (lx[b].info() != Eigen::Success || ls[b].info() != Eigen::Success) {
                chol_ok = false;
                break;
            }
            Mat lsl = ls[b].matrixL();
            Mat lxl = lx[b].matrixL();
            Eigen::JacobiSVD<Mat> svd(lsl.transpose() * lxl,
                                      Eigen::ComputeThinU | Eigen::ComputeThinV);
            Vec d = svd.singularValues();
            for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = std::max(d(i), 1e-150);
            Mat g = lxl * svd.matrixV() * d.cwiseSqrt().cwiseInverse().asDiagonal();
            W[b].noalias() = g * g.transpose();
        }
        if (!chol_ok) {
            // Endgame degeneracy: keep the last good iterate and report it as
            // iteration-capped when it is already near-feasible.
            if (res.stats.duality_gap <= 1e-4 && res.stats.primal_residual <= 1e-6) {
                res.status = SolveStatus::max_iter;
                res.message += "stopped early: lost positive definiteness near convergence";
            } else {
                res.status = SolveStatus::numerical_failure;
                res.message += "iterate lost positive definiteness";
            }
            return res;
        }

        // Schur complement M(i,j) = sum_b <A_i, W A_j W>.
        Mat schur = Mat::Zero(m, m);
        std::vector<Mat> waw(nb);  // scratch
        for (int b = 0; b < nb; ++b) {
            const auto& blk = p.blocks[b];
            for (int j : blk.touching) {
                Mat t = Mat::Zero(blk.dim, blk.dim);
                accumulate_waw(t, blk.coeffs[j], W[b]);
                for (int i : blk.touching)
                    if (i <= j) schur(i, j) += inner_sym(blk.coeffs[i], t);
            }
        }
        schur = schur.selfadjointView<Eigen::Upper>();

        Eigen::LLT<Mat> mllt;
        double jitter = 0.0;
        double mdiag = m ? schur.diagonal().maxCoeff() : 1.0;
        for (int attempt = 0; attempt < 4; ++attempt) {
            Mat mj = schur;
            if (jitter > 0.0) mj += jitter * Mat::Identity(m, m);
            mllt.compute(mj);
            if (mllt.info() == Eigen::Success) break;
            jitter = jitter == 0.0 ? 1e-12 * std::max(mdiag, 1.0) : jitter * 100.0;
        }
        if (m > 0 && mllt.info() != Eigen::Success) {
            res.status = SolveStatus::numerical_failure;
            res.message += "Schur system not positive definite";
            return res;
        }

        auto solve_direction = [&](const std::vector<Mat>& rc, Vec& dz, std::vector<Mat>& ds,
                                   std::vector<Mat>& dx) {
            Vec rhs = Vec::Zero(m);
            for (int b = 0; b < nb; ++b) {
                Mat u = rc[b] - W[b] * Rd[b] * W[b];
                for (int j : p.blocks[b].touching)
                    rhs(j) += inner_sym(p.blocks[b].coeffs[j], u);
            }
            rhs -= rp;
            dz = m ? Vec(mllt.solve(rhs)) : Vec();
            ds.resize(nb);
            dx.resize(nb);
            for (int b = 0; b < nb; ++b) {
                ds[b] = Rd[b];
                for (int j : p.blocks[b].touching)
                    add_sym(ds[b], p.blocks[b].coeffs[j], dz(j));
                dx[b] = rc[b] - W[b] * ds[b] * W[b];
                dx[b] = 0.5 * (dx[b] + dx[b].transpose());
            }
        };

        // Predictor (affine scaling direction).
        std::vector<Mat> rc(nb);
        for (int b = 0; b < nb; ++b) rc[b] = -X[b];
        Vec dz_a;
        std::vector<Mat> ds_a, dx_a;
        solve_direction(rc, dz_a, ds_a, dx_a);

        double ap = 1.0, ad = 1.0;
        for (int b = 0; b < nb; ++b) {
            ap = std::min(ap, max_step(X[b], lx[b], dx_a[b]));
            ad = std::min(ad, max_step(S[b], ls[b], ds_a[b]));
        }
        double mu_aff = 0.0;
        for (int b = 0; b < nb; ++b)
            mu_aff += ((X[b] + ap * dx_a[b]).array() * (S[b] + ad * ds_a[b]).array()).sum();
        mu_aff = std::max(mu_aff / p.n_total, 0.0);
        double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 1e-8, 1.0);

        // Centering step with the Mehrotra second-order term; fall back to
        // the plain centering direction if the corrected step is much shorter.
        std::vector<Mat> sinv(nb);
        for (int b = 0; b < nb; ++b)
            sinv[b] = ls[b].solve(Mat::Identity(p.blocks[b].dim, p.blocks[b].dim));
        for (int b = 0; b < nb; ++b) {
            rc[b] = sigma * mu * sinv[b] - X[b];
            if (use_corrector) {
                Mat corr = dx_a[b] * ds_a[b] * sinv[b];
                rc[b] -= 0.5 * (corr + corr.transpose());
            }
        }
        Vec dz;
        std::vector<Mat> ds, dx;
        solve_direction(rc, dz, ds, dx);

        double tau = relgap < 1e-5 ? 0.995 : (iter < 4 ? 0.95 : 0.98);
        ap = ad = kInf;
        for (int b = 0; b < nb; ++b) {
            ap = std::min(ap, max_step(X[b], lx[b], dx[b]));
            ad = std::min(ad, max_step(S[b], ls[b], ds[b]));
        }
        double ap_aff = 1.0, ad_aff = 1.0;
        for (int b = 0; b < nb; ++b) {
            ap_aff = std::min(ap_aff, max_step(X[b], lx[b], dx_a[b]));
            ad_aff = std::min(ad_aff, max_step(S[b], ls[b], ds_a[b]));
        }
        if (use_corrector && std::min(ap, ad) < 0.3 * std::min(ap_aff, ad_aff)) {
            for (int b = 0; b < nb; ++b) rc[b] = sigma * mu * sinv[b] - X[b];
            solve_direction(rc, dz, ds, dx);
            ap = ad = kInf;
            for (int b = 0; b < nb; ++b) {
                ap = std::min(ap, max_step(X[b], lx[b], dx[b]));
                ad = std::min(ad, max_step(S[b], ls[b], ds[b]));
            }
        }
        ap = std::min(1.0, tau * ap);
        ad = std::min(1.0, tau * ad);

        if (ap < 1e-10 && ad < 1e-10) {
            if (++stall >= 5) {
                if (res.stats.duality_gap <= 1e-4 && res.stats.primal_residual <= 1e-6) {
                    res.status = SolveStatus::max_iter;
                    res.message += "stopped early: steps collapsed near convergence";
                } else {
                    res.status = SolveStatus::numerical_failure;
                    res.message += "step sizes collapsed";
                }
                return res;
            }
        } else {
            stall = 0;
        }

        // Fraction-to-boundary keeps iterates PD in exact arithmetic; back
        // the step off if rounding lost it.
        bool pd = false;
        for (int attempt = 0; attempt < 6 && !pd; ++attempt) {
            pd = true;
            for (int b = 0; b < nb && pd; ++b) {
                Eigen::LLT<Mat> cx(X[b] + ap * dx[b]), cs(S[b] + ad * ds[b]);
                pd = cx.info() == Eigen::Success && cs.info() == Eigen::Success;
            }
            if (!pd) {
                ap *= 0.5;
                ad *= 0.5;
            }
        }
        if (!pd) {
            ++stall;
            continue;
        }
        for (int b = 0; b < nb; ++b) {
            X[b] += ap * dx[b];
            S[b] += ad * ds[b];
        }
        z += ad * dz;
    }
    res.status = SolveStatus::max_iter;
    return res;
}

}  // namespace

LmiSolution solve(const LmiProblem& p, const SolveOptions& opts) {
    LmiSolution sol;
    const int n_entries = p.num_entries();

    // --- canonicalize blocks: symmetry check + per-entry coalesced triplets.
    struct RawBlock {
        int dim;
        Mat constant;
        std::vector<std::vector<CanonTriplet>> coeffs;
    };
    std::vector<RawBlock> raw;
    raw.reserve(p.blocks().size());
    for (const auto& blk : p.blocks()) {
        RawBlock rb;
        rb.dim = blk.dim;
        rb.constant = 0.5 * (blk.constant + blk.constant.transpose());
        double cerr = (blk.constant - blk.constant.transpose()).cwiseAbs().maxCoeff();
        if (cerr > 1e-9 * (1.0 + blk.constant.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("solve: block '" + blk.label +
                                        "' constant part is not symmetric");
        rb.coeffs.assign(n_entries, {});
        // Accumulate positional coefficients, check the caller wrote a
        // symmetric block, then fold mirror pairs into canonical (r <= c)
        // triplets whose value is the shared matrix entry.
        std::map<std::tuple<int, int, int>, double> pos;  // (entry, r, c) as written
        for (const auto& t : blk.terms) pos[{t.entry, t.r, t.c}] += t.coeff;
        for (const auto& [key, v] : pos) {
            auto [e, r, c] = key;
            if (r > c) continue;
            if (r == c) {
                if (v != 0.0) rb.coeffs[e].push_back({r, c, v});
                continue;
            }
            auto it = pos.find({e, c, r});
            double mirror = it == pos.end() ? 0.0 : it->second;
            if (std::abs(v - mirror) > 1e-9 * (1.0 + std::abs(v)))
                throw std::invalid_argument("solve: block '" + blk.label +
                                            "' linear part is not symmetric");
            double val = 0.5 * (v + mirror);
            if (val != 0.0) rb.coeffs[e].push_back({r, c, val});
        }
        // A lower-triangle term without its mirror must also be rejected.
        for (const auto& [key, v] : pos) {
            auto [e, r, c] = key;
            if (r <= c) continue;
            auto it = pos.find({e, c, r});
            if (it == pos.end() && std::abs(v) > 1e-12)
                throw std::invalid_argument("solve: block '" + blk.label +
                                            "' linear part is not symmetric");
        }
        raw.push_back(std::move(rb));
    }

    // --- objective vector.
    Vec c_full = Vec::Zero(n_entries);
    for (const auto& t : p.objective_terms()) c_full(t.entry) += t.coeff;
    double sense = p.maximize() ? -1.0 : 1.0;
    c_full *= sense;

    // --- equality elimination: y = y0 + N * zfree.
    Vec y0 = Vec::Zero(n_entries);
    Mat nullsp;
    bool have_eqs = !p.equalities().empty();
    if (have_eqs) {
        const int ne = static_cast<int>(p.equalities().size());
        Mat E = Mat::Zero(ne, n_entries);
        Vec f = Vec::Zero(ne);
        for (int i = 0; i < ne; ++i) {
            for (const auto& t : p.equalities()[i].terms) E(i, t.entry) += t.coeff;
            f(i) = p.equalities()[i].rhs;
            double rmax = std::max(E.row(i).cwiseAbs().maxCoeff(), std::abs(f(i)));
            if (rmax > 0.0) {
                E.row(i) /= rmax;
                f(i) /= rmax;
            }
        }
        Eigen::FullPivLU<Mat> lu(E);
        lu.setThreshold(1e-10);
        y0 = lu.solve(f);
        if ((E * y0 - f).template lpNorm<Eigen::Infinity>() >
            1e-8 * (1.0 + f.template lpNorm<Eigen::Infinity>())) {
            sol.status = SolveStatus::infeasible;
            sol.message = "equality constraints are inconsistent";
            return sol;
        }
        nullsp = lu.kernel();
        if (lu.dimensionOfKernel() == 0) nullsp = Mat::Zero(n_entries, 0);
    } else {
        nullsp = Mat::Identity(n_entries, n_entries);
    }
    const int m_free = static_cast<int>(nullsp.cols());

    CoreProblem core;
    core.c0 = 0.0;
    core.c = nullsp.transpose() * c_full;
    double obj_shift = c_full.dot(y0);

    core.blocks.reserve(raw.size());
    for (auto& rb : raw) {
        CanonBlock cb;
        cb.dim = rb.dim;
        cb.constant = rb.constant;
        for (int e = 0; e < n_entries; ++e)
            if (!rb.coeffs[e].empty() && y0(e) != 0.0) add_sym(cb.constant, rb.coeffs[e], y0(e));
        cb.coeffs.assign(m_free, {});
        for (int j = 0; j < m_free; ++j) {
            std::map<std::pair<int, int>, double> acc;
            for (int e = 0; e < n_entries; ++e) {
                double w = nullsp(e, j);
                if (w == 0.0 || rb.coeffs[e].empty()) continue;
                for (const auto& t : rb.coeffs[e]) acc[{t.r, t.c}] += w * t.v;
            }
            for (const auto& [rc, v] : acc)
                if (std::abs(v) > 1e-14) cb.coeffs[j].push_back({rc.first, rc.second, v});
            if (!cb.coeffs[j].empty()) cb.touching.push_back(j);
        }
        core.blocks.push_back(std::move(cb));
    }
    core.m = m_free;
    core.n_total = 0;
    for (const auto& b : core.blocks) core.n_total += b.dim;
    if (core.n_total == 0) {
        sol.status = SolveStatus::optimal;
        sol.objective_value = sense * obj_shift + p.objective_constant();
        Vec y = y0;
        for (int v = 0; v < p.num_variables(); ++v) sol.values[p.variable(v).name] = p.value_of(v, y);
        return sol;
    }

    // Columns that touch no block are unconstrained directions.
    std::vector<int> keep;
    for (int j = 0; j < m_free; ++j) {
        bool used = false;
        for (const auto& b : core.blocks)
            if (!b.coeffs[j].empty()) {
                used = true;
                break;
            }
        if (used) {
            keep.push_back(j);
        } else if (std::abs(core.c(j)) > 1e-12) {
            sol.status = SolveStatus::unbounded;
            sol.message = "objective direction unconstrained by any PSD block";
            return sol;
        }
    }
    if (static_cast<int>(keep.size()) != m_free) {
        CoreProblem reduced;
        reduced.c.resize(keep.size());
        for (size_t j = 0; j < keep.size(); ++j) reduced.c(j) = core.c(keep[j]);
        reduced.m = static_cast<int>(keep.size());
        reduced.n_total = core.n_total;
        for (auto& b : core.blocks) {
            CanonBlock nb;
            nb.dim = b.dim;
            nb.constant = b.constant;
            nb.coeffs.assign(keep.size(), {});
            for (size_t j = 0; j < keep.size(); ++j) {
                nb.coeffs[j] = std::move(b.coeffs[keep[j]]);
                if (!nb.coeffs[j].empty()) nb.touching.push_back(static_cast<int>(j));
            }
            reduced.blocks.push_back(std::move(nb));
        }
        Mat nsp_red(n_entries, keep.size());
        for (size_t j = 0; j < keep.size(); ++j) nsp_red.col(j) = nullsp.col(keep[j]);
        nullsp = nsp_red;
        core = std::move(reduced);
        core.m = static_cast<int>(keep.size());
    }

    // --- equilibration: block scales then variable-column scales (2 passes).
    std::vector<double> blk_scale(core.blocks.size(), 1.0);
    Vec col_scale = Vec::Ones(core.m);
    for (int pass = 0; pass < 2; ++pass) {
        for (size_t b = 0; b < core.blocks.size(); ++b) {
            auto& blk = core.blocks[b];
            double mx = blk.constant.cwiseAbs().maxCoeff();
            for (int j : blk.touching)
                for (const auto& t : blk.coeffs[j]) mx = std::max(mx, std::abs(t.v));
            if (mx <= 0.0) continue;
            double s = 1.0 / std::sqrt(mx);
            if (pass == 1 && std::abs(std::log10(mx)) < 0.5) continue;
            blk.constant *= s;
            for (int j : blk.touching)
                for (auto& t : blk.coeffs[j]) t.v *= s;
            blk_scale[b] *= s;
        }
        for (int j = 0; j < core.m; ++j) {
            double mx = 0.0;
            for (auto& blk : core.blocks)
                for (const auto& t : blk.coeffs[j]) mx = std::max(mx, std::abs(t.v));
            if (mx <= 0.0) continue;
            double s = 1.0 / mx;
            for (auto& blk : core.blocks) {
                bool any = false;
                for (auto& t : blk.coeffs[j]) {
                    t.v *= s;
                    any = true;
                }
                (void)any;
            }
            core.c(j) *= s;
            col_scale(j) *= s;
        }
    }
    double obj_scale = std::max(1.0, core.c.size() ? core.c.template lpNorm<Eigen::Infinity>() : 0.0);
    core.c /= obj_scale;

    IpResult ip = interior_point(core, opts);

    sol.status = ip.status;
    sol.stats = ip.stats;
    sol.message = ip.message;

    // Map back: solver z is in scaled coordinates; z_orig = col_scale .* z.
    Vec zorig = Vec::Zero(core.m);
    for (int j = 0; j < core.m; ++j) zorig(j) = ip.z.size() ? ip.z(j) * col_scale(j) : 0.0;
    Vec y = y0 + nullsp * zorig;
    for (int v = 0; v < p.num_variables(); ++v)
        sol.values[p.variable(v).name] = p.value_of(v, y);
    double obj = 0.0;
    for (const auto& t : p.objective_terms()) obj += t.coeff * y(t.entry);
    sol.objective_value = obj + p.objective_constant();

    // Independent feasibility re-check against the original (unscaled) data.
    if (sol.status == SolveStatus::optimal) {
        for (const auto& blk : p.blocks()) {
            Mat val = 0.5 * (blk.constant + blk.constant.transpose());
            for (const auto& t : blk.terms) val(t.r, t.c) += t.coeff * y(t.entry);
            val = 0.5 * (val + val.transpose());
            Eigen::SelfAdjointEigenSolver<Mat> es(val, Eigen::EigenvaluesOnly);
            double lmin = es.eigenvalues().minCoeff();
            if (lmin < -1e-7 * (1.0 + val.norm())) {
                sol.status = SolveStatus::numerical_failure;
                sol.message += "; post-check: block '" + blk.label +
                               "' violates PSD (min eig " + std::to_string(lmin) + ")";
                break;
            }
        }
        for (const auto& eq : p.equalities()) {
            double lhs = 0.0;
            for (const auto& t : eq.terms) lhs += t.coeff * y(t.entry);
            if (std::abs(lhs - eq.rhs) > 1e-7 * (1.0 + std::abs(eq.rhs))) {
                sol.status = SolveStatus::numerical_failure;
                sol.message += "; post-check: equality '" + eq.label + "' violated";
                break;
            }
        }
    }
    return sol;
}

}  // namespace satpriv
