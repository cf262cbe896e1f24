#ifndef SATPRIV_LMI_HPP
#define SATPRIV_LMI_HPP

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace satpriv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class VarStructure { symmetric, diagonal, full, scalar };

/**
 * @brief A matrix-valued decision variable.
 *
 * `cols` is used only with structure=full for rectangular variables
 * (0 means square dim x dim).
 */
struct MatrixVar {
    std::string name;
    int dim = 1;
    VarStructure structure = VarStructure::scalar;
    int cols = 0;

    int rows_count() const { return structure == VarStructure::scalar ? 1 : dim; }
    int cols_count() const {
        if (structure == VarStructure::scalar) return 1;
        if (structure == VarStructure::full && cols > 0) return cols;
        return dim;
    }
    int entry_count() const;
};

enum class SolveStatus { optimal, infeasible, unbounded, numerical_failure, max_iter };

const char* to_string(SolveStatus s);

struct SolverStats {
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double duality_gap = 0.0;
};

struct LmiSolution {
    SolveStatus status = SolveStatus::numerical_failure;
    std::map<std::string, Mat> values;
    double objective_value = 0.0;
    SolverStats stats;
    std::string message;
};

/**
 * @brief A semidefinite program in LMI form: affine symmetric blocks
 * required PSD, affine equalities, and a linear objective over matrix
 * variables.
 *
 * Blocks accumulate a constant part and linear terms in variable entries;
 * off-diagonal block positions must be written on both sides (the problem
 * is checked for symmetry when solving).
 */
class LmiProblem {
  public:
    struct LinTerm {
        int entry = 0;  // global flattened variable-entry index
        double coeff = 0.0;
    };
    struct Triplet {
        int entry;
        int r, c;
        double coeff;
    };
    struct Block {
        int dim = 0;
        std::string label;
        Mat constant;                  // dim x dim, accumulated
        std::vector<Triplet> terms;    // accumulated, uncoalesced
    };
    struct EqRow {
        std::vector<LinTerm> terms;
        double rhs = 0.0;
        std::string label;
    };

    int add_variable(const MatrixVar& v);
    const MatrixVar& variable(int var) const { return vars_[var]; }
    int num_variables() const { return static_cast<int>(vars_.size()); }
    int num_entries() const { return total_entries_; }

    /** Global flat index of entry (i, j) of variable `var`. */
    int entry_index(int var, int i, int j) const;

    int add_psd_block(int dim, std::string label = {});
    void add_block_constant(int block, int r, int c, double v);
    void add_block_constant_matrix(int block, int r0, int c0, const Mat& m, double sign = 1.0);
    void add_block_term(int block, int r, int c, int var, int i, int j, double coeff);

    /**
     * Adds sign * L * V * R (or sign * L * V^T * R) to the sub-block whose
     * top-left corner is (r0, c0), where V is the matrix variable `var`.
     */
    void add_block_matrix_term(int block, int r0, int c0, const Mat& L, int var, const Mat& R,
                               double sign = 1.0, bool transpose_var = false);

    /** Declares the variable itself PSD: one block (or 1x1 blocks if diagonal). */
    void add_psd_variable_block(int var);

    void add_eq(std::vector<LinTerm> terms, double rhs, std::string label = {});

    /** Linear objective sum(coeff * entry) + constant; minimized or maximized. */
    void set_objective(std::vector<LinTerm> terms, double constant, bool maximize);

    const std::vector<Block>& blocks() const { return blocks_; }
    const std::vector<EqRow>& equalities() const { return eqs_; }
    const std::vector<LinTerm>& objective_terms() const { return obj_terms_; }
    double objective_constant() const { return obj_constant_; }
    bool maximize() const { return maximize_; }

    /** Reconstructs the matrix for `var` from a flat entry vector. */
    Mat value_of(int var, const Vec& entries) const;

  private:
    std::vector<MatrixVar> vars_;
    std::vector<int> offsets_;
    int total_entries_ = 0;
    std::vector<Block> blocks_;
    std::vector<EqRow> eqs_;
    std::vector<LinTerm> obj_terms_;
    double obj_constant_ = 0.0;
    bool maximize_ = false;
};

struct SolveOptions {
    double tol = 1e-8;        // relative duality-gap target
    int max_iterations = 200;
    bool verbose = false;
};

LmiSolution solve(const LmiProblem& p, const SolveOptions& opts = {});
inline LmiSolution solve(const LmiProblem& p, double tol) {
    SolveOptions o;
    o.tol = tol;
    return solve(p, o);
}

/** Plain-text sparse triplet dump (format documented in the README). */
void dump_problem(const LmiProblem& p, std::ostream& os);

/**
 * @brief Test oracle: does PSD-ness of [A, B; B^T, C] agree with
 * (C > 0 and A - B C^-1 B^T >= 0)?
 */
struct SchurCheck {
    bool block_psd = false;
    bool schur_psd = false;
    bool agree() const { return block_psd == schur_psd; }
};
SchurCheck schur_lemma_check(const Mat& A, const Mat& B, const Mat& C);

/** Returns ((Z+R)^-1, Z^-1 - (Z + Z R^-1 Z)^-1) for equality testing. */
std::pair<Mat, Mat> hua_identity(const Mat& Z, const Mat& R);

}  // namespace satpriv

#endif  // SATPRIV_LMI_HPP
