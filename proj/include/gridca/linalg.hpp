#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "gridca/errors.hpp"
#include "gridca/graph.hpp"

namespace gridca::linalg {

struct Triplet {
    int row;
    int col;
    double value;
};

/// Compressed-row sparse matrix. Entries within a row are sorted by column
/// and duplicates are summed at construction. Storage arrays are public in
/// the usual CSR style; patching code edits values in place but never the
/// pattern.
class SparseMatrix {
public:
    SparseMatrix() = default;
    static SparseMatrix from_triplets(int n, std::vector<Triplet> triplets);

    int n() const { return n_; }
    int nnz() const { return static_cast<int>(values.size()); }

    /// Value at (i, j), 0.0 when the entry is not in the pattern.
    double value_at(int i, int j) const;

    /// Pointer into values for entry (i, j), nullptr when absent.
    double* find(int i, int j);
    const double* find(int i, int j) const;

    std::vector<int> row_ptr;
    std::vector<int> col_idx;
    std::vector<double> values;

private:
    int n_ = 0;
};

/// Exact A*v with deterministic per-row summation (ascending column index).
std::vector<double> spmv_csr(const SparseMatrix& a, std::span<const double> v);

/// Dense LU factors with unit lower diagonal, no row exchanges. Pivot checks
/// against 1e-10 * max|A|; a smaller pivot raises SingularError with the row.
struct LuFactors {
    int n = 0;
    std::vector<double> lu;  // row-major n*n, L below diagonal, U on and above
};

LuFactors lu_factor(const SparseMatrix& a);
std::vector<double> lu_solve(const LuFactors& f, std::span<const double> b);

/// One of Identity, Jacobi, ILU0, FullLU behind a single apply() used as M in
/// PCG: z = M^-1 r. apply is linear for all kinds.
class Preconditioner {
public:
    enum class Kind { Identity, Jacobi, Ilu0, FullLu };

    Preconditioner() = default;

    Kind kind() const { return kind_; }
    int n() const { return n_; }

    void apply(std::span<const double> r, std::span<double> z) const;
    std::vector<double> apply(std::span<const double> r) const;

    static Preconditioner identity(int n);
    static Preconditioner jacobi(std::vector<double> diagonal);  // ZeroPivotError
    static Preconditioner ilu0(const SparseMatrix& a);
    static Preconditioner full_lu(LuFactors f);

private:
    struct Ilu0Payload {
        std::vector<int> row_ptr, col_idx, diag_pos;
        std::vector<double> values;
    };
    Kind kind_ = Kind::Identity;
    int n_ = 0;
    std::vector<double> diag_;
    std::shared_ptr<const LuFactors> lu_;
    std::shared_ptr<const Ilu0Payload> ilu_;
};

/// z[i] = r[i] / A_ii. Throws ZeroPivotError on a zero diagonal.
Preconditioner jacobi_preconditioner(const SparseMatrix& a);

/// Incomplete LU restricted to the sparsity pattern of A (no fill). Requires
/// structural symmetry and a nonzero diagonal. Throws ZeroPivotError.
Preconditioner ilu0_factor(const SparseMatrix& a);

/// Full factorization wrapped as a preconditioner (exact inverse apply).
Preconditioner full_lu_preconditioner(const SparseMatrix& a);

/// Count of LU / ILU0 factorizations performed since process start. The
/// screening loop is required to factorize the base case exactly once; tests
/// snapshot this counter around a sweep to prove it.
long factorization_count();

using LinearOperator = std::function<void(std::span<const double>, std::span<double>)>;

struct CgOptions {
    double tol = 1e-8;  // relative residual: stop when ||r|| <= tol * ||b||
    int max_iter = 0;   // 0 means 2n
    /// Invoked after every iteration with (k, x_k, r_k); used by the
    /// reference-CG equivalence tests.
    std::function<void(int, std::span<const double>, std::span<const double>)> on_iterate;
};

struct CgReport {
    int iterations = 0;
    double final_residual_norm = 0.0;
    bool converged = false;
    std::vector<double> solution;
};

/// Preconditioned conjugate gradients:
///   alpha_k = r'z / p'Ap,  x += alpha p,  r -= alpha Ap,
///   beta_k  = z_new'r_new / z'r,  p = z_new + beta p.
/// The operator must be symmetric positive semi-definite with identity rows
/// on deenergized indices. Throws BreakdownError when p'Ap <= 0 beyond
/// round-off.
CgReport pcg_solve(const LinearOperator& apply_a, std::span<const double> b,
                   std::span<const double> x0, const Preconditioner& m,
                   const CgOptions& opts = {});

/// Graph-form B' apply (one superstep): for each energized non-slack vertex s,
///   ap[s] = diag'(s) * p[s] + sum over in-service, non-shielded incident
///           edges e=(s,t), t neither slack nor deenergized, of bprime_off(e) * p[t]
/// where diag'(s) subtracts 1/x of shielded incident edges. Slack and
/// deenergized vertices are identity rows. Returns the global p'Ap, folded in
/// ascending vertex order after the sweep. Overlay may be null (base case).
double spmv_graph(const graph::PowerGraph& g, const graph::ScenarioOverlay* overlay,
                  std::span<const double> p, std::span<double> ap);

/// The two interchangeable operator forms for pcg_solve.
LinearOperator bprime_operator(const graph::PowerGraph& g, const graph::ScenarioOverlay* overlay);
LinearOperator csr_operator(const SparseMatrix& a);

}  // namespace gridca::linalg
