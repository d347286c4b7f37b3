#include "gridca/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <utility>

namespace gridca::linalg {

namespace {

std::atomic<long> g_factorizations{0};

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

}  // namespace

long factorization_count() { return g_factorizations.load(); }

// ---- SparseMatrix ----

SparseMatrix SparseMatrix::from_triplets(int n, std::vector<Triplet> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return std::pair{a.row, a.col} < std::pair{b.row, b.col};
    });
    SparseMatrix m;
    m.n_ = n;
    m.row_ptr.assign(n + 1, 0);
    for (size_t k = 0; k < triplets.size();) {
        const int r = triplets[k].row;
        const int c = triplets[k].col;
        double v = 0.0;
        while (k < triplets.size() && triplets[k].row == r && triplets[k].col == c) {
            v += triplets[k].value;
            ++k;
        }
        m.col_idx.push_back(c);
        m.values.push_back(v);
        m.row_ptr[r + 1]++;
    }
    for (int i = 0; i < n; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
    return m;
}

double SparseMatrix::value_at(int i, int j) const {
    const double* p = find(i, j);
    return p ? *p : 0.0;
}

double* SparseMatrix::find(int i, int j) {
    return const_cast<double*>(std::as_const(*this).find(i, j));
}

const double* SparseMatrix::find(int i, int j) const {
    const int* begin = col_idx.data() + row_ptr[i];
    const int* end = col_idx.data() + row_ptr[i + 1];
    const int* it = std::lower_bound(begin, end, j);
    if (it == end || *it != j) return nullptr;
    return values.data() + (it - col_idx.data());
}

std::vector<double> spmv_csr(const SparseMatrix& a, std::span<const double> v) {
    if (static_cast<int>(v.size()) != a.n())
        throw DimensionMismatchError("spmv_csr: vector length " + std::to_string(v.size()) +
                                     " for matrix of dimension " + std::to_string(a.n()));
    std::vector<double> out(a.n(), 0.0);
    for (int i = 0; i < a.n(); ++i) {
        double s = 0.0;
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
            s += a.values[k] * v[a.col_idx[k]];
        out[i] = s;
    }
    return out;
}

// ---- dense LU ----

LuFactors lu_factor(const SparseMatrix& a) {
    const int n = a.n();
    LuFactors f;
    f.n = n;
    f.lu.assign(static_cast<size_t>(n) * n, 0.0);
    double max_abs = 0.0;
    for (int i = 0; i < n; ++i)
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
            f.lu[static_cast<size_t>(i) * n + a.col_idx[k]] = a.values[k];
            max_abs = std::max(max_abs, std::abs(a.values[k]));
        }
    const double pivot_floor = 1e-10 * max_abs;

    auto at = [&](int i, int j) -> double& { return f.lu[static_cast<size_t>(i) * n + j]; };
    for (int k = 0; k < n; ++k) {
        const double piv = at(k, k);
        if (std::abs(piv) <= pivot_floor) throw SingularError(k);
        for (int i = k + 1; i < n; ++i) {
            double lik = at(i, k);
            if (lik == 0.0) continue;
            lik /= piv;
            at(i, k) = lik;
            const double* urow = &at(k, k + 1);
            double* irow = &at(i, k + 1);
            for (int j = 0; j < n - k - 1; ++j) irow[j] -= lik * urow[j];
        }
    }
    g_factorizations.fetch_add(1, std::memory_order_relaxed);
    return f;
}

std::vector<double> lu_solve(const LuFactors& f, std::span<const double> b) {
    const int n = f.n;
    if (static_cast<int>(b.size()) != n)
        throw DimensionMismatchError("lu_solve: rhs length " + std::to_string(b.size()) +
                                     " for factors of dimension " + std::to_string(n));
    std::vector<double> x(b.begin(), b.end());
    for (int i = 1; i < n; ++i) {
        double s = x[i];
        const double* row = f.lu.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < i; ++j) s -= row[j] * x[j];
        x[i] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = x[i];
        const double* row = f.lu.data() + static_cast<size_t>(i) * n;
        for (int j = i + 1; j < n; ++j) s -= row[j] * x[j];
        x[i] = s / row[i];
    }
    return x;
}

// ---- Preconditioner ----

Preconditioner Preconditioner::identity(int n) {
    Preconditioner p;
    p.kind_ = Kind::Identity;
    p.n_ = n;
    return p;
}

Preconditioner Preconditioner::jacobi(std::vector<double> diagonal) {
    for (size_t i = 0; i < diagonal.size(); ++i)
        if (diagonal[i] == 0.0) throw ZeroPivotError(static_cast<int>(i));
    Preconditioner p;
    p.kind_ = Kind::Jacobi;
    p.n_ = static_cast<int>(diagonal.size());
    p.diag_ = std::move(diagonal);
    return p;
}

Preconditioner Preconditioner::full_lu(LuFactors f) {
    Preconditioner p;
    p.kind_ = Kind::FullLu;
    p.n_ = f.n;
    p.lu_ = std::make_shared<const LuFactors>(std::move(f));
    return p;
}

Preconditioner Preconditioner::ilu0(const SparseMatrix& a) {
    const int n = a.n();
    auto payload = std::make_shared<Ilu0Payload>();
    payload->row_ptr = a.row_ptr;
    payload->col_idx = a.col_idx;
    payload->values = a.values;
    payload->diag_pos.assign(n, -1);
    for (int i = 0; i < n; ++i)
        for (int k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
            if (a.col_idx[k] == i) payload->diag_pos[i] = k;

    auto& rp = payload->row_ptr;
    auto& ci = payload->col_idx;
    auto& va = payload->values;
    auto& dp = payload->diag_pos;

    // IKJ incomplete elimination restricted to the pattern of A.
    for (int i = 0; i < n; ++i) {
        if (dp[i] < 0) throw ZeroPivotError(i);
        for (int ki = rp[i]; ki < rp[i + 1]; ++ki) {
            const int k = ci[ki];
            if (k >= i) break;
            const double pivot = va[dp[k]];
            if (pivot == 0.0) throw ZeroPivotError(k);
            const double lik = va[ki] / pivot;
            va[ki] = lik;
            // subtract lik * row k from row i, only where row i has pattern
            int pi = ki + 1;
            int pk = dp[k] + 1;
            while (pi < rp[i + 1] && pk < rp[k + 1]) {
                if (ci[pi] == ci[pk]) {
                    va[pi] -= lik * va[pk];
                    ++pi;
                    ++pk;
                } else if (ci[pi] < ci[pk]) {
                    ++pi;
                } else {
                    ++pk;
                }
            }
        }
        if (va[dp[i]] == 0.0) throw ZeroPivotError(i);
    }

    Preconditioner p;
    p.kind_ = Kind::Ilu0;
    p.n_ = n;
    p.ilu_ = std::move(payload);
    g_factorizations.fetch_add(1, std::memory_order_relaxed);
    return p;
}

void Preconditioner::apply(std::span<const double> r, std::span<double> z) const {
    if (static_cast<int>(r.size()) != n_ || static_cast<int>(z.size()) != n_)
        throw DimensionMismatchError("preconditioner apply: size mismatch");
    switch (kind_) {
        case Kind::Identity:
            std::copy(r.begin(), r.end(), z.begin());
            return;
        case Kind::Jacobi:
            for (int i = 0; i < n_; ++i) z[i] = r[i] / diag_[i];
            return;
        case Kind::FullLu: {
            auto x = lu_solve(*lu_, r);
            std::copy(x.begin(), x.end(), z.begin());
            return;
        }
        case Kind::Ilu0: {
            const auto& f = *ilu_;
            // forward: (unit lower) L y = r
            for (int i = 0; i < n_; ++i) {
                double s = r[i];
                for (int k = f.row_ptr[i]; k < f.row_ptr[i + 1]; ++k) {
                    if (f.col_idx[k] >= i) break;
                    s -= f.values[k] * z[f.col_idx[k]];
                }
                z[i] = s;
            }
            // backward: U x = y
            for (int i = n_ - 1; i >= 0; --i) {
                double s = z[i];
                for (int k = f.diag_pos[i] + 1; k < f.row_ptr[i + 1]; ++k)
                    s -= f.values[k] * z[f.col_idx[k]];
                z[i] = s / f.values[f.diag_pos[i]];
            }
            return;
        }
    }
}

std::vector<double> Preconditioner::apply(std::span<const double> r) const {
    std::vector<double> z(r.size());
    apply(r, z);
    return z;
}

Preconditioner jacobi_preconditioner(const SparseMatrix& a) {
    std::vector<double> d(a.n());
    for (int i = 0; i < a.n(); ++i) {
        d[i] = a.value_at(i, i);
        if (d[i] == 0.0) throw ZeroPivotError(i);
    }
    return Preconditioner::jacobi(std::move(d));
}

Preconditioner ilu0_factor(const SparseMatrix& a) { return Preconditioner::ilu0(a); }

Preconditioner full_lu_preconditioner(const SparseMatrix& a) {
    return Preconditioner::full_lu(lu_factor(a));
}

// ---- PCG ----

CgReport pcg_solve(const LinearOperator& apply_a, std::span<const double> b,
                   std::span<const double> x0, const Preconditioner& m,
                   const CgOptions& opts) {
    const int n = static_cast<int>(b.size());
    if (static_cast<int>(x0.size()) != n || m.n() != n)
        throw DimensionMismatchError("pcg_solve: dimension mismatch");
    const int max_iter = opts.max_iter > 0 ? opts.max_iter : 2 * n;

    CgReport rep;
    rep.solution.assign(x0.begin(), x0.end());
    std::vector<double> r(n), z(n), p(n), ap(n);

    apply_a(rep.solution, ap);
    for (int i = 0; i < n; ++i) r[i] = b[i] - ap[i];

    const double target = opts.tol * norm2(b);
    double rnorm = norm2(r);
    if (rnorm <= target) {
        rep.converged = true;
        rep.final_residual_norm = rnorm;
        return rep;
    }

    m.apply(r, z);
    p = z;
    double rz = dot(r, z);

    int k = 0;
    while (k < max_iter) {
        apply_a(p, ap);
        const double pap = dot(p, ap);
        if (pap <= 0.0) {
            // stagnated direction (p ~ 0) is benign; a genuinely negative
            // curvature means the operator is not SPD
            if (pap < -1e-14 * dot(p, p))
                throw BreakdownError("pcg_solve: p'Ap = " + std::to_string(pap));
            break;
        }
        const double alpha = rz / pap;
        for (int i = 0; i < n; ++i) rep.solution[i] += alpha * p[i];
        for (int i = 0; i < n; ++i) r[i] -= alpha * ap[i];
        ++k;
        rnorm = norm2(r);
        if (opts.on_iterate) opts.on_iterate(k, rep.solution, r);
        if (rnorm <= target) break;
        m.apply(r, z);
        const double rz_next = dot(z, r);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }

    rep.iterations = k;
    rep.final_residual_norm = rnorm;
    rep.converged = rnorm <= target;
    return rep;
}

// ---- graph-form SpMV ----

double spmv_graph(const graph::PowerGraph& g, const graph::ScenarioOverlay* overlay,
                  std::span<const double> p, std::span<double> ap) {
    const int n = g.vertex_count();
    if (static_cast<int>(p.size()) != n || static_cast<int>(ap.size()) != n)
        throw DimensionMismatchError("spmv_graph: vector length " + std::to_string(p.size()) +
                                     " for graph of " + std::to_string(n) + " vertices");
    const int slack = g.slack_index();

    // Vertex sweep. Each vertex reads only previous-step values of p, so the
    // loop body is superstep-safe at any processing order; ascending order is
    // the deterministic default.
    for (int s = 0; s < n; ++s) {
        if (s == slack || (overlay && overlay->is_deenergized(s))) {
            ap[s] = p[s];
            continue;
        }
        double diag = g.vertex(s).bprime_diag;
        double acc = 0.0;
        for (const auto& [e, t] : g.neighbors(s)) {
            if (overlay && overlay->shields(e)) {
                diag -= 1.0 / g.edge(e).x;
                continue;
            }
            if (t == slack) continue;
            acc += g.edge(e).bprime_off * p[t];
        }
        ap[s] = diag * p[s] + acc;
    }

    // Global reduction after the sweep, ascending order.
    double pap = 0.0;
    for (int s = 0; s < n; ++s) pap += p[s] * ap[s];
    return pap;
}

LinearOperator bprime_operator(const graph::PowerGraph& g, const graph::ScenarioOverlay* overlay) {
    return [&g, overlay](std::span<const double> p, std::span<double> ap) {
        spmv_graph(g, overlay, p, ap);
    };
}

LinearOperator csr_operator(const SparseMatrix& a) {
    return [&a](std::span<const double> v, std::span<double> out) {
        auto r = spmv_csr(a, v);
        std::copy(r.begin(), r.end(), out.begin());
    };
}

}  // namespace gridca::linalg
