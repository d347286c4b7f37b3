#include "gridca/fdpf.hpp"

#include <algorithm>
#include <cmath>

namespace gridca::fdpf {

using graph::PowerGraph;
using graph::ScenarioOverlay;
using ingest::BusType;
using linalg::SparseMatrix;

SystemState flat_start(const PowerGraph& g) {
    SystemState s;
    s.v_mag.resize(g.vertex_count());
    s.v_ang.assign(g.vertex_count(), 0.0);
    for (int v = 0; v < g.vertex_count(); ++v) {
        const auto& a = g.vertex(v);
        s.v_mag[v] = a.bus_type == BusType::PQ ? 1.0 : a.v_mag;
        if (a.bus_type == BusType::Slack) s.v_ang[v] = a.v_ang;
    }
    return s;
}

SystemState recorded_state(const PowerGraph& g) {
    SystemState s;
    s.v_mag.resize(g.vertex_count());
    s.v_ang.resize(g.vertex_count());
    for (int v = 0; v < g.vertex_count(); ++v) {
        s.v_mag[v] = g.vertex(v).v_mag;
        s.v_ang[v] = g.vertex(v).v_ang;
    }
    return s;
}

namespace {

void check_state(const PowerGraph& g, const SystemState& state) {
    if (static_cast<int>(state.v_mag.size()) != g.vertex_count() ||
        static_cast<int>(state.v_ang.size()) != g.vertex_count())
        throw DimensionMismatchError("state dimensioned " + std::to_string(state.v_mag.size()) +
                                     " for graph of " + std::to_string(g.vertex_count()) +
                                     " vertices");
}

double scheduled_p(const PowerGraph& g, const ScenarioOverlay* overlay, int v) {
    if (overlay) {
        auto it = overlay->adjusted_p_sched.find(v);
        if (it != overlay->adjusted_p_sched.end()) return it->second;
    }
    return g.vertex(v).p_sched;
}

}  // namespace

std::vector<double> compute_p_mismatch(const PowerGraph& g, const ScenarioOverlay* overlay,
                                       const SystemState& state) {
    check_state(g, state);
    const int n = g.vertex_count();
    std::vector<double> dp(n, 0.0);
    for (int i = 0; i < n; ++i) {
        if (i == g.slack_index() || (overlay && overlay->is_deenergized(i))) continue;
        const auto& vi = g.vertex(i);
        double g_ii = vi.g_self;
        double p_line = 0.0;
        for (const auto& [e, j] : g.neighbors(i)) {
            const auto& ea = g.edge(e);
            if (overlay && overlay->shields(e)) {
                g_ii -= (i == ea.from_v) ? ea.g_diag_from : ea.g_diag_to;
                continue;
            }
            const double theta = state.v_ang[i] - state.v_ang[j];
            p_line += state.v_mag[j] *
                      (ea.g_series * std::cos(theta) + ea.b_series * std::sin(theta));
        }
        p_line *= state.v_mag[i];
        dp[i] = scheduled_p(g, overlay, i) - p_line - state.v_mag[i] * state.v_mag[i] * g_ii;
    }
    return dp;
}

std::vector<double> compute_q_mismatch(const PowerGraph& g, const ScenarioOverlay* overlay,
                                       const SystemState& state) {
    check_state(g, state);
    const int n = g.vertex_count();
    std::vector<double> dq(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const auto& vi = g.vertex(i);
        if (vi.bus_type != BusType::PQ || (overlay && overlay->is_deenergized(i))) continue;
        double b_ii = vi.b_self;
        double q_line = 0.0;
        for (const auto& [e, j] : g.neighbors(i)) {
            const auto& ea = g.edge(e);
            if (overlay && overlay->shields(e)) {
                b_ii -= (i == ea.from_v) ? ea.b_diag_from : ea.b_diag_to;
                continue;
            }
            const double theta = state.v_ang[i] - state.v_ang[j];
            q_line += state.v_mag[j] *
                      (ea.g_series * std::sin(theta) - ea.b_series * std::cos(theta));
        }
        q_line *= state.v_mag[i];
        dq[i] = vi.q_sched - q_line + state.v_mag[i] * state.v_mag[i] * b_ii;
    }
    return dq;
}

SparseMatrix build_bprime(const PowerGraph& g, const ScenarioOverlay* overlay) {
    const int n = g.vertex_count();
    const int slack = g.slack_index();
    const auto identity_row = [&](int v) {
        return v == slack || (overlay && overlay->is_deenergized(v));
    };
    std::vector<linalg::Triplet> trip;
    trip.reserve(n + 2 * g.edge_count());
    for (int v = 0; v < n; ++v) {
        if (identity_row(v)) {
            trip.push_back({v, v, 1.0});
            continue;
        }
        double diag = g.vertex(v).bprime_diag;
        for (const auto& [e, t] : g.neighbors(v)) {
            if (overlay && overlay->shields(e)) {
                diag -= 1.0 / g.edge(e).x;
                continue;
            }
            if (identity_row(t)) continue;
            trip.push_back({v, t, g.edge(e).bprime_off});
        }
        trip.push_back({v, v, diag});
    }
    return SparseMatrix::from_triplets(n, std::move(trip));
}

SparseMatrix build_bdoubleprime(const PowerGraph& g, const ScenarioOverlay* overlay,
                                double* max_asymmetry) {
    const int n = g.vertex_count();
    const auto identity_row = [&](int v) {
        return g.vertex(v).bus_type != BusType::PQ || (overlay && overlay->is_deenergized(v));
    };
    // Real turns ratios give Y_ft = Y_tf exactly, so the (B+B')/2 fold is a
    // no-op; the diagnostic stays 0 unless that ever changes.
    if (max_asymmetry) *max_asymmetry = 0.0;
    std::vector<linalg::Triplet> trip;
    trip.reserve(n + 2 * g.edge_count());
    for (int v = 0; v < n; ++v) {
        if (identity_row(v)) {
            trip.push_back({v, v, 1.0});
            continue;
        }
        double b_vv = g.vertex(v).b_self;
        for (const auto& [e, t] : g.neighbors(v)) {
            const auto& ea = g.edge(e);
            if (overlay && overlay->shields(e)) {
                b_vv -= (v == ea.from_v) ? ea.b_diag_from : ea.b_diag_to;
                continue;
            }
            if (identity_row(t)) continue;
            trip.push_back({v, t, -ea.b_series});
        }
        trip.push_back({v, v, -b_vv});
    }
    return SparseMatrix::from_triplets(n, std::move(trip));
}

namespace {

struct InnerSolveResult {
    std::vector<double> delta;
    int cg_iterations = 0;
};

/// One half-iteration linear solve, PCG or direct, built lazily so B'' and
/// its factors only exist when the Q-V half runs.
class HalfSystem {
public:
    HalfSystem(const PowerGraph& g, const ScenarioOverlay* overlay, const FdpfOptions& opts,
               InnerSolveTrace::Half half, const linalg::Preconditioner* supplied)
        : g_(g), overlay_(overlay), opts_(opts), half_(half), supplied_(supplied) {}

    InnerSolveResult solve(std::span<const double> rhs) {
        prepare();
        InnerSolveResult out;
        if (opts_.solver == InnerSolver::DirectLu) {
            out.delta = linalg::lu_solve(factors_, rhs);
            return out;
        }
        linalg::CgOptions cg;
        cg.tol = opts_.cg.tol;
        cg.max_iter = opts_.cg.max_iter;
        const std::vector<double> x0(rhs.size(), 0.0);
        auto rep = linalg::pcg_solve(op_, rhs, x0, *precond_, cg);
        out.delta = std::move(rep.solution);
        out.cg_iterations = rep.iterations;
        return out;
    }

private:
    void prepare() {
        if (ready_) return;
        ready_ = true;
        const bool ptheta = half_ == InnerSolveTrace::Half::PTheta;
        if (opts_.solver == InnerSolver::DirectLu) {
            matrix_ = ptheta ? build_bprime(g_, overlay_) : build_bdoubleprime(g_, overlay_);
            factors_ = linalg::lu_factor(matrix_);
            return;
        }
        if (ptheta) {
            op_ = linalg::bprime_operator(g_, overlay_);
        } else {
            matrix_ = build_bdoubleprime(g_, overlay_);
            op_ = linalg::csr_operator(matrix_);
        }
        if (supplied_) {
            precond_ = supplied_;
            return;
        }
        using Kind = linalg::Preconditioner::Kind;
        switch (opts_.cg.precond) {
            case Kind::Identity:
                owned_ = linalg::Preconditioner::identity(g_.vertex_count());
                break;
            case Kind::Jacobi:
                owned_ = linalg::Preconditioner::jacobi(patched_diagonal(ptheta));
                break;
            case Kind::Ilu0:
                owned_ = linalg::ilu0_factor(ptheta ? build_bprime(g_, overlay_) : matrix_);
                break;
            case Kind::FullLu:
                owned_ = linalg::full_lu_preconditioner(ptheta ? build_bprime(g_, overlay_)
                                                               : matrix_);
                break;
        }
        precond_ = &owned_;
    }

    // Scenario-local diagonal (the vertex attribute the graph-form algorithm
    // divides by), with shielded-edge corrections.
    std::vector<double> patched_diagonal(bool ptheta) {
        const int n = g_.vertex_count();
        std::vector<double> d(n, 1.0);
        for (int v = 0; v < n; ++v) {
            const bool identity =
                (ptheta ? v == g_.slack_index()
                        : g_.vertex(v).bus_type != BusType::PQ) ||
                (overlay_ && overlay_->is_deenergized(v));
            if (identity) continue;
            double diag = ptheta ? g_.vertex(v).bprime_diag : -g_.vertex(v).b_self;
            if (overlay_ && overlay_->outaged_edge >= 0) {
                const auto& ea = g_.edge(overlay_->outaged_edge);
                if (ea.from_v == v)
                    diag -= ptheta ? 1.0 / ea.x : -ea.b_diag_from;
                else if (ea.to_v == v)
                    diag -= ptheta ? 1.0 / ea.x : -ea.b_diag_to;
            }
            d[v] = diag;
        }
        return d;
    }

    const PowerGraph& g_;
    const ScenarioOverlay* overlay_;
    const FdpfOptions& opts_;
    InnerSolveTrace::Half half_;
    const linalg::Preconditioner* supplied_;
    bool ready_ = false;
    SparseMatrix matrix_;
    linalg::LuFactors factors_;
    linalg::LinearOperator op_;
    linalg::Preconditioner owned_;
    const linalg::Preconditioner* precond_ = nullptr;
};

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

PowerFlowSolution fdpf_solve(const PowerGraph& g, const ScenarioOverlay* overlay,
                             const SystemState& initial, const FdpfOptions& opts,
                             const PrecondContext& precond) {
    check_state(g, initial);
    const int n = g.vertex_count();
    const bool full = opts.mode == Mode::FullFdpf;

    PowerFlowSolution sol;
    sol.state = initial;
    if (overlay)
        for (int v : overlay->deenergized) {
            sol.state.v_mag[v] = 1.0;
            sol.state.v_ang[v] = 0.0;
        }

    // Quick screening divides by the initial (base-case) magnitudes.
    const std::vector<double> v_base = sol.state.v_mag;

    HalfSystem ptheta(g, overlay, opts, InnerSolveTrace::Half::PTheta, precond.ptheta);
    HalfSystem qv(g, overlay, opts, InnerSolveTrace::Half::QV, precond.qv);

    std::vector<double> rhs(n);
    double best = 0.0;
    bool have_best = false;

    for (int outer = 0; outer < opts.max_outer; ++outer) {
        auto dp = compute_p_mismatch(g, overlay, sol.state);
        sol.max_p_mismatch = max_abs(dp);
        if (full) {
            auto dq = compute_q_mismatch(g, overlay, sol.state);
            sol.max_q_mismatch = max_abs(dq);
        }
        const double cur = std::max(sol.max_p_mismatch, full ? sol.max_q_mismatch : 0.0);
        if (cur <= opts.mismatch_tol) {
            sol.converged = true;
            return sol;
        }
        if (have_best && cur > 10.0 * best)
            throw DivergedError("mismatch " + std::to_string(cur) + " p.u. grew past 10x its best " +
                                std::to_string(best));
        best = have_best ? std::min(best, cur) : cur;
        have_best = true;

        for (int v = 0; v < n; ++v) {
            const bool skip = v == g.slack_index() || (overlay && overlay->is_deenergized(v));
            rhs[v] = skip ? 0.0 : dp[v] / (full ? sol.state.v_mag[v] : v_base[v]);
        }
        auto step = ptheta.solve(rhs);
        sol.total_cg_iterations += step.cg_iterations;
        if (opts.trace)
            opts.trace({InnerSolveTrace::Half::PTheta, outer, rhs, step.delta, step.cg_iterations});
        for (int v = 0; v < n; ++v) sol.state.v_ang[v] += step.delta[v];

        if (full) {
            auto dq = compute_q_mismatch(g, overlay, sol.state);
            for (int v = 0; v < n; ++v) {
                const bool skip = g.vertex(v).bus_type != BusType::PQ ||
                                  (overlay && overlay->is_deenergized(v));
                rhs[v] = skip ? 0.0 : dq[v] / sol.state.v_mag[v];
            }
            auto vstep = qv.solve(rhs);
            sol.total_cg_iterations += vstep.cg_iterations;
            if (opts.trace)
                opts.trace({InnerSolveTrace::Half::QV, outer, rhs, vstep.delta,
                            vstep.cg_iterations});
            for (int v = 0; v < n; ++v) sol.state.v_mag[v] += vstep.delta[v];
        }
        sol.outer_iterations = outer + 1;
    }

    // Out of outer iterations: report the mismatches of the state we return.
    sol.max_p_mismatch = max_abs(compute_p_mismatch(g, overlay, sol.state));
    if (full) sol.max_q_mismatch = max_abs(compute_q_mismatch(g, overlay, sol.state));
    sol.converged = sol.max_p_mismatch <= opts.mismatch_tol &&
                    (!full || sol.max_q_mismatch <= opts.mismatch_tol);
    return sol;
}

std::vector<BranchFlow> branch_flows(const PowerGraph& g, const ScenarioOverlay* overlay,
                                     const SystemState& state) {
    check_state(g, state);
    std::vector<BranchFlow> flows(g.edge_count());
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto& ea = g.edge(e);
        if (!ea.in_service || (overlay && overlay->shields(e))) continue;
        if (overlay &&
            (overlay->is_deenergized(ea.from_v) || overlay->is_deenergized(ea.to_v)))
            continue;
        const double vf = state.v_mag[ea.from_v];
        const double vt = state.v_mag[ea.to_v];
        const double theta = state.v_ang[ea.from_v] - state.v_ang[ea.to_v];
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        BranchFlow& f = flows[e];
        f.p_from = vf * vf * ea.g_diag_from + vf * vt * (ea.g_series * c + ea.b_series * s);
        f.q_from = -vf * vf * ea.b_diag_from + vf * vt * (ea.g_series * s - ea.b_series * c);
        f.p_to = vt * vt * ea.g_diag_to + vt * vf * (ea.g_series * c - ea.b_series * s);
        f.q_to = -vt * vt * ea.b_diag_to + vt * vf * (-ea.g_series * s - ea.b_series * c);
    }
    return flows;
}

std::vector<Violation> check_violations(std::span<const BranchFlow> flows, const PowerGraph& g) {
    std::vector<Violation> out;
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto& ea = g.edge(e);
        if (!ea.in_service || ea.rating <= 0.0) continue;
        const double flow = std::max(std::abs(flows[e].p_from), std::abs(flows[e].p_to));
        if (flow > ea.rating)
            out.push_back({e, ea.branch_id, flow, ea.rating, 100.0 * flow / ea.rating});
    }
    std::sort(out.begin(), out.end(), [](const Violation& a, const Violation& b) {
        if (a.percent != b.percent) return a.percent > b.percent;
        return a.edge < b.edge;
    });
    return out;
}

}  // namespace gridca::fdpf
