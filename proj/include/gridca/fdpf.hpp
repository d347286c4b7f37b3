#pragma once

#include <functional>
#include <span>
#include <vector>

#include "gridca/graph.hpp"
#include "gridca/linalg.hpp"

namespace gridca::fdpf {

struct SystemState {
    std::vector<double> v_mag;  // p.u.
    std::vector<double> v_ang;  // rad
};

/// PQ magnitudes at 1.0, PV/slack magnitudes at their input set-points,
/// all angles 0 except the slack pinned at its input angle.
SystemState flat_start(const graph::PowerGraph& g);

/// The solved values recorded in the input (base-case state).
SystemState recorded_state(const graph::PowerGraph& g);

enum class Mode { FullFdpf, QuickPTheta };
enum class InnerSolver { Pcg, DirectLu };

struct CgConfig {
    double tol = 1e-8;
    int max_iter = 0;  // 0 means 2n
    linalg::Preconditioner::Kind precond = linalg::Preconditioner::Kind::FullLu;
};

/// Observation hook for one inner linear solve, used by the oracle tests to
/// replay each correction against an independent direct solve.
struct InnerSolveTrace {
    enum class Half { PTheta, QV } half;
    int outer;
    std::span<const double> rhs;    // mismatch / |V|
    std::span<const double> delta;  // solver output
    int cg_iterations;
};

struct FdpfOptions {
    double mismatch_tol = 1e-3;  // p.u.
    int max_outer = 50;
    Mode mode = Mode::FullFdpf;
    InnerSolver solver = InnerSolver::Pcg;
    CgConfig cg;
    std::function<void(const InnerSolveTrace&)> trace;
};

/// Preconditioners supplied by the screening context (base-case factors).
/// Null members make fdpf_solve build its own from the scenario matrices.
struct PrecondContext {
    const linalg::Preconditioner* ptheta = nullptr;
    const linalg::Preconditioner* qv = nullptr;
};

struct PowerFlowSolution {
    SystemState state;
    bool converged = false;
    int outer_iterations = 0;        // completed P/Q iteration pairs
    long total_cg_iterations = 0;
    double max_p_mismatch = 0.0;     // p.u., at the returned state
    double max_q_mismatch = 0.0;
};

/// Per-vertex active power balance: dP_i = P_is - P_i_line - |V_i|^2 G_ii,
/// with P_i_line accumulated over in-service, non-shielded incident edges.
/// Slack and deenergized vertices report 0. Uses the overlay's adjusted
/// schedule when present. Overlay may be null.
std::vector<double> compute_p_mismatch(const graph::PowerGraph& g,
                                       const graph::ScenarioOverlay* overlay,
                                       const SystemState& state);

/// Reactive mirror; PV, slack and deenergized vertices report 0.
std::vector<double> compute_q_mismatch(const graph::PowerGraph& g,
                                       const graph::ScenarioOverlay* overlay,
                                       const SystemState& state);

/// XB-scheme B': off-diagonal -1/x, diagonal sum of 1/x, identity rows for
/// the slack and deenergized vertices. Symmetric positive definite on its
/// non-identity block for connected energized networks.
linalg::SparseMatrix build_bprime(const graph::PowerGraph& g,
                                  const graph::ScenarioOverlay* overlay);

/// B'' = -imag(Ybus) with identity rows for slack, PV and deenergized
/// vertices, symmetrized as (B+B')/2. max_asymmetry, when given, receives the
/// largest |B_ij - B_ji| folded away (0 for real turns ratios).
linalg::SparseMatrix build_bdoubleprime(const graph::PowerGraph& g,
                                        const graph::ScenarioOverlay* overlay,
                                        double* max_asymmetry = nullptr);

/// Fast-decoupled outer loop: alternate B' dtheta = dP/V and (in FullFdpf)
/// B'' dV = dQ/V until both mismatches are within tol. QuickPTheta skips the
/// Q-V half and divides by the initial (base-case) magnitudes. Throws
/// DivergedError when the mismatch grows past 10x its best value; propagates
/// solver errors.
PowerFlowSolution fdpf_solve(const graph::PowerGraph& g,
                             const graph::ScenarioOverlay* overlay,
                             const SystemState& initial, const FdpfOptions& opts,
                             const PrecondContext& precond = {});

struct BranchFlow {
    double p_from = 0.0, q_from = 0.0;
    double p_to = 0.0, q_to = 0.0;
};

/// Standard pi-model sending/receiving-end flows per edge (p.u.). The
/// shielded edge and edges touching deenergized vertices report zero.
std::vector<BranchFlow> branch_flows(const graph::PowerGraph& g,
                                     const graph::ScenarioOverlay* overlay,
                                     const SystemState& state);

struct Violation {
    int edge = -1;
    int branch_id = 0;
    double flow_pu = 0.0;
    double limit_pu = 0.0;
    double percent = 0.0;

    bool operator==(const Violation&) const = default;
};

/// Rated in-service edges where max(|P_from|, |P_to|) exceeds the limit,
/// sorted by percent descending.
std::vector<Violation> check_violations(std::span<const BranchFlow> flows,
                                        const graph::PowerGraph& g);

}  // namespace gridca::fdpf
