#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridca/fdpf.hpp"
#include "gridca/graph.hpp"
#include "gridca/ingest.hpp"
#include "gridca/linalg.hpp"

namespace gridca::contingency {

enum class SolverPath { Gpcg, Lud };

struct ScreeningOptions {
    fdpf::FdpfOptions fdpf;
    SolverPath path = SolverPath::Gpcg;
    /// p.u. generation floor for re-dispatch participation ("major"
    /// generators); 0 means every generating bus including the slack.
    double major_gen_threshold = 0.0;
};

/// Everything shared read-only across scenario workers: the base graph, its
/// converged solution, B' and B'' of the base case, and the preconditioners
/// factorized from them exactly once.
struct BaseCaseContext {
    ingest::NetworkModel model;
    graph::PowerGraph graph;
    fdpf::PowerFlowSolution base_solution;
    linalg::SparseMatrix bprime_base;
    linalg::SparseMatrix bdp_base;
    linalg::Preconditioner base_precond;     // from bprime_base
    linalg::Preconditioner base_precond_qv;  // from bdp_base
    ScreeningOptions opts;
    long bprime_factorizations = 0;  // instrumented; must stay 1 per run
};

/// Build graph, solve the base case (must converge), factorize once.
/// Throws BaseCaseDivergedError.
BaseCaseContext prepare_base(const ingest::NetworkModel& model, const ScreeningOptions& opts);

struct ScenarioDescriptor {
    int branch_id = 0;
    int edge = -1;
    int from_bus = 0;
    int to_bus = 0;
};

/// One descriptor per in-service branch, ascending branch id; or exactly the
/// filtered ids. Throws UnknownBranchError.
std::vector<ScenarioDescriptor> enumerate_scenarios(const BaseCaseContext& ctx,
                                                    const std::vector<int>* filter = nullptr);

/// Copy of B'_base with the outaged branch's four entries backed out
/// (A_ii -= 1/x, A_jj -= 1/x, A_ij += 1/x, A_ji += 1/x; slack rows stay
/// identity), then identity rows for deenergized vertices.
linalg::SparseMatrix patch_matrix(const linalg::SparseMatrix& bprime_base,
                                  const graph::PowerGraph& g,
                                  const graph::ScenarioOverlay& overlay);

struct RedispatchRecord {
    double island_net_injection = 0.0;  // p.u., sum of island P_is
    struct Participant {
        int vertex = -1;
        int bus_id = 0;
        double share = 0.0;    // fraction of the island injection absorbed
        double delta_p = 0.0;  // p.u. added to this vertex's P_is
        bool operator==(const Participant&) const = default;
    };
    std::vector<Participant> participants;
    int island_gen_count = 0;
    int island_load_count = 0;

    bool operator==(const RedispatchRecord&) const = default;
};

/// Proportional redistribution of the lost island injection among main-island
/// generators. Fills overlay.adjusted_p_sched; conservation: total in-service
/// scheduled P afterwards equals the original all-bus total.
/// Throws NoParticipantsError.
RedispatchRecord redispatch(const BaseCaseContext& ctx, graph::ScenarioOverlay& overlay);

struct ScenarioResult {
    int branch_id = 0;
    int from_bus = 0;
    int to_bus = 0;
    bool islanding = false;
    int deenergized_count = 0;
    std::optional<RedispatchRecord> redispatch;
    bool converged = false;
    int outer_iterations = 0;
    long cg_iterations_total = 0;
    double time_ms = 0.0;
    std::vector<fdpf::Violation> violations;
    std::string failure_reason;  // empty when the scenario screened cleanly

    bool operator==(const ScenarioResult&) const = default;
};

/// Full pipeline for one outage: overlay, islanding, re-dispatch, solve from
/// the base-case state with the base-case preconditioner, flows, violations.
/// Never throws; failures land in failure_reason.
ScenarioResult screen_scenario(const BaseCaseContext& ctx, const ScenarioDescriptor& desc);

struct Totals {
    int tested = 0;
    int converged = 0;
    int failed = 0;
    int islanding = 0;
    int lu_failures = 0;

    bool operator==(const Totals&) const = default;
};

struct ScreeningReport {
    std::string case_name;
    std::string solver;  // "gpcg" | "lud"
    Totals totals;
    double total_time_ms = 0.0;
    std::vector<ScenarioResult> scenarios;  // ascending branch id

    bool operator==(const ScreeningReport&) const = default;
};

/// Screen every scenario on worker_count threads. Results are ordered by
/// branch id regardless of scheduling; same inputs give the same report at
/// any worker count (timing fields aside).
ScreeningReport screen_all(const BaseCaseContext& ctx, int worker_count,
                           const std::vector<int>* filter = nullptr);

/// Zero every timing field, for golden-file comparisons.
void zero_times(ScreeningReport& report);

}  // namespace gridca::contingency
