#include "gridca/contingency.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace gridca::contingency {

using Clock = std::chrono::steady_clock;
using graph::ScenarioOverlay;
using linalg::Preconditioner;

namespace {

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Preconditioner build_precond(Preconditioner::Kind kind, const linalg::SparseMatrix& m) {
    switch (kind) {
        case Preconditioner::Kind::Identity: return Preconditioner::identity(m.n());
        case Preconditioner::Kind::Jacobi: return linalg::jacobi_preconditioner(m);
        case Preconditioner::Kind::Ilu0: return linalg::ilu0_factor(m);
        case Preconditioner::Kind::FullLu: return linalg::full_lu_preconditioner(m);
    }
    return Preconditioner::identity(m.n());
}

bool kind_factorizes(Preconditioner::Kind kind) {
    return kind == Preconditioner::Kind::Ilu0 || kind == Preconditioner::Kind::FullLu;
}

}  // namespace

BaseCaseContext prepare_base(const ingest::NetworkModel& model, const ScreeningOptions& opts) {
    BaseCaseContext ctx;
    ctx.model = model;
    ctx.opts = opts;
    if (opts.path == SolverPath::Lud) ctx.opts.fdpf.solver = fdpf::InnerSolver::DirectLu;
    ctx.graph = graph::build_graph(model);
    ctx.bprime_base = fdpf::build_bprime(ctx.graph, nullptr);
    ctx.bdp_base = fdpf::build_bdoubleprime(ctx.graph, nullptr);

    fdpf::PrecondContext precond;
    if (ctx.opts.fdpf.solver == fdpf::InnerSolver::Pcg) {
        // The one factorization of the whole screening run happens here; every
        // scenario reuses these factors as its preconditioner.
        const auto kind = ctx.opts.fdpf.cg.precond;
        ctx.base_precond = build_precond(kind, ctx.bprime_base);
        ctx.base_precond_qv = build_precond(kind, ctx.bdp_base);
        ctx.bprime_factorizations = kind_factorizes(kind) ? 1 : 0;
        precond.ptheta = &ctx.base_precond;
        precond.qv = &ctx.base_precond_qv;
    }

    try {
        ctx.base_solution = fdpf::fdpf_solve(ctx.graph, nullptr, fdpf::flat_start(ctx.graph),
                                             ctx.opts.fdpf, precond);
    } catch (const Error& e) {
        throw BaseCaseDivergedError(std::string("base case failed: ") + e.what());
    }
    if (!ctx.base_solution.converged)
        throw BaseCaseDivergedError(
            "base case did not converge within " + std::to_string(ctx.opts.fdpf.max_outer) +
            " outer iterations (max P mismatch " +
            std::to_string(ctx.base_solution.max_p_mismatch) + " p.u.)");
    return ctx;
}

std::vector<ScenarioDescriptor> enumerate_scenarios(const BaseCaseContext& ctx,
                                                    const std::vector<int>* filter) {
    std::vector<ScenarioDescriptor> out;
    const auto descriptor_for = [&](const ingest::BranchRecord& br) {
        const int e = ctx.graph.edge_of_branch(br.id);
        return ScenarioDescriptor{br.id, e, br.from_bus, br.to_bus};
    };
    if (!filter) {
        for (const auto& br : ctx.model.branches)
            if (br.in_service) out.push_back(descriptor_for(br));
        std::sort(out.begin(), out.end(),
                  [](const auto& a, const auto& b) { return a.branch_id < b.branch_id; });
        return out;
    }
    for (int id : *filter) {
        const auto it = std::find_if(ctx.model.branches.begin(), ctx.model.branches.end(),
                                     [&](const auto& br) { return br.id == id; });
        if (it == ctx.model.branches.end() || !it->in_service || ctx.graph.edge_of_branch(id) < 0)
            throw UnknownBranchError(id);
        out.push_back(descriptor_for(*it));
    }
    return out;
}

linalg::SparseMatrix patch_matrix(const linalg::SparseMatrix& bprime_base,
                                  const graph::PowerGraph& g, const ScenarioOverlay& overlay) {
    linalg::SparseMatrix m = bprime_base;
    const int slack = g.slack_index();
    if (overlay.outaged_edge >= 0) {
        const auto& e = g.edge(overlay.outaged_edge);
        const double w = 1.0 / e.x;
        const int i = e.from_v;
        const int j = e.to_v;
        if (i != slack) *m.find(i, i) -= w;
        if (j != slack) *m.find(j, j) -= w;
        if (i != slack && j != slack) {
            *m.find(i, j) += w;
            *m.find(j, i) += w;
        }
    }
    for (int d : overlay.deenergized) {
        for (int k = m.row_ptr[d]; k < m.row_ptr[d + 1]; ++k)
            m.values[k] = m.col_idx[k] == d ? 1.0 : 0.0;
        for (const auto& [e, t] : g.neighbors(d)) {
            (void)e;
            if (double* p = m.find(t, d)) *p = 0.0;
        }
    }
    return m;
}

RedispatchRecord redispatch(const BaseCaseContext& ctx, ScenarioOverlay& overlay) {
    const auto& g = ctx.graph;
    RedispatchRecord rec;
    for (int v : overlay.deenergized) {
        const auto& a = g.vertex(v);
        rec.island_net_injection += a.p_sched;
        if (a.p_gen > 0.0) rec.island_gen_count++;
        if (a.p_gen - a.p_sched > 0.0) rec.island_load_count++;  // p_load = p_gen - p_sched
    }

    double total_gen = 0.0;
    std::vector<int> participants;
    for (int v = 0; v < g.vertex_count(); ++v) {
        if (overlay.is_deenergized(v)) continue;
        const double pg = g.vertex(v).p_gen;
        if (pg > ctx.opts.major_gen_threshold) {
            participants.push_back(v);
            total_gen += pg;
        }
    }
    if (participants.empty() || total_gen <= 0.0) throw NoParticipantsError();

    for (int v : participants) {
        const auto& a = g.vertex(v);
        const double share = a.p_gen / total_gen;
        const double delta = rec.island_net_injection * share;
        overlay.adjusted_p_sched[v] = a.p_sched + delta;
        rec.participants.push_back({v, a.external_id, share, delta});
    }
    return rec;
}

ScenarioResult screen_scenario(const BaseCaseContext& ctx, const ScenarioDescriptor& desc) {
    const auto t0 = Clock::now();
    ScenarioResult res;
    res.branch_id = desc.branch_id;
    res.from_bus = desc.from_bus;
    res.to_bus = desc.to_bus;

    try {
        ScenarioOverlay overlay = graph::apply_outage(ctx.graph, desc.edge);
        res.islanding = !overlay.deenergized.empty();
        res.deenergized_count = static_cast<int>(overlay.deenergized.size());

        fdpf::PrecondContext precond;
        if (ctx.opts.path == SolverPath::Gpcg) {
            if (res.islanding) res.redispatch = redispatch(ctx, overlay);
            precond.ptheta = &ctx.base_precond;
            precond.qv = &ctx.base_precond_qv;
        } else {
            // Reference direct path: no islanding handling, fresh factors per
            // scenario. Islanded coefficient matrices stay singular and
            // surface as SingularError.
            overlay.deenergized.clear();
            overlay.adjusted_p_sched.clear();
        }

        const auto sol = fdpf::fdpf_solve(ctx.graph, &overlay, ctx.base_solution.state,
                                          ctx.opts.fdpf, precond);
        res.converged = sol.converged;
        res.outer_iterations = sol.outer_iterations;
        res.cg_iterations_total = sol.total_cg_iterations;
        if (!sol.converged)
            res.failure_reason = "NotConverged: max mismatch " +
                                 std::to_string(std::max(sol.max_p_mismatch, sol.max_q_mismatch)) +
                                 " p.u. after " + std::to_string(sol.outer_iterations) +
                                 " outer iterations";
        const auto flows = fdpf::branch_flows(ctx.graph, &overlay, sol.state);
        res.violations = fdpf::check_violations(flows, ctx.graph);
    } catch (const SingularError& e) {
        res.failure_reason = std::string("SingularError: ") + e.what();
    } catch (const NoParticipantsError& e) {
        res.failure_reason = std::string("NoParticipants: ") + e.what();
    } catch (const DivergedError& e) {
        res.failure_reason = std::string("Diverged: ") + e.what();
    } catch (const Error& e) {
        res.failure_reason = std::string("Error: ") + e.what();
    }

    res.time_ms = elapsed_ms(t0);
    return res;
}

ScreeningReport screen_all(const BaseCaseContext& ctx, int worker_count,
                           const std::vector<int>* filter) {
    const auto t0 = Clock::now();
    const auto descriptors = enumerate_scenarios(ctx, filter);

    std::vector<ScenarioResult> results(descriptors.size());
    std::atomic<size_t> next{0};
    const auto work = [&] {
        for (size_t i; (i = next.fetch_add(1)) < descriptors.size();)
            results[i] = screen_scenario(ctx, descriptors[i]);
    };
    if (worker_count <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(worker_count);
        for (int k = 0; k < worker_count; ++k) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    ScreeningReport report;
    report.case_name = ctx.model.case_name;
    report.solver = ctx.opts.path == SolverPath::Gpcg ? "gpcg" : "lud";
    std::sort(results.begin(), results.end(),
              [](const ScenarioResult& a, const ScenarioResult& b) {
                  return a.branch_id < b.branch_id;
              });
    for (auto& r : results) {
        report.totals.tested++;
        if (r.converged) report.totals.converged++;
        else report.totals.failed++;
        if (r.islanding) report.totals.islanding++;
        if (r.failure_reason.rfind("SingularError", 0) == 0) report.totals.lu_failures++;
    }
    report.scenarios = std::move(results);
    report.total_time_ms = elapsed_ms(t0);
    return report;
}

void zero_times(ScreeningReport& report) {
    report.total_time_ms = 0.0;
    for (auto& s : report.scenarios) s.time_ms = 0.0;
}

}  // namespace gridca::contingency
