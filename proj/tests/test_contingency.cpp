#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "gridca/contingency.hpp"
#include "gridca/report.hpp"
#include "oracles.hpp"

using namespace gridca;
using contingency::ScreeningOptions;
using contingency::SolverPath;

namespace {

ScreeningOptions default_opts() { return {}; }

contingency::BaseCaseContext& ctx14() {
    static auto ctx = contingency::prepare_base(oracles::load_case("ieee14.cdf"), default_opts());
    return ctx;
}

contingency::BaseCaseContext& ctx118() {
    static auto ctx = contingency::prepare_base(oracles::load_case("ieee118.cdf"), default_opts());
    return ctx;
}

double total_scheduled_p(const graph::PowerGraph& g) {
    double sum = 0.0;
    for (int v = 0; v < g.vertex_count(); ++v) sum += g.vertex(v).p_sched;
    return sum;
}

}  // namespace

TEST_CASE("prepare_base converges and factorizes exactly once") {
    const long before = linalg::factorization_count();
    auto ctx = contingency::prepare_base(oracles::load_case("ieee14.cdf"), default_opts());
    const long after_prepare = linalg::factorization_count();
    CHECK(ctx.base_solution.converged);
    CHECK(ctx.bprime_factorizations == 1);
    // one per half-iteration matrix (B' and B'')
    CHECK(after_prepare - before == 2);

    auto report = contingency::screen_all(ctx, 1);
    CHECK(linalg::factorization_count() == after_prepare);  // none per scenario
    CHECK(report.totals.tested == 20);
}

TEST_CASE("prepare_base rejects an unsolvable case") {
    auto model = ingest::parse_json_network(R"({
      "base_mva": 100,
      "buses": [
        {"id": 1, "type": "Slack"},
        {"id": 2, "type": "PQ", "p_load_mw": 1500}
      ],
      "branches": [{"from": 1, "to": 2, "x": 0.5}]
    })");
    ScreeningOptions opts;
    opts.fdpf.mismatch_tol = 1e-8;
    CHECK_THROWS_AS(contingency::prepare_base(model, opts), BaseCaseDivergedError);
}

TEST_CASE("enumerate_scenarios covers every in-service branch") {
    CHECK(contingency::enumerate_scenarios(ctx118()).size() == 186);
    CHECK(contingency::enumerate_scenarios(ctx14()).size() == 20);

    const std::vector<int> filter{5};
    auto one = contingency::enumerate_scenarios(ctx14(), &filter);
    REQUIRE(one.size() == 1);
    CHECK(one[0].branch_id == 5);
    CHECK(one[0].from_bus == 2);
    CHECK(one[0].to_bus == 5);

    const std::vector<int> unknown{999};
    CHECK_THROWS_AS(contingency::enumerate_scenarios(ctx14(), &unknown), UnknownBranchError);
}

TEST_CASE("scenario count tracks the in-service branch count") {
    // out-of-service branches keep their ordinal but produce no scenario
    auto model = oracles::load_case("ieee14.cdf");
    model.branches[4].in_service = false;
    auto ctx = contingency::prepare_base(model, default_opts());
    auto descs = contingency::enumerate_scenarios(ctx);
    CHECK(descs.size() == 19);
    CHECK(std::none_of(descs.begin(), descs.end(),
                       [](const auto& d) { return d.branch_id == 5; }));

    const std::vector<int> filter{5};
    CHECK_THROWS_AS(contingency::enumerate_scenarios(ctx, &filter), UnknownBranchError);
}

TEST_CASE("patch_matrix touches exactly four entries (one next to the slack)") {
    const auto& ctx = ctx14();
    auto count_diffs = [&](const linalg::SparseMatrix& a, const linalg::SparseMatrix& b) {
        int diffs = 0;
        for (int i = 0; i < a.n(); ++i)
            for (int j = 0; j < a.n(); ++j)
                if (std::abs(a.value_at(i, j) - b.value_at(i, j)) > 1e-13) ++diffs;
        return diffs;
    };

    // branch 4 joins buses 2-4: both endpoints non-slack
    auto mid = graph::apply_outage(ctx.graph, ctx.graph.edge_of_branch(4));
    CHECK(count_diffs(ctx.bprime_base, contingency::patch_matrix(ctx.bprime_base, ctx.graph, mid)) == 4);

    // branch 1 joins buses 1-2: bus 1 is the slack, only A_22 changes
    auto slack_adj = graph::apply_outage(ctx.graph, ctx.graph.edge_of_branch(1));
    CHECK(count_diffs(ctx.bprime_base,
                      contingency::patch_matrix(ctx.bprime_base, ctx.graph, slack_adj)) == 1);
}

TEST_CASE("redispatch spreads the island injection proportionally") {
    // island = pure 10 MW load; main generators 50 MW and 100 MW
    auto model = ingest::parse_json_network(R"({
      "base_mva": 100,
      "buses": [
        {"id": 1, "type": "Slack", "p_gen_mw": 50},
        {"id": 2, "type": "PV", "p_gen_mw": 100, "p_load_mw": 140},
        {"id": 3, "type": "PQ", "p_load_mw": 10}
      ],
      "branches": [
        {"from": 1, "to": 2, "x": 0.1},
        {"from": 2, "to": 3, "x": 0.2}
      ]
    })");
    auto ctx = contingency::prepare_base(model, default_opts());
    auto overlay = graph::apply_outage(ctx.graph, ctx.graph.edge_of_branch(2));
    REQUIRE(overlay.deenergized.size() == 1);

    const double before = total_scheduled_p(ctx.graph);
    auto rec = contingency::redispatch(ctx, overlay);
    CHECK(rec.island_net_injection == doctest::Approx(-0.1).epsilon(1e-14));
    CHECK(rec.island_gen_count == 0);
    CHECK(rec.island_load_count == 1);
    REQUIRE(rec.participants.size() == 2);

    double share_sum = 0.0, delta_sum = 0.0, adjusted_total = 0.0;
    for (const auto& p : rec.participants) {
        share_sum += p.share;
        delta_sum += p.delta_p;
    }
    CHECK(std::abs(share_sum - 1.0) < 1e-12);
    CHECK(std::abs(delta_sum - rec.island_net_injection) < 1e-12);

    const auto& p1 = *std::find_if(rec.participants.begin(), rec.participants.end(),
                                   [](const auto& p) { return p.bus_id == 1; });
    const auto& p2 = *std::find_if(rec.participants.begin(), rec.participants.end(),
                                   [](const auto& p) { return p.bus_id == 2; });
    CHECK(p1.share == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(p2.share == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    // p_gen 0.5 and 1.0 become 0.4667 and 0.9333 in schedule terms
    CHECK(overlay.adjusted_p_sched.at(ctx.graph.index_of(1)) ==
          doctest::Approx(0.5 - 0.1 / 3.0).epsilon(1e-12));

    // conservation: in-service adjusted total equals the original all-bus total
    for (int v = 0; v < ctx.graph.vertex_count(); ++v) {
        if (overlay.is_deenergized(v)) continue;
        adjusted_total += overlay.adjusted_p_sched.count(v)
                              ? overlay.adjusted_p_sched.at(v)
                              : ctx.graph.vertex(v).p_sched;
    }
    CHECK(std::abs(adjusted_total - before) < 1e-12);
}

TEST_CASE("redispatch of a balanced island moves nothing") {
    auto model = ingest::parse_json_network(R"({
      "base_mva": 100,
      "buses": [
        {"id": 1, "type": "Slack", "p_gen_mw": 10},
        {"id": 2, "type": "PV", "p_gen_mw": 20, "p_load_mw": 20},
        {"id": 3, "type": "PQ", "p_load_mw": 10}
      ],
      "branches": [
        {"from": 1, "to": 3, "x": 0.1},
        {"from": 1, "to": 2, "x": 0.2}
      ]
    })");
    auto ctx = contingency::prepare_base(model, default_opts());
    auto overlay = graph::apply_outage(ctx.graph, ctx.graph.edge_of_branch(2));
    auto rec = contingency::redispatch(ctx, overlay);
    CHECK(rec.island_net_injection == doctest::Approx(0.0));
    for (const auto& p : rec.participants) CHECK(p.delta_p == doctest::Approx(0.0));
}

TEST_CASE("redispatch of a pure generation island reduces main output") {
    auto model = ingest::parse_json_network(R"({
      "base_mva": 100,
      "buses": [
        {"id": 1, "type": "Slack", "p_gen_mw": 60},
        {"id": 2, "type": "PQ", "p_load_mw": 100},
        {"id": 3, "type": "PV", "p_gen_mw": 40}
      ],
      "branches": [
        {"from": 1, "to": 2, "x": 0.1},
        {"from": 2, "to": 3, "x": 0.2}
      ]
    })");
    auto ctx = contingency::prepare_base(model, default_opts());
    const double before = total_scheduled_p(ctx.graph);
    auto overlay = graph::apply_outage(ctx.graph, ctx.graph.edge_of_branch(2));
    auto rec = contingency::redispatch(ctx, overlay);
    CHECK(rec.island_net_injection == doctest::Approx(0.4));
    CHECK(rec.island_gen_count == 1);
    REQUIRE(rec.participants.size() == 1);
    CHECK(rec.participants[0].delta_p == doctest::Approx(0.4));

    double adjusted_total = 0.0;
    for (int v = 0; v < ctx.graph.vertex_count(); ++v) {
        if (overlay.is_deenergized(v)) continue;
        adjusted_total += overlay.adjusted_p_sched.count(v)
                              ? overlay.adjusted_p_sched.at(v)
                              : ctx.graph.vertex(v).p_sched;
    }
    CHECK(std::abs(adjusted_total - before) < 1e-12);
}

TEST_CASE("redispatch with no main-island generation raises NoParticipants") {
    auto model = ingest::parse_json_network(R"({
      "base_mva": 100,
      "buses": [
        {"id": 1, "type": "Slack"},
        {"id": 2, "type": "PV", "p_gen_mw": 30, "p_load_mw": 25}
      ],
      "branches": [{"from": 1, "to": 2, "x": 0.1}]
    })");
    auto ctx = contingency::prepare_base(model, default_opts());
    auto overlay = graph::apply_outage(ctx.graph, 0);
    CHECK_THROWS_AS(contingency::redispatch(ctx, overlay), NoParticipantsError);

    // the screening pipeline records it instead of crashing
    auto res = contingency::screen_scenario(ctx, contingency::enumerate_scenarios(ctx)[0]);
    CHECK(res.islanding);
    CHECK_FALSE(res.converged);
    CHECK(res.failure_reason.rfind("NoParticipants", 0) == 0);
}

TEST_CASE("non-islanding scenario matches the Newton oracle") {
    const auto& ctx = ctx14();
    auto descs = contingency::enumerate_scenarios(ctx);
    const auto& desc = descs[3];  // branch 4: 2-4
    auto res = contingency::screen_scenario(ctx, desc);
    REQUIRE(res.converged);
    CHECK_FALSE(res.islanding);

    auto oracle = oracles::newton_power_flow(ctx.model, desc.branch_id);
    REQUIRE(oracle.converged);

    auto overlay = graph::apply_outage(ctx.graph, desc.edge);
    fdpf::FdpfOptions opts = ctx.opts.fdpf;
    auto sol = fdpf::fdpf_solve(ctx.graph, &overlay, ctx.base_solution.state, opts,
                                {&ctx.base_precond, &ctx.base_precond_qv});
    for (size_t i = 0; i < ctx.model.buses.size(); ++i) {
        const int v = ctx.graph.index_of(ctx.model.buses[i].id);
        CHECK(std::abs(sol.state.v_mag[v] - oracle.v_mag[i]) < 2e-3);
        CHECK(std::abs(sol.state.v_ang[v] - oracle.v_ang[i]) < 2e-3);
    }

    // final flows against an independent pi-model evaluation of the oracle state
    auto flows = fdpf::branch_flows(ctx.graph, &overlay, sol.state);
    for (const auto& br : ctx.model.branches) {
        if (br.id == desc.branch_id) continue;
        size_t fi = 0, ti = 0;
        for (size_t i = 0; i < ctx.model.buses.size(); ++i) {
            if (ctx.model.buses[i].id == br.from_bus) fi = i;
            if (ctx.model.buses[i].id == br.to_bus) ti = i;
        }
        const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
        const std::complex<double> yc(0.0, br.b_charging / 2.0);
        const std::complex<double> vf = std::polar(oracle.v_mag[fi], oracle.v_ang[fi]);
        const std::complex<double> vt = std::polar(oracle.v_mag[ti], oracle.v_ang[ti]);
        const std::complex<double> inj =
            vf * std::conj((ys + yc) / (br.tap * br.tap) * vf - ys / br.tap * vt);
        CHECK(std::abs(flows[ctx.graph.edge_of_branch(br.id)].p_from - inj.real()) < 2e-3);
    }
}

TEST_CASE("islanding scenario converges with redispatch; direct path fails singular") {
    const auto& ctx = ctx14();
    auto descs = contingency::enumerate_scenarios(ctx);
    const auto leaf = std::find_if(descs.begin(), descs.end(),
                                   [](const auto& d) { return d.branch_id == 14; });
    REQUIRE(leaf != descs.end());

    auto res = contingency::screen_scenario(ctx, *leaf);
    CHECK(res.islanding);
    CHECK(res.deenergized_count == 1);
    REQUIRE(res.redispatch.has_value());
    CHECK(res.converged);
    CHECK(res.failure_reason.empty());

    ScreeningOptions lud;
    lud.path = SolverPath::Lud;
    auto lud_ctx = contingency::prepare_base(ctx.model, lud);
    auto lud_res = contingency::screen_scenario(lud_ctx, *leaf);
    CHECK(lud_res.islanding);
    CHECK_FALSE(lud_res.converged);
    CHECK(lud_res.failure_reason.rfind("SingularError", 0) == 0);
}

TEST_CASE("screen_all is deterministic across worker counts") {
    const auto& ctx = ctx118();
    auto r1 = contingency::screen_all(ctx, 1);
    auto r8 = contingency::screen_all(ctx, 8);
    contingency::zero_times(r1);
    contingency::zero_times(r8);
    CHECK(r1 == r8);
    CHECK(report::to_json(r1) == report::to_json(r8));

    auto r1b = contingency::screen_all(ctx, 1);
    contingency::zero_times(r1b);
    CHECK(report::to_json(r1) == report::to_json(r1b));
}

TEST_CASE("screen_all with an empty filter yields an empty report") {
    const std::vector<int> empty;
    auto report = contingency::screen_all(ctx14(), 2, &empty);
    CHECK(report.totals.tested == 0);
    CHECK(report.totals.converged == 0);
    CHECK(report.totals.failed == 0);
    CHECK(report.scenarios.empty());
}

TEST_CASE("full 118-bus sweep accounts for every scenario") {
    auto report = contingency::screen_all(ctx118(), 4);
    CHECK(report.totals.tested == 186);
    CHECK(report.totals.converged + report.totals.failed == 186);
    CHECK(report.totals.islanding == 9);
    CHECK(std::is_sorted(report.scenarios.begin(), report.scenarios.end(),
                         [](const auto& a, const auto& b) { return a.branch_id < b.branch_id; }));

    // redispatch conservation on every islanding scenario
    const double before = total_scheduled_p(ctx118().graph);
    for (const auto& s : report.scenarios) {
        if (!s.islanding) continue;
        REQUIRE(s.redispatch.has_value());
        double shares = 0.0;
        for (const auto& p : s.redispatch->participants) shares += p.share;
        CHECK(std::abs(shares - 1.0) < 1e-12);

        auto overlay = graph::apply_outage(ctx118().graph,
                                           ctx118().graph.edge_of_branch(s.branch_id));
        contingency::redispatch(ctx118(), overlay);
        double adjusted = 0.0;
        for (int v = 0; v < ctx118().graph.vertex_count(); ++v) {
            if (overlay.is_deenergized(v)) continue;
            adjusted += overlay.adjusted_p_sched.count(v) ? overlay.adjusted_p_sched.at(v)
                                                          : ctx118().graph.vertex(v).p_sched;
        }
        CHECK(std::abs(adjusted - before) < 1e-9);
    }
}

TEST_CASE("lud sweep fails exactly on the islanding set") {
    ScreeningOptions opts;
    opts.path = SolverPath::Lud;
    auto ctx = contingency::prepare_base(oracles::load_case("ieee118.cdf"), opts);
    auto report = contingency::screen_all(ctx, 4);
    CHECK(report.solver == "lud");
    CHECK(report.totals.tested == 186);
    CHECK(report.totals.lu_failures == report.totals.islanding);
    for (const auto& s : report.scenarios) {
        const bool singular = s.failure_reason.rfind("SingularError", 0) == 0;
        CHECK(singular == s.islanding);
    }
}
