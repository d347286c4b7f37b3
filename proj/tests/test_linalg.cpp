#include <doctest.h>

#include <cmath>
#include <random>

#include "gridca/fdpf.hpp"
#include "gridca/graph.hpp"
#include "gridca/linalg.hpp"
#include "oracles.hpp"

using namespace gridca;
using linalg::SparseMatrix;
using linalg::Triplet;

namespace {

SparseMatrix small(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<Triplet> trip;
    int i = 0;
    for (const auto& row : rows) {
        int j = 0;
        for (double v : row) {
            if (v != 0.0) trip.push_back({i, j, v});
            ++j;
        }
        ++i;
    }
    return SparseMatrix::from_triplets(static_cast<int>(rows.size()), std::move(trip));
}

SparseMatrix identity_matrix(int n) {
    std::vector<Triplet> trip;
    for (int i = 0; i < n; ++i) trip.push_back({i, i, 1.0});
    return SparseMatrix::from_triplets(n, std::move(trip));
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("from_triplets sorts columns and sums duplicates") {
    auto m = SparseMatrix::from_triplets(2, {{0, 1, 2.0}, {0, 0, 1.0}, {0, 1, 3.0}, {1, 1, 4.0}});
    CHECK(m.n() == 2);
    CHECK(m.nnz() == 3);
    CHECK(m.value_at(0, 0) == 1.0);
    CHECK(m.value_at(0, 1) == 5.0);
    CHECK(m.value_at(1, 1) == 4.0);
    CHECK(m.value_at(1, 0) == 0.0);
    CHECK(m.find(1, 0) == nullptr);
}

TEST_CASE("spmv_csr identity and row sums") {
    auto eye = identity_matrix(3);
    std::vector<double> v{1.5, -2.0, 3.25};
    CHECK(linalg::spmv_csr(eye, v) == v);

    auto m = small({{2, -1}, {-1, 2}});
    auto r = linalg::spmv_csr(m, std::vector<double>{1.0, 1.0});
    CHECK(r[0] == doctest::Approx(1.0));
    CHECK(r[1] == doctest::Approx(1.0));

    CHECK_THROWS_AS(linalg::spmv_csr(m, std::vector<double>{1.0}), DimensionMismatchError);
}

TEST_CASE("spmv_csr matches dense oracle on random SPD") {
    std::mt19937 rng(1234);
    auto sys = oracles::random_spd(50, rng);
    for (int t = 0; t < 10; ++t) {
        auto v = oracles::random_vector(50, rng);
        auto ours = linalg::spmv_csr(sys.csr, v);
        auto ref = oracles::dense_mul(sys.dense, v);
        for (int i = 0; i < 50; ++i) CHECK(ours[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("lu_factor identity and 2x2 direct inversion") {
    auto f = linalg::lu_factor(identity_matrix(4));
    std::vector<double> b{1, 2, 3, 4};
    CHECK(linalg::lu_solve(f, b) == b);

    auto m = small({{4, 1}, {1, 3}});
    auto x = linalg::lu_solve(linalg::lu_factor(m), std::vector<double>{1.0, 2.0});
    CHECK(x[0] == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
    CHECK(x[1] == doctest::Approx(7.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("lu_solve matches dense oracle on 100 random systems") {
    std::mt19937 rng(77);
    for (int t = 0; t < 100; ++t) {
        const int n = 2 + static_cast<int>(rng() % 49);
        auto sys = oracles::random_spd(n, rng);
        auto b = oracles::random_vector(n, rng);
        auto ours = linalg::lu_solve(linalg::lu_factor(sys.csr), b);
        auto ref = oracles::dense_solve(sys.dense, b);
        for (int i = 0; i < n; ++i) CHECK(std::abs(ours[i] - ref[i]) < 1e-10);
    }
}

TEST_CASE("islanded unregularized B' is singular") {
    // chain slack-2-3 with the 2-3 edge removed but no identity rows: the
    // trailing 1x1 block is a floating Laplacian
    auto m = small({{1, 0, 0}, {0, 10, 0}, {0, 0, 0}});
    CHECK_THROWS_AS(linalg::lu_factor(m), SingularError);
    try {
        linalg::lu_factor(m);
    } catch (const SingularError& e) {
        CHECK(e.pivot_row == 2);
    }
}

TEST_CASE("jacobi preconditioner") {
    auto m = small({{4, 0}, {0, 3}});
    auto p = linalg::jacobi_preconditioner(m);
    auto z = p.apply(std::vector<double>{4.0, 3.0});
    CHECK(z[0] == 1.0);
    CHECK(z[1] == 1.0);

    auto id = linalg::jacobi_preconditioner(identity_matrix(3));
    std::vector<double> r{0.5, -1.0, 2.0};
    CHECK(id.apply(r) == r);

    std::mt19937 rng(5);
    auto sys = oracles::random_spd(20, rng);
    auto pj = linalg::jacobi_preconditioner(sys.csr);
    auto rv = oracles::random_vector(20, rng);
    auto zv = pj.apply(rv);
    for (int i = 0; i < 20; ++i)
        CHECK(zv[i] == doctest::Approx(rv[i] / sys.dense[i][i]).epsilon(1e-15));

    CHECK_THROWS_AS(linalg::jacobi_preconditioner(small({{1, 1}, {1, 0}})), ZeroPivotError);
}

TEST_CASE("ilu0 on a diagonal matrix is the exact inverse") {
    auto m = small({{2, 0, 0}, {0, 5, 0}, {0, 0, 0.25}});
    auto p = linalg::ilu0_factor(m);
    auto z = p.apply(std::vector<double>{2.0, 10.0, 1.0});
    CHECK(z[0] == doctest::Approx(1.0));
    CHECK(z[1] == doctest::Approx(2.0));
    CHECK(z[2] == doctest::Approx(4.0));
}

TEST_CASE("ilu0 equals full LU when the pattern admits no fill") {
    // tridiagonal SPD: elimination creates no entries outside the pattern
    auto m = small({{4, -1, 0, 0}, {-1, 4, -1, 0}, {0, -1, 4, -1}, {0, 0, -1, 4}});
    auto ilu = linalg::ilu0_factor(m);
    auto lu = linalg::full_lu_preconditioner(m);
    std::mt19937 rng(9);
    for (int t = 0; t < 5; ++t) {
        auto r = oracles::random_vector(4, rng);
        auto zi = ilu.apply(r);
        auto zl = lu.apply(r);
        for (int i = 0; i < 4; ++i) CHECK(zi[i] == doctest::Approx(zl[i]).epsilon(1e-13));
    }
}

TEST_CASE("ilu0 preconditioning beats identity on the 14-bus base solve") {
    auto model = oracles::load_case("ieee14.cdf");
    auto g = graph::build_graph(model);
    auto bp = fdpf::build_bprime(g, nullptr);
    auto dp = fdpf::compute_p_mismatch(g, nullptr, fdpf::flat_start(g));
    std::vector<double> x0(bp.n(), 0.0);

    auto op = linalg::csr_operator(bp);
    auto rep_id = linalg::pcg_solve(op, dp, x0, linalg::Preconditioner::identity(bp.n()));
    auto rep_ilu = linalg::pcg_solve(op, dp, x0, linalg::ilu0_factor(bp));
    CHECK(rep_id.converged);
    CHECK(rep_ilu.converged);
    CHECK(rep_ilu.iterations < rep_id.iterations);
}

TEST_CASE("preconditioner apply is linear for all four kinds") {
    std::mt19937 rng(31);
    auto sys = oracles::random_spd(15, rng);
    const std::vector<linalg::Preconditioner> kinds = {
        linalg::Preconditioner::identity(15),
        linalg::jacobi_preconditioner(sys.csr),
        linalg::ilu0_factor(sys.csr),
        linalg::full_lu_preconditioner(sys.csr),
    };
    auto r = oracles::random_vector(15, rng);
    auto s = oracles::random_vector(15, rng);
    const double a = 2.75;
    for (const auto& m : kinds) {
        std::vector<double> mix(15);
        for (int i = 0; i < 15; ++i) mix[i] = a * r[i] + s[i];
        auto lhs = m.apply(mix);
        auto zr = m.apply(r);
        auto zs = m.apply(s);
        for (int i = 0; i < 15; ++i) CHECK(std::abs(lhs[i] - (a * zr[i] + zs[i])) < 1e-10);
    }
}

TEST_CASE("pcg on the identity converges in one iteration") {
    auto eye = identity_matrix(6);
    std::mt19937 rng(2);
    auto b = oracles::random_vector(6, rng);
    std::vector<double> x0(6, 0.0);
    auto rep = linalg::pcg_solve(linalg::csr_operator(eye), b, x0,
                                 linalg::Preconditioner::identity(6));
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    for (int i = 0; i < 6; ++i) CHECK(rep.solution[i] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("pcg with exact initial guess does no iterations") {
    auto m = small({{4, 1}, {1, 3}});
    std::vector<double> x{1.0 / 11.0, 7.0 / 11.0};
    auto b = linalg::spmv_csr(m, x);
    auto rep = linalg::pcg_solve(linalg::csr_operator(m), b, x,
                                 linalg::Preconditioner::identity(2));
    CHECK(rep.converged);
    CHECK(rep.iterations == 0);
}

TEST_CASE("pcg solves the 2x2 example to 1e-10") {
    auto m = small({{4, 1}, {1, 3}});
    std::vector<double> b{1.0, 2.0}, x0{0.0, 0.0};
    linalg::CgOptions opts;
    opts.tol = 1e-12;
    auto rep = linalg::pcg_solve(linalg::csr_operator(m), b, x0,
                                 linalg::Preconditioner::identity(2), opts);
    CHECK(rep.converged);
    CHECK(std::abs(rep.solution[0] - 1.0 / 11.0) < 1e-10);
    CHECK(std::abs(rep.solution[1] - 7.0 / 11.0) < 1e-10);
}

TEST_CASE("pcg reaches 1e-8 within n iterations on SPD systems up to n=50") {
    std::mt19937 rng(404);
    for (int n : {5, 12, 25, 50}) {
        auto sys = oracles::random_spd(n, rng);
        auto b = oracles::random_vector(n, rng);
        std::vector<double> x0(n, 0.0);
        linalg::CgOptions opts;
        opts.tol = 1e-8;
        opts.max_iter = n;
        auto rep = linalg::pcg_solve(linalg::csr_operator(sys.csr), b, x0,
                                     linalg::Preconditioner::identity(n), opts);
        CHECK(rep.converged);
        CHECK(rep.iterations <= n);
    }
}

TEST_CASE("pcg breakdown on an indefinite operator") {
    auto m = small({{1, 0}, {0, -1}});
    std::vector<double> b{0.0, 1.0}, x0{0.0, 0.0};
    CHECK_THROWS_AS(linalg::pcg_solve(linalg::csr_operator(m), b, x0,
                                      linalg::Preconditioner::identity(2)),
                    BreakdownError);
}

TEST_CASE("pcg iterates match the unpreconditioned reference exactly") {
    std::mt19937 rng(2024);
    auto sys = oracles::random_spd(30, rng);
    auto b = oracles::random_vector(30, rng);
    auto ref = oracles::reference_cg(sys.dense, b, 1e-10, 60);
    REQUIRE(ref.converged);

    std::vector<std::vector<double>> iterates;
    linalg::CgOptions opts;
    opts.tol = 1e-10;
    opts.max_iter = 60;
    opts.on_iterate = [&](int, std::span<const double> x, std::span<const double>) {
        iterates.emplace_back(x.begin(), x.end());
    };
    std::vector<double> x0(30, 0.0);
    auto rep = linalg::pcg_solve(linalg::csr_operator(sys.csr), b, x0,
                                 linalg::Preconditioner::identity(30), opts);
    CHECK(rep.converged);
    CHECK(rep.iterations == ref.iterations);
    REQUIRE(iterates.size() == ref.iterates.size());
    for (size_t k = 0; k < iterates.size(); ++k)
        for (int i = 0; i < 30; ++i)
            CHECK(std::abs(iterates[k][i] - ref.iterates[k][i]) < 1e-12);
}

TEST_CASE("pcg residual report matches a from-scratch recomputation") {
    std::mt19937 rng(555);
    auto sys = oracles::random_spd(25, rng);
    auto b = oracles::random_vector(25, rng);
    std::vector<double> x0(25, 0.0);
    auto rep = linalg::pcg_solve(linalg::csr_operator(sys.csr), b, x0,
                                 linalg::Preconditioner::identity(25));
    auto ax = linalg::spmv_csr(sys.csr, rep.solution);
    std::vector<double> res(25);
    for (int i = 0; i < 25; ++i) res[i] = b[i] - ax[i];
    CHECK(std::abs(rep.final_residual_norm - norm2(res)) <= 1e-10 * norm2(b));
}

TEST_CASE("graph-form SpMV equals CSR on base case and overlays") {
    auto model = oracles::load_case("ieee14.cdf");
    auto g = graph::build_graph(model);
    const int n = g.vertex_count();
    std::mt19937 rng(808);

    auto check_against = [&](const graph::ScenarioOverlay* overlay) {
        auto assembled = fdpf::build_bprime(g, overlay);
        for (int t = 0; t < 100; ++t) {
            auto p = oracles::random_vector(n, rng);
            std::vector<double> ap(n);
            const double pap = linalg::spmv_graph(g, overlay, p, ap);
            auto ref = linalg::spmv_csr(assembled, p);
            double pap_ref = 0.0;
            for (int i = 0; i < n; ++i) {
                CHECK(std::abs(ap[i] - ref[i]) < 1e-12);
                pap_ref += p[i] * ref[i];
            }
            CHECK(pap == doctest::Approx(pap_ref).epsilon(1e-12));
        }
    };

    check_against(nullptr);
    auto overlay = graph::apply_outage(g, 3);  // 2-4, no islanding
    REQUIRE(overlay.deenergized.empty());
    check_against(&overlay);
    auto islanding = graph::apply_outage(g, g.edge_of_branch(14));  // 7-8 leaf feeder
    REQUIRE(!islanding.deenergized.empty());
    check_against(&islanding);
}

TEST_CASE("graph-form SpMV of the zero vector is zero") {
    auto model = oracles::load_case("ieee14.cdf");
    auto g = graph::build_graph(model);
    std::vector<double> p(g.vertex_count(), 0.0), ap(g.vertex_count(), 1.0);
    CHECK(linalg::spmv_graph(g, nullptr, p, ap) == 0.0);
    for (double x : ap) CHECK(x == 0.0);
}
