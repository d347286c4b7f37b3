// Independent test oracles: dense elimination, textbook CG, brute-force BFS,
// and a full-Newton power flow. None of these share code with the library
// paths they check.
#pragma once

#include <complex>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gridca/ingest.hpp"
#include "gridca/linalg.hpp"

namespace oracles {

using Dense = std::vector<std::vector<double>>;

Dense dense_from_csr(const gridca::linalg::SparseMatrix& a);

/// Gaussian elimination with partial pivoting.
std::vector<double> dense_solve(Dense a, std::vector<double> b);

std::vector<double> dense_mul(const Dense& a, std::span<const double> v);

/// All pivots of an unpivoted symmetric elimination; used to certify positive
/// definiteness at desk scale.
std::vector<double> dense_pivots(Dense a);

struct CgTrace {
    std::vector<std::vector<double>> iterates;  // x_1, x_2, ...
    std::vector<double> solution;
    int iterations = 0;
    bool converged = false;
};

/// Plain unpreconditioned conjugate gradients, textbook recurrences.
CgTrace reference_cg(const Dense& a, std::span<const double> b, double tol, int max_iter);

/// Connected components over an explicit edge list, ignoring excluded edge
/// ordinals. Returns component id per vertex (ids are discovery-ordered).
std::vector<int> bfs_components(int n, const std::vector<std::pair<int, int>>& edges,
                                const std::vector<int>& excluded);

struct NewtonResult {
    std::vector<double> v_mag;  // indexed like model.buses
    std::vector<double> v_ang;
    bool converged = false;
    int iterations = 0;
};

/// Full-Newton polar power flow on the model records (own Ybus assembly),
/// optionally with one branch removed. Flat start, dense Jacobian.
NewtonResult newton_power_flow(const gridca::ingest::NetworkModel& model,
                               int skip_branch_id = -1, double tol = 1e-10,
                               int max_iter = 50);

/// Random symmetric diagonally dominant (hence SPD) matrix as CSR + dense.
struct RandomSpd {
    gridca::linalg::SparseMatrix csr;
    Dense dense;
};
RandomSpd random_spd(int n, std::mt19937& rng, double density = 0.4);

std::vector<double> random_vector(int n, std::mt19937& rng);

std::string data_path(const std::string& name);
std::string read_file(const std::string& path);
gridca::ingest::NetworkModel load_case(const std::string& name);

}  // namespace oracles
