#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gridca/ingest.hpp"

namespace gridca::graph {

/// Per-vertex attributes. Mirrors the storage split of the vertex-centric
/// computation pattern: everything a vertex needs for its local update lives
/// here; everything shared with a neighbor lives on the connecting edge.
struct VertexAttrs {
    ingest::BusType bus_type = ingest::BusType::PQ;
    double v_mag = 1.0;    // base-case solved values from input
    double v_ang = 0.0;
    double p_sched = 0.0;  // P_is = p_gen - p_load (p.u.)
    double q_sched = 0.0;
    double g_self = 0.0;   // bus admittance diagonal G_ii
    double b_self = 0.0;   // B_ii (series + charging halves + shunt)
    double g_shunt = 0.0;
    double b_shunt = 0.0;
    double p_gen = 0.0;    // kept for re-dispatch participation
    double bprime_diag = 0.0;  // sum of 1/x over in-service incident edges
    int external_id = 0;
};

struct EdgeAttrs {
    int from_v = -1;
    int to_v = -1;
    int branch_id = 0;          // external branch ordinal
    double g_series = 0.0;      // Ybus off-diagonal entries G_ij, B_ij
    double b_series = 0.0;
    double g_diag_from = 0.0;   // this edge's contribution to G_ii/B_ii at each end
    double b_diag_from = 0.0;
    double g_diag_to = 0.0;
    double b_diag_to = 0.0;
    double b_charging_half = 0.0;
    double tap = 1.0;
    double x = 0.0;
    double rating = 0.0;        // p.u. on base MVA, 0 = unlimited
    bool in_service = true;
    double bprime_off = 0.0;    // -1/x

    int other(int v) const { return v == from_v ? to_v : from_v; }
};

struct AdjacencyEntry {
    int edge;
    int neighbor;
};

/// A single-outage view over an immutable base graph. Scenarios never mutate
/// the shared PowerGraph; they carry their differences here.
struct ScenarioOverlay {
    int outaged_edge = -1;
    std::vector<int> deenergized;  // sorted internal vertex indices; never the slack
    std::unordered_map<int, double> adjusted_p_sched;  // vertex -> new P_is

    bool shields(int edge) const { return edge == outaged_edge; }
    bool is_deenergized(int v) const;
};

class PowerGraph {
public:
    int vertex_count() const { return static_cast<int>(vertices_.size()); }
    int edge_count() const { return static_cast<int>(edges_.size()); }
    int slack_index() const { return slack_; }

    const VertexAttrs& vertex(int v) const;
    const EdgeAttrs& edge(int e) const;
    std::span<const VertexAttrs> vertices() const { return vertices_; }
    std::span<const EdgeAttrs> edges() const { return edges_; }

    /// In-service incident edges with the opposite endpoint, ascending by
    /// neighbor index. Throws IndexOutOfRangeError.
    const std::vector<AdjacencyEntry>& neighbors(int v) const;

    int index_of(int external_bus_id) const;  // -1 if unknown
    int external_id(int v) const { return vertices_[v].external_id; }

    /// Internal edge index for an external branch ordinal, -1 if the branch
    /// is not part of the graph (out of service in the input).
    int edge_of_branch(int branch_id) const;

private:
    friend PowerGraph build_graph(const ingest::NetworkModel&);
    std::vector<VertexAttrs> vertices_;
    std::vector<EdgeAttrs> edges_;
    std::vector<std::vector<AdjacencyEntry>> adjacency_;
    std::unordered_map<int, int> index_map_;
    std::unordered_map<int, int> branch_to_edge_;
    int slack_ = -1;
};

/// One vertex per bus, one bidirectional edge per in-service branch, pi-model
/// admittance attributes. Requires a model that validate_network passed with
/// no Error diagnostics.
PowerGraph build_graph(const ingest::NetworkModel& model);

struct Partition {
    std::vector<int> component_of;            // vertex -> component id
    std::vector<std::vector<int>> components; // each sorted ascending
    int main_component = -1;                  // the one containing the slack
};

/// Maximal connected sets ignoring excluded and out-of-service edges.
/// Iterative BFS; deep radial feeders must not overflow the stack.
Partition connected_components(const PowerGraph& g, std::span<const int> excluded_edges = {});

/// Outage overlay for one in-service edge: deenergized = every vertex cut off
/// from the slack's component. Re-dispatch is a separate step.
/// Throws EdgeAlreadyOutError.
ScenarioOverlay apply_outage(const PowerGraph& g, int edge);

/// Vertex/edge list with attributes, for --dump-graph.
std::string dump_json(const PowerGraph& g);

}  // namespace gridca::graph
