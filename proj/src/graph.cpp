#include "gridca/graph.hpp"

#include <algorithm>
#include <deque>

#include <json.hpp>

namespace gridca::graph {

bool ScenarioOverlay::is_deenergized(int v) const {
    return std::binary_search(deenergized.begin(), deenergized.end(), v);
}

const VertexAttrs& PowerGraph::vertex(int v) const {
    if (v < 0 || v >= vertex_count())
        throw IndexOutOfRangeError("vertex index " + std::to_string(v));
    return vertices_[v];
}

const EdgeAttrs& PowerGraph::edge(int e) const {
    if (e < 0 || e >= edge_count())
        throw IndexOutOfRangeError("edge index " + std::to_string(e));
    return edges_[e];
}

const std::vector<AdjacencyEntry>& PowerGraph::neighbors(int v) const {
    if (v < 0 || v >= vertex_count())
        throw IndexOutOfRangeError("vertex index " + std::to_string(v));
    return adjacency_[v];
}

int PowerGraph::index_of(int external_bus_id) const {
    auto it = index_map_.find(external_bus_id);
    return it == index_map_.end() ? -1 : it->second;
}

int PowerGraph::edge_of_branch(int branch_id) const {
    auto it = branch_to_edge_.find(branch_id);
    return it == branch_to_edge_.end() ? -1 : it->second;
}

PowerGraph build_graph(const ingest::NetworkModel& model) {
    PowerGraph g;
    g.vertices_.reserve(model.buses.size());
    for (const auto& bus : model.buses) {
        VertexAttrs v;
        v.bus_type = bus.bus_type;
        v.v_mag = bus.v_mag;
        v.v_ang = bus.v_ang;
        v.p_sched = bus.p_scheduled();
        v.q_sched = bus.q_scheduled();
        v.g_self = bus.g_shunt;
        v.b_self = bus.b_shunt;
        v.g_shunt = bus.g_shunt;
        v.b_shunt = bus.b_shunt;
        v.p_gen = bus.p_gen;
        v.external_id = bus.id;
        const int idx = static_cast<int>(g.vertices_.size());
        g.index_map_[bus.id] = idx;
        if (bus.bus_type == ingest::BusType::Slack) g.slack_ = idx;
        g.vertices_.push_back(v);
    }

    g.adjacency_.resize(g.vertices_.size());
    for (const auto& br : model.branches) {
        if (!br.in_service) continue;
        EdgeAttrs e;
        e.branch_id = br.id;
        e.from_v = g.index_map_.at(br.from_bus);
        e.to_v = g.index_map_.at(br.to_bus);
        e.tap = br.tap;
        e.x = br.x;
        e.rating = br.rating_mva / model.base_mva;
        e.b_charging_half = br.b_charging / 2.0;

        // pi model: series y = 1/(r+jx), tap on the from side
        const double denom = br.r * br.r + br.x * br.x;
        const double gs = br.r / denom;
        const double bs = -br.x / denom;
        e.g_series = -gs / e.tap;  // Ybus off-diagonal
        e.b_series = -bs / e.tap;
        e.g_diag_from = gs / (e.tap * e.tap);
        e.b_diag_from = (bs + e.b_charging_half) / (e.tap * e.tap);
        e.g_diag_to = gs;
        e.b_diag_to = bs + e.b_charging_half;
        e.bprime_off = -1.0 / br.x;

        const int idx = static_cast<int>(g.edges_.size());
        g.branch_to_edge_[br.id] = idx;
        g.edges_.push_back(e);
        g.adjacency_[e.from_v].push_back({idx, e.to_v});
        g.adjacency_[e.to_v].push_back({idx, e.from_v});

        g.vertices_[e.from_v].g_self += e.g_diag_from;
        g.vertices_[e.from_v].b_self += e.b_diag_from;
        g.vertices_[e.to_v].g_self += e.g_diag_to;
        g.vertices_[e.to_v].b_self += e.b_diag_to;
        g.vertices_[e.from_v].bprime_diag += 1.0 / br.x;
        g.vertices_[e.to_v].bprime_diag += 1.0 / br.x;
    }

    for (auto& adj : g.adjacency_)
        std::sort(adj.begin(), adj.end(), [](const AdjacencyEntry& a, const AdjacencyEntry& b) {
            return std::pair{a.neighbor, a.edge} < std::pair{b.neighbor, b.edge};
        });
    return g;
}

Partition connected_components(const PowerGraph& g, std::span<const int> excluded_edges) {
    const int n = g.vertex_count();
    std::vector<char> excluded(g.edge_count(), 0);
    for (int e : excluded_edges) {
        if (e < 0 || e >= g.edge_count())
            throw IndexOutOfRangeError("excluded edge index " + std::to_string(e));
        excluded[e] = 1;
    }

    Partition part;
    part.component_of.assign(n, -1);
    std::deque<int> work;
    for (int start = 0; start < n; ++start) {
        if (part.component_of[start] >= 0) continue;
        const int comp = static_cast<int>(part.components.size());
        part.components.emplace_back();
        part.component_of[start] = comp;
        work.push_back(start);
        while (!work.empty()) {
            const int v = work.front();
            work.pop_front();
            part.components[comp].push_back(v);
            for (const auto& [e, t] : g.neighbors(v)) {
                if (excluded[e] || !g.edge(e).in_service) continue;
                if (part.component_of[t] < 0) {
                    part.component_of[t] = comp;
                    work.push_back(t);
                }
            }
        }
        std::sort(part.components[comp].begin(), part.components[comp].end());
    }
    if (g.slack_index() >= 0) part.main_component = part.component_of[g.slack_index()];
    return part;
}

ScenarioOverlay apply_outage(const PowerGraph& g, int edge) {
    if (!g.edge(edge).in_service) throw EdgeAlreadyOutError(edge);
    ScenarioOverlay overlay;
    overlay.outaged_edge = edge;
    const int excluded[] = {edge};
    const Partition part = connected_components(g, excluded);
    for (int v = 0; v < g.vertex_count(); ++v)
        if (part.component_of[v] != part.main_component) overlay.deenergized.push_back(v);
    return overlay;
}

std::string dump_json(const PowerGraph& g) {
    nlohmann::ordered_json doc;
    doc["vertices"] = nlohmann::ordered_json::array();
    for (int v = 0; v < g.vertex_count(); ++v) {
        const auto& a = g.vertex(v);
        doc["vertices"].push_back({{"index", v},
                                   {"bus", a.external_id},
                                   {"type", ingest::to_string(a.bus_type)},
                                   {"v_mag", a.v_mag},
                                   {"v_ang", a.v_ang},
                                   {"p_sched", a.p_sched},
                                   {"q_sched", a.q_sched},
                                   {"g_self", a.g_self},
                                   {"b_self", a.b_self},
                                   {"bprime_diag", a.bprime_diag}});
    }
    doc["edges"] = nlohmann::ordered_json::array();
    for (int e = 0; e < g.edge_count(); ++e) {
        const auto& a = g.edge(e);
        doc["edges"].push_back({{"index", e},
                                {"branch_id", a.branch_id},
                                {"from", g.external_id(a.from_v)},
                                {"to", g.external_id(a.to_v)},
                                {"g_series", a.g_series},
                                {"b_series", a.b_series},
                                {"tap", a.tap},
                                {"x", a.x},
                                {"rating", a.rating},
                                {"bprime_off", a.bprime_off}});
    }
    doc["slack"] = g.slack_index() >= 0 ? g.external_id(g.slack_index()) : -1;
    return doc.dump(2);
}

}  // namespace gridca::graph
