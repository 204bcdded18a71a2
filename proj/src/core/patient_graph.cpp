#include "patient_graph.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "error.hpp"

namespace gk {

std::string demographics_label(Gender gender) {
    return "DEMO:" + std::string(to_string(gender));
}

PatientGraph build_patient_graph(const LabeledCase& c) {
    const auto& events = c.record.events;
    if (events.empty()) {
        fail(ErrorKind::data, "case '" + c.record.patient_id + "' has no events; cannot build a graph");
    }
    std::vector<const MedicalEvent*> ordered;
    ordered.reserve(events.size());
    for (const auto& e : events) ordered.push_back(&e);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const MedicalEvent* a, const MedicalEvent* b) { return event_before(*a, *b); });

    PatientGraph g;
    g.labels.reserve(events.size() + 1);
    g.edges.reserve(events.size());
    g.labels.push_back(demographics_label(c.record.demographics.gender));
    for (const auto* e : ordered) g.labels.push_back(e->code);

    g.edges.push_back({0, 1, c.record.demographics.age_years});
    for (std::size_t i = 1; i < ordered.size(); ++i) {
        g.edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i + 1),
                           ordered[i]->day - ordered[i - 1]->day});
    }
    return g;
}

bool is_acyclic(const PatientGraph& g) {
    // Kahn's algorithm.
    const std::size_t n = g.node_count();
    std::vector<std::size_t> indegree(n, 0);
    std::vector<std::vector<std::uint32_t>> out(n);
    for (const auto& e : g.edges) {
        if (e.src >= n || e.dst >= n) return false;
        ++indegree[e.dst];
        out[e.src].push_back(e.dst);
    }
    std::vector<std::uint32_t> ready;
    for (std::uint32_t v = 0; v < n; ++v) {
        if (indegree[v] == 0) ready.push_back(v);
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
        const auto v = ready.back();
        ready.pop_back();
        ++visited;
        for (auto w : out[v]) {
            if (--indegree[w] == 0) ready.push_back(w);
        }
    }
    return visited == n;
}

bool is_weakly_connected(const PatientGraph& g) {
    const std::size_t n = g.node_count();
    if (n == 0) return false;
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::size_t components = n;
    for (const auto& e : g.edges) {
        const auto a = find(e.src), b = find(e.dst);
        if (a != b) {
            parent[a] = b;
            --components;
        }
    }
    return components == 1;
}

void write_adjacency(std::ostream& out, const PatientGraph& g) {
    for (const auto& e : g.edges) {
        out << g.labels[e.src] << '\t' << g.labels[e.dst] << '\t' << e.weight << '\n';
    }
}

}  // namespace gk
