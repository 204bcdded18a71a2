#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ehr.hpp"

namespace gk {

struct GraphEdge {
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    std::int64_t weight = 0;  // days; age in years on the demographics edge

    friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

// Weighted DAG of one case: node 0 is the demographics node (`DEMO:F|M|U`),
// nodes 1..n are the events in day order, chained by day-interval edges.
struct PatientGraph {
    std::vector<std::string> labels;
    std::vector<GraphEdge> edges;

    std::size_t node_count() const { return labels.size(); }
    std::int64_t demo_edge_weight() const { return edges.empty() ? 0 : edges.front().weight; }

    friend bool operator==(const PatientGraph&, const PatientGraph&) = default;
};

std::string demographics_label(Gender gender);

PatientGraph build_patient_graph(const LabeledCase& c);

bool is_acyclic(const PatientGraph& g);
bool is_weakly_connected(const PatientGraph& g);

// One edge per line: src_label \t dst_label \t weight. Debug output only.
void write_adjacency(std::ostream& out, const PatientGraph& g);

}  // namespace gk
