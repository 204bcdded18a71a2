#pragma once

#include <cstdint>
#include <map>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "patient_graph.hpp"

namespace gk {

enum class KernelType : std::uint8_t {
    wl_subtree = 0,
    temporal_topological = 1,
    vertex_histogram = 2,
};

inline constexpr int kMaxWlIterations = 10;

struct KernelKind {
    KernelType type = KernelType::wl_subtree;
    int wl_iterations = 3;  // used by wl_subtree
    double alpha = 1e-3;    // used by temporal_topological, per squared day

    static KernelKind wl(int h) { return {KernelType::wl_subtree, h, 1e-3}; }
    static KernelKind vertex_histogram() { return {KernelType::vertex_histogram, 0, 1e-3}; }
    static KernelKind temporal(double alpha) { return {KernelType::temporal_topological, 0, alpha}; }

    void validate() const;
    std::string name() const;
};

// Sorted (key, value) pairs. Histogram kernels store counts; the temporal
// kernel stores the mean edge weight per (src_label, dst_label) bucket.
using SparseFeatures = std::vector<std::pair<std::uint64_t, double>>;

// Maps graphs to explicit feature vectors. The label dictionaries are shared
// across every graph featurized by one instance, so features of graphs from
// the same instance are comparable; relabeling is injective.
class GraphFeaturizer {
public:
    explicit GraphFeaturizer(KernelKind kind);

    SparseFeatures featurize(const PatientGraph& g);
    double evaluate(const SparseFeatures& a, const SparseFeatures& b) const;
    const KernelKind& kind() const { return kind_; }

private:
    std::uint32_t label_id(const std::string& label);
    SparseFeatures wl_features(const PatientGraph& g, int iterations);
    SparseFeatures temporal_features(const PatientGraph& g);

    KernelKind kind_;
    std::map<std::string, std::uint32_t> labels_;
    // One compression map per WL round: (label, in-labels, out-labels) -> id.
    std::vector<std::map<std::vector<std::uint32_t>, std::uint32_t>> wl_rounds_;
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> buckets_;
};

double wl_subtree_kernel(const PatientGraph& g1, const PatientGraph& g2, int h);
double vertex_histogram_kernel(const PatientGraph& g1, const PatientGraph& g2);
double temporal_topological_kernel(const PatientGraph& g1, const PatientGraph& g2, double alpha);
double kernel_value(const KernelKind& kind, const PatientGraph& g1, const PatientGraph& g2);

struct GramMatrix {
    Eigen::MatrixXd values;
    KernelKind kernel;
    bool normalized = false;

    Eigen::Index size() const { return values.rows(); }
};

GramMatrix gram_matrix(const KernelKind& kind, std::span<const PatientGraph> graphs, bool normalize,
                       int threads = 1);

// Unnormalized k(g, g) for each graph.
std::vector<double> self_kernels(const KernelKind& kind, std::span<const PatientGraph> graphs);

// T x N matrix of k(test_r, train_c); dictionaries are seeded from the
// training graphs first so that train features match gram_matrix's.
Eigen::MatrixXd cross_gram(const KernelKind& kind, std::span<const PatientGraph> test_graphs,
                           std::span<const PatientGraph> train_graphs, std::span<const double> train_diag,
                           bool normalize, int threads = 1);

// Smallest eigenvalue (Jacobi). Rejects matrices asymmetric beyond 1e-9.
double psd_check(const GramMatrix& m);
double min_eigenvalue(const Eigen::MatrixXd& m);

// KGRM container: magic, u32 version, u32 N, u32 kernel tag, u8 normalized,
// then N*N row-major f64. Kernel parameters (h, alpha) are not stored; the
// loaded kind carries the defaults for its type.
void save_gram(std::ostream& out, const GramMatrix& m);
GramMatrix load_gram(std::istream& in);
void write_gram_csv(std::ostream& out, const GramMatrix& m);

}  // namespace gk
