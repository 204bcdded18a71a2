#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "binary_io.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "parallel.hpp"

namespace gk {

namespace {

SparseFeatures to_sparse(const std::map<std::uint64_t, double>& m) {
    return SparseFeatures(m.begin(), m.end());
}

// Normalizes in place: k_ij / sqrt(k_ii * k_jj).
void normalize_square(Eigen::MatrixXd& k) {
    const Eigen::Index n = k.rows();
    const Eigen::VectorXd self = k.diagonal();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(self[i] > 0.0)) {
            fail(ErrorKind::numeric, "cannot normalize: graph " + std::to_string(i) + " has zero self-kernel");
        }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < j; ++i) {
            const double v = k(i, j) / std::sqrt(self[i] * self[j]);
            k(i, j) = v;
            k(j, i) = v;
        }
        k(j, j) = 1.0;
    }
}

}  // namespace

void KernelKind::validate() const {
    switch (type) {
        case KernelType::wl_subtree:
            if (wl_iterations < 0 || wl_iterations > kMaxWlIterations) {
                fail(ErrorKind::invalid_argument, "WL iterations must be in [0, 10], got " + std::to_string(wl_iterations));
            }
            break;
        case KernelType::temporal_topological:
            if (!(alpha > 0.0) || !std::isfinite(alpha)) {
                fail(ErrorKind::invalid_argument, "temporal kernel alpha must be positive and finite");
            }
            break;
        case KernelType::vertex_histogram:
            break;
    }
}

std::string KernelKind::name() const {
    std::ostringstream out;
    switch (type) {
        case KernelType::wl_subtree: out << "wl(h=" << wl_iterations << ")"; break;
        case KernelType::temporal_topological: out << "tp(alpha=" << alpha << ")"; break;
        case KernelType::vertex_histogram: out << "vh"; break;
    }
    return out.str();
}

GraphFeaturizer::GraphFeaturizer(KernelKind kind) : kind_(kind) {
    kind_.validate();
}

std::uint32_t GraphFeaturizer::label_id(const std::string& label) {
    return labels_.try_emplace(label, static_cast<std::uint32_t>(labels_.size())).first->second;
}

SparseFeatures GraphFeaturizer::featurize(const PatientGraph& g) {
    switch (kind_.type) {
        case KernelType::wl_subtree: return wl_features(g, kind_.wl_iterations);
        case KernelType::vertex_histogram: return wl_features(g, 0);
        case KernelType::temporal_topological: return temporal_features(g);
    }
    return {};
}

SparseFeatures GraphFeaturizer::wl_features(const PatientGraph& g, int iterations) {
    const std::size_t n = g.node_count();
    std::map<std::uint64_t, double> histogram;
    std::vector<std::uint32_t> current(n);
    for (std::size_t v = 0; v < n; ++v) {
        current[v] = label_id(g.labels[v]);
        histogram[current[v]] += 1.0;
    }
    if (iterations == 0) return to_sparse(histogram);

    std::vector<std::vector<std::uint32_t>> in(n), out(n);
    for (const auto& e : g.edges) {
        out[e.src].push_back(e.dst);
        in[e.dst].push_back(e.src);
    }
    if (wl_rounds_.size() < static_cast<std::size_t>(iterations)) wl_rounds_.resize(iterations);

    std::vector<std::uint32_t> next(n);
    std::vector<std::uint32_t> signature;
    std::vector<std::uint32_t> scratch;
    for (int round = 1; round <= iterations; ++round) {
        auto& dictionary = wl_rounds_[round - 1];
        for (std::size_t v = 0; v < n; ++v) {
            signature.clear();
            signature.push_back(current[v]);
            signature.push_back(static_cast<std::uint32_t>(in[v].size()));
            for (const auto* neighbors : {&in[v], &out[v]}) {
                scratch.clear();
                for (auto w : *neighbors) scratch.push_back(current[w]);
                std::sort(scratch.begin(), scratch.end());
                signature.insert(signature.end(), scratch.begin(), scratch.end());
            }
            next[v] = dictionary.try_emplace(signature, static_cast<std::uint32_t>(dictionary.size())).first->second;
            histogram[(static_cast<std::uint64_t>(round) << 32) | next[v]] += 1.0;
        }
        current.swap(next);
    }
    return to_sparse(histogram);
}

SparseFeatures GraphFeaturizer::temporal_features(const PatientGraph& g) {
    std::map<std::uint64_t, std::pair<double, double>> sums;  // bucket -> (sum, count)
    for (const auto& e : g.edges) {
        const auto src = label_id(g.labels[e.src]);
        const auto dst = label_id(g.labels[e.dst]);
        const auto bucket = buckets_.try_emplace({src, dst}, static_cast<std::uint32_t>(buckets_.size())).first->second;
        auto& s = sums[bucket];
        s.first += static_cast<double>(e.weight);
        s.second += 1.0;
    }
    SparseFeatures out;
    out.reserve(sums.size());
    for (const auto& [bucket, s] : sums) out.emplace_back(bucket, s.first / s.second);
    return out;
}

double GraphFeaturizer::evaluate(const SparseFeatures& a, const SparseFeatures& b) const {
    const bool temporal = kind_.type == KernelType::temporal_topological;
    double sum = 0.0;
    // Temporal terms are summed in sorted order: bucket ids depend on which
    // graph the dictionary saw first, and the sum must not.
    std::vector<double> terms;
    auto ia = a.begin(), ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (ia->first < ib->first) {
            ++ia;
        } else if (ib->first < ia->first) {
            ++ib;
        } else {
            if (temporal) {
                const double d = ia->second - ib->second;
                terms.push_back(std::exp(-kind_.alpha * d * d));
            } else {
                sum += ia->second * ib->second;
            }
            ++ia;
            ++ib;
        }
    }
    if (temporal) {
        std::sort(terms.begin(), terms.end());
        for (double t : terms) sum += t;
    }
    return sum;
}

double kernel_value(const KernelKind& kind, const PatientGraph& g1, const PatientGraph& g2) {
    GraphFeaturizer f(kind);
    const auto a = f.featurize(g1);
    const auto b = f.featurize(g2);
    return f.evaluate(a, b);
}

double wl_subtree_kernel(const PatientGraph& g1, const PatientGraph& g2, int h) {
    return kernel_value(KernelKind::wl(h), g1, g2);
}

double vertex_histogram_kernel(const PatientGraph& g1, const PatientGraph& g2) {
    return kernel_value(KernelKind::vertex_histogram(), g1, g2);
}

double temporal_topological_kernel(const PatientGraph& g1, const PatientGraph& g2, double alpha) {
    return kernel_value(KernelKind::temporal(alpha), g1, g2);
}

GramMatrix gram_matrix(const KernelKind& kind, std::span<const PatientGraph> graphs, bool normalize, int threads) {
    if (graphs.empty()) fail(ErrorKind::invalid_argument, "gram matrix of an empty graph list");
    GraphFeaturizer featurizer(kind);
    std::vector<SparseFeatures> features;
    features.reserve(graphs.size());
    for (const auto& g : graphs) features.push_back(featurizer.featurize(g));

    const auto n = static_cast<Eigen::Index>(graphs.size());
    GramMatrix out{Eigen::MatrixXd(n, n), kind, normalize};
    parallel_for(graphs.size(), threads, [&](std::size_t row) {
        const auto i = static_cast<Eigen::Index>(row);
        for (Eigen::Index j = i; j < n; ++j) {
            const double v = featurizer.evaluate(features[row], features[static_cast<std::size_t>(j)]);
            out.values(i, j) = v;
            out.values(j, i) = v;
        }
    });
    if (normalize) normalize_square(out.values);
    return out;
}

std::vector<double> self_kernels(const KernelKind& kind, std::span<const PatientGraph> graphs) {
    GraphFeaturizer featurizer(kind);
    std::vector<double> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) {
        const auto f = featurizer.featurize(g);
        out.push_back(featurizer.evaluate(f, f));
    }
    return out;
}

Eigen::MatrixXd cross_gram(const KernelKind& kind, std::span<const PatientGraph> test_graphs,
                           std::span<const PatientGraph> train_graphs, std::span<const double> train_diag,
                           bool normalize, int threads) {
    if (train_diag.size() != train_graphs.size()) {
        fail(ErrorKind::invalid_argument, "train_diag length " + std::to_string(train_diag.size()) +
                                              " does not match " + std::to_string(train_graphs.size()) +
                                              " training graphs");
    }
    GraphFeaturizer featurizer(kind);
    std::vector<SparseFeatures> train;
    train.reserve(train_graphs.size());
    for (const auto& g : train_graphs) train.push_back(featurizer.featurize(g));
    std::vector<SparseFeatures> test;
    test.reserve(test_graphs.size());
    for (const auto& g : test_graphs) test.push_back(featurizer.featurize(g));

    const auto rows = static_cast<Eigen::Index>(test.size());
    const auto cols = static_cast<Eigen::Index>(train.size());
    if (normalize) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (!(train_diag[c] > 0.0)) {
                fail(ErrorKind::numeric, "cannot normalize: training graph " + std::to_string(c) +
                                             " has zero self-kernel");
            }
        }
    }
    Eigen::MatrixXd out(rows, cols);
    parallel_for(test.size(), threads, [&](std::size_t r) {
        const double self = featurizer.evaluate(test[r], test[r]);
        if (normalize && !(self > 0.0)) {
            fail(ErrorKind::numeric, "cannot normalize: test graph " + std::to_string(r) + " has zero self-kernel");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            double v = featurizer.evaluate(test[r], train[static_cast<std::size_t>(c)]);
            if (normalize) v /= std::sqrt(self * train_diag[c]);
            out(static_cast<Eigen::Index>(r), c) = v;
        }
    });
    return out;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    if (m.rows() == 0) fail(ErrorKind::invalid_argument, "eigenvalue of an empty matrix");
    const double asym = max_asymmetry(m);
    if (asym > 1e-9) {
        fail(ErrorKind::numeric, "matrix is not symmetric (max |a_ij - a_ji| = " + std::to_string(asym) + ")");
    }
    return jacobi_eigen(m, false).values[0];
}

double psd_check(const GramMatrix& m) { return min_eigenvalue(m.values); }

namespace {
constexpr char kGramMagic[5] = "KGRM";
constexpr std::uint32_t kGramVersion = 1;
}  // namespace

void save_gram(std::ostream& out, const GramMatrix& m) {
    binary::put_magic(out, kGramMagic);
    binary::put<std::uint32_t>(out, kGramVersion);
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.values.rows()));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.kernel.type));
    binary::put<std::uint8_t>(out, m.normalized ? 1 : 0);
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) binary::put<double>(out, m.values(i, j));
    }
    if (!out) fail(ErrorKind::io, "failed writing Gram matrix");
}

GramMatrix load_gram(std::istream& in) {
    binary::expect_magic(in, kGramMagic);
    const auto version = binary::get<std::uint32_t>(in, "version");
    if (version != kGramVersion) fail(ErrorKind::parse, "unsupported KGRM version " + std::to_string(version));
    const auto n = binary::get<std::uint32_t>(in, "size");
    const auto tag = binary::get<std::uint32_t>(in, "kernel tag");
    GramMatrix m;
    switch (tag) {
        case 0: m.kernel = KernelKind::wl(3); break;
        case 1: m.kernel = KernelKind::temporal(1e-3); break;
        case 2: m.kernel = KernelKind::vertex_histogram(); break;
        default: fail(ErrorKind::parse, "unknown kernel tag " + std::to_string(tag));
    }
    const auto flag = binary::get<std::uint8_t>(in, "normalized flag");
    if (flag > 1) fail(ErrorKind::parse, "bad normalized flag");
    m.normalized = flag == 1;
    m.values.resize(n, n);
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) m.values(i, j) = binary::get<double>(in, "Gram entries");
    }
    if (in.peek() != std::char_traits<char>::eof()) fail(ErrorKind::parse, "trailing bytes after Gram matrix");
    return m;
}

void write_gram_csv(std::ostream& out, const GramMatrix& m) {
    const auto precision = out.precision(17);
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
            if (j) out << ',';
            out << m.values(i, j);
        }
        out << '\n';
    }
    out.precision(precision);
}

}  // namespace gk
