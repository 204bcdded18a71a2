#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "error.hpp"
#include "kernels.hpp"
#include "linalg.hpp"
#include "oracles.hpp"

using namespace gk;

namespace {

PatientGraph chain(std::vector<std::string> labels, std::vector<std::int64_t> weights) {
    PatientGraph g;
    g.labels = std::move(labels);
    for (std::size_t i = 0; i + 1 < g.labels.size(); ++i) {
        g.edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i + 1), weights.at(i)});
    }
    return g;
}

std::vector<PatientGraph> random_graphs(std::uint64_t seed, std::size_t n, int max_events, int vocab) {
    Rng rng(seed);
    std::vector<PatientGraph> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(build_patient_graph(oracle::random_case(rng, static_cast<int>(rng.range(1, max_events)), vocab)));
    }
    return out;
}

double eigen_min(const Eigen::MatrixXd& m) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("WL: two identical 2-node chains with h=1 give 4") {
    const auto g = chain({"a", "b"}, {1});
    CHECK(wl_subtree_kernel(g, g, 1) == 4.0);
    CHECK(wl_subtree_kernel(chain({"a", "b"}, {1}), chain({"c", "d"}, {1}), 0) == 0.0);
}

TEST_CASE("vertex histogram: count dot products") {
    const auto g1 = chain({"a", "a", "b"}, {1, 1});
    const auto g2 = chain({"a", "b", "b", "b"}, {1, 1, 1});
    CHECK(vertex_histogram_kernel(g1, g2) == 5.0);
    CHECK(vertex_histogram_kernel(g1, chain({"x"}, {})) == 0.0);
    CHECK(vertex_histogram_kernel(g1, g1) >= static_cast<double>(g1.node_count()));
}

TEST_CASE("temporal kernel: identical graphs count shared buckets, disjoint give 0") {
    const auto g = chain({"a", "b", "a", "b"}, {4, 9, 2});  // buckets (a,b) twice, (b,a) once
    CHECK(temporal_topological_kernel(g, g, 0.5) == 2.0);
    CHECK(temporal_topological_kernel(g, chain({"x", "y"}, {3}), 0.5) == 0.0);
    const auto h = chain({"a", "b"}, {0});
    // mean (a,b) weight in g is 3; h has 0.
    CHECK(temporal_topological_kernel(g, h, 0.1) == doctest::Approx(std::exp(-0.1 * 9.0)).epsilon(1e-15));
    CHECK(temporal_topological_kernel(g, h, 1e-300) == doctest::Approx(1.0));
}

TEST_CASE("WL with h=0 equals the vertex histogram kernel exactly") {
    const auto graphs = random_graphs(11, 200, 12, 5);
    for (std::size_t i = 0; i + 1 < graphs.size(); i += 2) {
        CHECK(wl_subtree_kernel(graphs[i], graphs[i + 1], 0) == vertex_histogram_kernel(graphs[i], graphs[i + 1]));
    }
}

TEST_CASE("kernels match independent feature-dictionary oracles") {
    const auto graphs = random_graphs(23, 120, 5, 3);  // at most 6 nodes
    for (std::size_t i = 0; i + 1 < graphs.size(); ++i) {
        const auto& a = graphs[i];
        const auto& b = graphs[i + 1];
        for (int h = 0; h <= 4; ++h) CHECK(wl_subtree_kernel(a, b, h) == oracle::wl_kernel(a, b, h));
        CHECK(vertex_histogram_kernel(a, b) == oracle::vertex_histogram_kernel(a, b));
        CHECK(temporal_topological_kernel(a, b, 0.01) == doctest::Approx(oracle::temporal_kernel(a, b, 0.01)).epsilon(1e-14));
    }
    // Larger graphs too: the oracle is exact, just slower.
    const auto big = random_graphs(29, 20, 30, 4);
    for (std::size_t i = 0; i + 1 < big.size(); ++i) {
        CHECK(wl_subtree_kernel(big[i], big[i + 1], 3) == oracle::wl_kernel(big[i], big[i + 1], 3));
    }
}

TEST_CASE("kernel symmetry and Cauchy-Schwarz") {
    const auto graphs = random_graphs(31, 60, 10, 4);
    for (const auto& kind : {KernelKind::wl(2), KernelKind::temporal(1e-2), KernelKind::vertex_histogram()}) {
        for (std::size_t i = 0; i + 1 < graphs.size(); ++i) {
            const double ab = kernel_value(kind, graphs[i], graphs[i + 1]);
            CHECK(ab == kernel_value(kind, graphs[i + 1], graphs[i]));
            const double aa = kernel_value(kind, graphs[i], graphs[i]);
            const double bb = kernel_value(kind, graphs[i + 1], graphs[i + 1]);
            CHECK(aa > 0.0);
            CHECK(ab <= std::sqrt(aa * bb) * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("kernel parameter validation") {
    CHECK_THROWS_AS(KernelKind::wl(11).validate(), Error);
    CHECK_THROWS_AS(KernelKind::wl(-1).validate(), Error);
    CHECK_THROWS_AS(KernelKind::temporal(0.0).validate(), Error);
    CHECK_NOTHROW(KernelKind::wl(10).validate());
}

TEST_CASE("normalized Gram: examples and invariants") {
    const auto g = chain({"DEMO:F", "a", "b"}, {30, 2});
    const std::vector<PatientGraph> one{g};
    CHECK(gram_matrix(KernelKind::wl(3), one, true).values(0, 0) == 1.0);
    const std::vector<PatientGraph> twice{g, g};
    const auto dup = gram_matrix(KernelKind::temporal(1e-3), twice, true).values;
    CHECK(dup(0, 1) == 1.0);
    CHECK(dup(1, 0) == 1.0);

    const auto graphs = random_graphs(41, 50, 15, 6);
    for (const auto& kind : {KernelKind::wl(3), KernelKind::temporal(1e-3), KernelKind::vertex_histogram()}) {
        const auto m = gram_matrix(kind, graphs, true);
        CHECK(m.normalized);
        CHECK(max_asymmetry(m.values) == 0.0);
        for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
            CHECK(m.values(i, i) == 1.0);
            for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
                CHECK(m.values(i, j) >= 0.0);
                CHECK(m.values(i, j) <= 1.0 + 1e-12);
            }
        }
        const double lo = psd_check(m);
        CHECK(lo >= -1e-8 * 50);
        CHECK(lo == doctest::Approx(eigen_min(m.values)).epsilon(1e-9).scale(1.0));

        const auto raw = gram_matrix(kind, graphs, false).values;
        for (Eigen::Index i = 0; i < raw.rows(); ++i) {
            for (Eigen::Index j = 0; j < raw.cols(); ++j) {
                CHECK(m.values(i, j) == doctest::Approx(raw(i, j) / std::sqrt(raw(i, i) * raw(j, j))).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("Gram assembly is permutation-equivariant and thread-count independent") {
    auto graphs = random_graphs(43, 40, 12, 5);
    std::vector<std::size_t> perm(graphs.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(1);
    rng.shuffle(perm);
    std::vector<PatientGraph> permuted;
    for (auto p : perm) permuted.push_back(graphs[p]);
    for (const auto& kind : {KernelKind::wl(3), KernelKind::temporal(1e-3), KernelKind::vertex_histogram()}) {
        const auto a = gram_matrix(kind, graphs, true).values;
        const auto b = gram_matrix(kind, permuted, true, 4).values;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            for (std::size_t j = 0; j < perm.size(); ++j) {
                CHECK(b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
                      a(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j])));
            }
        }
        CHECK(gram_matrix(kind, graphs, true, 3).values == a);
    }
}

TEST_CASE("normalizing a zero self-kernel names the graph") {
    const std::vector<PatientGraph> graphs{chain({"a"}, {}), PatientGraph{}};
    try {
        gram_matrix(KernelKind::temporal(1.0), graphs, true);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
        CHECK(std::string(e.what()).find("graph 0") != std::string::npos);
    }
}

TEST_CASE("cross_gram: consistency with gram rows") {
    const auto graphs = random_graphs(47, 30, 12, 5);
    for (const auto& kind : {KernelKind::wl(3), KernelKind::temporal(1e-3), KernelKind::vertex_histogram()}) {
        const auto gram = gram_matrix(kind, graphs, true).values;
        const auto diag = self_kernels(kind, graphs);
        const auto cross = cross_gram(kind, graphs, graphs, diag, true);
        CHECK(cross.rows() == gram.rows());
        for (Eigen::Index i = 0; i < gram.rows(); ++i) {
            for (Eigen::Index j = 0; j < gram.cols(); ++j) {
                CHECK(cross(i, j) == doctest::Approx(gram(i, j)).epsilon(1e-15));
            }
        }
        const std::span<const PatientGraph> head(graphs.data(), 20);
        const std::span<const PatientGraph> tail(graphs.data() + 20, 10);
        const auto head_diag = self_kernels(kind, head);
        const auto part = cross_gram(kind, tail, head, head_diag, true);
        CHECK(part.rows() == 10);
        CHECK(part.cols() == 20);
        for (Eigen::Index i = 0; i < 10; ++i) {
            for (Eigen::Index j = 0; j < 20; ++j) {
                CHECK(part(i, j) == doctest::Approx(gram(20 + i, j)).epsilon(1e-15));
            }
        }
        CHECK(cross_gram(kind, std::span<const PatientGraph>{}, head, head_diag, true).rows() == 0);
        const std::vector<PatientGraph> same{graphs[3]};
        CHECK(cross_gram(kind, same, head, head_diag, true)(0, 3) == doctest::Approx(1.0).epsilon(1e-15));
    }
    CHECK_THROWS_AS(cross_gram(KernelKind::wl(1), graphs, graphs, std::vector<double>(2, 1.0), true), Error);
}

TEST_CASE("psd_check examples and symmetry contract") {
    GramMatrix identity{Eigen::MatrixXd::Identity(3, 3), KernelKind::vertex_histogram(), true};
    CHECK(psd_check(identity) == doctest::Approx(1.0));
    Eigen::MatrixXd m(2, 2);
    m << 1, 2, 2, 1;
    CHECK(min_eigenvalue(m) == doctest::Approx(-1.0));
    m(0, 1) = 2.0 + 1e-6;
    CHECK_THROWS_AS(min_eigenvalue(m), Error);
}

TEST_CASE("Jacobi eigensolver agrees with Eigen on random symmetric matrices") {
    Rng rng(53);
    for (int trial = 0; trial < 30; ++trial) {
        const auto n = static_cast<Eigen::Index>(rng.range(1, 25));
        Eigen::MatrixXd a(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.uniform(-3.0, 3.0);
        }
        const auto mine = jacobi_eigen(a, true);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(a);
        for (Eigen::Index k = 0; k < n; ++k) {
            CHECK(mine.values[k] == doctest::Approx(ref.eigenvalues()[k]).epsilon(1e-10).scale(10.0));
        }
        const Eigen::MatrixXd rebuilt = mine.vectors * mine.values.asDiagonal() * mine.vectors.transpose();
        CHECK((rebuilt - a).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((mine.vectors.transpose() * mine.vectors - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("KGRM round-trip and CSV export") {
    const auto graphs = random_graphs(59, 12, 8, 4);
    const auto m = gram_matrix(KernelKind::temporal(1e-3), graphs, true);
    std::stringstream buf;
    save_gram(buf, m);
    const std::string bytes = buf.str();
    CHECK(bytes.substr(0, 4) == "KGRM");
    CHECK(bytes.size() == 4 + 4 + 4 + 4 + 1 + 12 * 12 * 8);
    const auto back = load_gram(buf);
    CHECK(back.values == m.values);
    CHECK(back.kernel.type == KernelType::temporal_topological);
    CHECK(back.normalized);

    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(load_gram(truncated), Error);
    std::stringstream wrong("KNET");
    CHECK_THROWS_AS(load_gram(wrong), Error);

    std::ostringstream csv;
    write_gram_csv(csv, m);
    const std::string text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 12);
}
