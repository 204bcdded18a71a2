#include <doctest.h>

#include <cmath>
#include <sstream>

#include "error.hpp"
#include "metric_net.hpp"
#include "oracles.hpp"
#include "rng.hpp"

using namespace gk;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0, double hi = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(lo, hi);
    }
    return m;
}

std::vector<std::vector<double>> columns(const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.emplace_back(m.col(j).data(), m.col(j).data() + m.rows());
    return out;
}

// Two well-separated clusters of points in the plane; each Gram is an RBF
// kernel of the coordinates at a different bandwidth.
struct Toy {
    GramMatrix grams[3];
    std::vector<int> labels;
};

Toy separable_toy(std::uint64_t seed, int n) {
    Rng rng(seed);
    Toy toy;
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i) {
        const int y = i % 2;
        toy.labels.push_back(y);
        x(i, 0) = (y ? 2.0 : -2.0) + rng.uniform(-0.5, 0.5);
        x(i, 1) = rng.uniform(-1.0, 1.0);
    }
    const double widths[3] = {1.0, 4.0, 16.0};
    for (int k = 0; k < 3; ++k) {
        toy.grams[k].values.resize(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) toy.grams[k].values(i, j) = std::exp(-(x.row(i) - x.row(j)).squaredNorm() / widths[k]);
        }
        toy.grams[k].normalized = true;
    }
    return toy;
}

NetConfig small_config(DistanceMetric metric, std::uint64_t seed) {
    NetConfig c;
    c.embed_dim_per_kernel = 16;
    c.fusion_dim = 8;
    c.classifier_dim = 8;
    c.metric = metric;
    c.learning_rate = 1e-2;
    c.batch_size = 8;
    c.max_epochs = 150;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("distances: examples") {
    CHECK(euclidean_distance(vec({0, 0}), vec({3, 4})) == 5.0);
    CHECK(euclidean_distance(vec({1, 2}), vec({1, 2})) == 0.0);
    CHECK(cosine_distance(vec({1, 2, 3}), vec({1, 2, 3})) == doctest::Approx(0.0).scale(1.0));
    CHECK(cosine_distance(vec({1, 0}), vec({0, 1})) == 1.0);
    CHECK(cosine_distance(vec({1, 0}), vec({-1, 0})) == 2.0);
    CHECK_THROWS_AS(cosine_distance(vec({0, 0}), vec({1, 0})), Error);
    CHECK_THROWS_AS(euclidean_distance(vec({0, 0}), vec({1, 0, 0})), Error);
}

TEST_CASE("distances: symmetry, range, triangle inequality, scaling") {
    Rng rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const auto d = static_cast<Eigen::Index>(rng.range(1, 10));
        const Eigen::VectorXd a = random_matrix(rng, d, 1).col(0);
        const Eigen::VectorXd b = random_matrix(rng, d, 1).col(0);
        const Eigen::VectorXd c = random_matrix(rng, d, 1).col(0);
        CHECK(std::abs(euclidean_distance(a, b) - euclidean_distance(b, a)) <= 1e-12);
        CHECK(std::abs(cosine_distance(a, b) - cosine_distance(b, a)) <= 1e-12);
        const double cd = cosine_distance(a, b);
        CHECK(cd >= 0.0);
        CHECK(cd <= 2.0);
        CHECK(euclidean_distance(a, c) <= euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-12);
        const double scale = rng.uniform(0.01, 100.0);
        CHECK(cosine_distance(scale * a, scale * b) == doctest::Approx(cd).epsilon(1e-9).scale(1.0));
        CHECK(euclidean_distance(scale * a, scale * b) == doctest::Approx(scale * euclidean_distance(a, b)).epsilon(1e-12));
    }
}

TEST_CASE("contrastive loss: examples") {
    Eigen::MatrixXd same = Eigen::MatrixXd::Ones(3, 4);
    const std::vector<int> all_one{1, 1, 1, 1};
    CHECK(contrastive_loss(same, all_one, 1.0, DistanceMetric::euclidean) == 0.0);

    Eigen::MatrixXd two(1, 2);
    two << 0.0, 0.5;
    const std::vector<int> mixed{1, 0};
    CHECK(contrastive_loss(two, mixed, 1.0, DistanceMetric::euclidean) == 0.25);

    Eigen::MatrixXd far(1, 2);
    far << 0.0, 3.0;
    CHECK(contrastive_loss(far, mixed, 1.0, DistanceMetric::euclidean) == 0.0);
    CHECK_THROWS_AS(contrastive_loss(far, mixed, 0.0, DistanceMetric::euclidean), Error);
    CHECK_THROWS_AS(contrastive_loss(Eigen::MatrixXd::Zero(2, 2), mixed, 1.0, DistanceMetric::cosine), Error);
}

TEST_CASE("contrastive loss matches the all-pairs oracle") {
    Rng rng(7);
    for (int trial = 0; trial < 60; ++trial) {
        const auto b = static_cast<Eigen::Index>(rng.range(1, 32));
        const auto d = static_cast<Eigen::Index>(rng.range(1, 6));
        const Eigen::MatrixXd e = random_matrix(rng, d, b);
        std::vector<int> y;
        for (Eigen::Index i = 0; i < b; ++i) y.push_back(static_cast<int>(rng.below(2)));
        const double lambda = rng.uniform(0.1, 3.0);
        for (const bool cosine : {false, true}) {
            const double mine = contrastive_loss(e, y, lambda, cosine ? DistanceMetric::cosine : DistanceMetric::euclidean);
            const double ref = oracle::contrastive(columns(e), y, lambda, cosine);
            CHECK(std::abs(mine - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST_CASE("binary cross-entropy: examples") {
    const std::vector<double> half{0.5, 0.5, 0.5};
    const std::vector<int> y{1, 0, 1};
    CHECK(binary_cross_entropy(half, y) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const std::vector<double> perfect{1.0, 0.0, 1.0};
    const double near_zero = binary_cross_entropy(perfect, y);
    CHECK(near_zero > 0.0);
    CHECK(near_zero < 2e-7);
    const std::vector<double> quarter{0.25};
    const std::vector<int> one{1};
    CHECK(binary_cross_entropy(quarter, one) == doctest::Approx(1.3862943611198906).epsilon(1e-15));
}

TEST_CASE("forward pass: zero net and hand-computed 1x1 net") {
    EmbedNet zero(5, 4, 3);
    Rng rng(9);
    const std::array<Eigen::VectorXd, 3> rows{random_matrix(rng, 5, 1).col(0), random_matrix(rng, 5, 1).col(0),
                                              random_matrix(rng, 5, 1).col(0)};
    CHECK(forward_embed(zero, rows).isZero(0.0));

    EmbedNet net(1, 1, 1);
    net.tensor(EmbedNet::kernel_weight(0))(0, 0) = 2.0;
    net.tensor(EmbedNet::kernel_bias(0))(0, 0) = -0.5;  // relu(0.5) = 0.5
    net.tensor(EmbedNet::kernel_weight(1))(0, 0) = -1.0;  // relu(-0.5) = 0
    net.tensor(EmbedNet::kernel_weight(2))(0, 0) = 1.0;
    net.tensor(EmbedNet::kernel_bias(2))(0, 0) = 0.25;  // relu(0.75) = 0.75
    auto fusion = net.tensor(EmbedNet::fusion_weight);
    fusion(0, 0) = 1.0;
    fusion(0, 1) = 3.0;
    fusion(0, 2) = 2.0;
    net.tensor(EmbedNet::fusion_bias)(0, 0) = 0.1;
    net.tensor(EmbedNet::classifier_weight)(0, 0) = 0.5;
    net.tensor(EmbedNet::classifier_bias)(0, 0) = -1.0;
    const std::array<Eigen::VectorXd, 3> half{vec({0.5}), vec({0.5}), vec({0.5})};
    const auto e = forward_embed(net, half);
    CHECK(e[0] == doctest::Approx(2.1).epsilon(1e-15));
    CHECK(forward_embed(net, half) == e);

    std::array<Eigen::MatrixXd, 3> cross{Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::MatrixXd::Constant(1, 1, 0.5),
                                         Eigen::MatrixXd::Constant(1, 1, 0.5)};
    const auto p = predict(net, cross);
    CHECK(p[0].probability == doctest::Approx(1.0 / (1.0 + std::exp(-0.05))).epsilon(1e-15));
    CHECK(p[0].label == 1);

    const std::array<Eigen::VectorXd, 3> wrong{vec({0.5, 1.0}), vec({0.5}), vec({0.5})};
    CHECK_THROWS_AS(forward_embed(net, wrong), Error);
}

TEST_CASE("predict: zero classifier gives one half and the positive label") {
    EmbedNet net(4, 3, 2);
    net.initialize(3);
    net.tensor(EmbedNet::classifier_weight).setZero();
    net.tensor(EmbedNet::classifier_bias).setZero();
    Rng rng(1);
    std::array<Eigen::MatrixXd, 3> cross{random_matrix(rng, 6, 4), random_matrix(rng, 6, 4), random_matrix(rng, 6, 4)};
    for (const auto& p : predict(net, cross)) {
        CHECK(p.probability == 0.5);
        CHECK(p.label == 1);
    }
    net.tensor(EmbedNet::classifier_bias)(0, 0) = 800.0;
    for (const auto& p : predict(net, cross)) CHECK(p.probability < 1.0);
    net.tensor(EmbedNet::classifier_bias)(0, 0) = -800.0;
    for (const auto& p : predict(net, cross)) {
        CHECK(p.probability > 0.0);
        CHECK(p.label == 0);
    }
    cross[1] = random_matrix(rng, 6, 5);
    CHECK_THROWS_AS(predict(net, cross), Error);
}

TEST_CASE("joint loss: parts add up and collapse to zero at the optimum") {
    Rng rng(13);
    EmbedNet net(6, 4, 3);
    net.initialize(13);
    KernelBatch batch{random_matrix(rng, 6, 5, 0, 1), random_matrix(rng, 6, 5, 0, 1), random_matrix(rng, 6, 5, 0, 1)};
    const std::vector<int> y{1, 0, 0, 1, 1};
    const auto parts = joint_loss(net, batch, y, small_config(DistanceMetric::euclidean, 1));
    CHECK(parts.joint == parts.contrastive + parts.crossentropy);
    CHECK(parts.joint >= std::max(parts.contrastive, parts.crossentropy));
    CHECK(std::isfinite(parts.joint));

    // Same-class batch, constant embedding, confident classifier.
    EmbedNet flat(6, 4, 3);
    flat.tensor(EmbedNet::fusion_bias).setConstant(1.0);
    flat.tensor(EmbedNet::classifier_bias)(0, 0) = 40.0;
    const std::vector<int> ones{1, 1, 1, 1, 1};
    const auto best = joint_loss(flat, batch, ones, small_config(DistanceMetric::cosine, 1));
    CHECK(best.contrastive == doctest::Approx(0.0).scale(1.0));
    CHECK(best.joint < 1e-6);
}

TEST_CASE("analytic gradients agree with central differences") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const auto n = static_cast<Eigen::Index>(rng.range(2, 10));
        const int embed = static_cast<int>(rng.range(1, 16));
        const int fusion = static_cast<int>(rng.range(1, 16));
        const auto b = static_cast<Eigen::Index>(rng.range(1, 8));
        EmbedNet net(n, embed, fusion);
        net.initialize(rng.next());
        KernelBatch batch{random_matrix(rng, n, b, 0, 1), random_matrix(rng, n, b, 0, 1), random_matrix(rng, n, b, 0, 1)};
        std::vector<int> y;
        for (Eigen::Index i = 0; i < b; ++i) y.push_back(static_cast<int>(rng.below(2)));
        NetConfig config = small_config(trial % 2 ? DistanceMetric::cosine : DistanceMetric::euclidean, 0);
        config.embed_dim_per_kernel = embed;
        config.fusion_dim = config.classifier_dim = fusion;
        config.margin_lambda = rng.uniform(0.2, 2.0);
        CAPTURE(trial);
        CHECK(gradient_check(net, batch, y, config, 1e-5) <= 1e-4);
    }
    EmbedNet net(3, 2, 2);
    KernelBatch batch{Eigen::MatrixXd::Ones(3, 2), Eigen::MatrixXd::Ones(3, 2), Eigen::MatrixXd::Ones(3, 2)};
    const std::vector<int> y{0, 1};
    CHECK_THROWS_AS(gradient_check(net, batch, y, small_config(DistanceMetric::euclidean, 0), 1e-2), Error);
}

TEST_CASE("Adamax: two steps by hand") {
    Adamax opt;
    opt.learning_rate = 0.01;
    opt.reset(1);
    Eigen::VectorXd p = vec({1.0});
    opt.update(p, vec({0.2}));
    const double m1 = 0.1 * 0.2, u1 = 0.2;
    const double p1 = 1.0 - (0.01 / (1.0 - 0.9)) * m1 / (u1 + 1e-8);
    CHECK(p[0] == doctest::Approx(p1).epsilon(1e-15));
    opt.update(p, vec({-0.1}));
    const double m2 = 0.9 * m1 + 0.1 * -0.1, u2 = std::max(0.999 * u1, 0.1);
    const double p2 = p1 - (0.01 / (1.0 - 0.81)) * m2 / (u2 + 1e-8);
    CHECK(p[0] == doctest::Approx(p2).epsilon(1e-15));
    CHECK(opt.step == 2);
}

TEST_CASE("training: zero epochs, determinism, loss decrease, self-prediction") {
    const Toy toy = separable_toy(21, 40);
    const GramTriple grams{&toy.grams[0], &toy.grams[1], &toy.grams[2]};

    auto none = small_config(DistanceMetric::euclidean, 4);
    none.max_epochs = 0;
    const auto vacuous = train(grams, toy.labels, none);
    CHECK(vacuous.trace.epochs.empty());
    CHECK(vacuous.trace.stop_reason == StopReason::max_epochs);
    EmbedNet fresh(40, 16, 8);
    fresh.initialize(derive_seed(4, 0));
    CHECK(vacuous.net == fresh);

    for (const auto metric : {DistanceMetric::euclidean, DistanceMetric::cosine}) {
        const auto config = small_config(metric, 4);
        const auto a = train(grams, toy.labels, config);
        const auto b = train(grams, toy.labels, config);
        CHECK(a.net == b.net);
        CHECK(a.trace == b.trace);
        REQUIRE(!a.trace.epochs.empty());
        CHECK(a.trace.epochs.back().joint < 0.5 * a.trace.epochs.front().joint);
        for (const auto& e : a.trace.epochs) {
            CHECK(e.contrastive >= 0.0);
            CHECK(e.crossentropy >= 0.0);
        }

        const std::array<Eigen::MatrixXd, 3> rows{toy.grams[0].values, toy.grams[1].values, toy.grams[2].values};
        const auto preds = predict(a.net, rows);
        int correct = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i].label == toy.labels[i] ? 1 : 0;
        CHECK(correct == 40);
    }

    const std::vector<int> one_class(40, 1);
    CHECK_THROWS_AS(train(grams, one_class, small_config(DistanceMetric::euclidean, 1)), Error);
    const std::vector<int> short_labels(39, 0);
    CHECK_THROWS_AS(train(grams, short_labels, small_config(DistanceMetric::euclidean, 1)), Error);
}

TEST_CASE("early stopping reports convergence") {
    const Toy toy = separable_toy(22, 20);
    const GramTriple grams{&toy.grams[0], &toy.grams[1], &toy.grams[2]};
    auto config = small_config(DistanceMetric::cosine, 2);
    config.learning_rate = 1e-9;
    config.early_stop_patience = 3;
    config.max_epochs = 500;
    const auto r = train(grams, toy.labels, config);
    CHECK(r.trace.stop_reason == StopReason::converged);
    CHECK(r.trace.stop_epoch == static_cast<int>(r.trace.epochs.size()));
    CHECK(r.trace.stop_epoch < 500);
}

TEST_CASE("config validation") {
    NetConfig c;
    CHECK_NOTHROW(c.validate());
    c.classifier_dim = c.fusion_dim + 1;
    CHECK_THROWS_AS(c.validate(), Error);
    c = NetConfig{};
    c.margin_lambda = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = NetConfig{};
    c.embed_dim_per_kernel = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    const auto full = NetConfig::full_scale();
    CHECK(full.embed_dim_per_kernel == 5000);
    CHECK(full.fusion_dim == 50);
    CHECK(parse_metric("cosine") == DistanceMetric::cosine);
    CHECK_THROWS_AS(parse_metric("manhattan"), Error);
}

TEST_CASE("model container round-trip and trace CSV") {
    const Toy toy = separable_toy(23, 12);
    const GramTriple grams{&toy.grams[0], &toy.grams[1], &toy.grams[2]};
    auto config = small_config(DistanceMetric::cosine, 8);
    config.max_epochs = 5;
    const auto r = train(grams, toy.labels, config);
    std::stringstream buf;
    save_model(buf, r.net, config);
    CHECK(buf.str().substr(0, 4) == "KNET");
    const auto back = load_model(buf);
    CHECK(back.net == r.net);
    CHECK(back.config.metric == DistanceMetric::cosine);
    CHECK(back.config.seed == 8);
    CHECK(back.config.max_epochs == 5);

    const std::string bytes = buf.str();
    std::stringstream cut(bytes.substr(0, bytes.size() - 1));
    CHECK_THROWS_AS(load_model(cut), Error);

    std::ostringstream csv;
    write_trace_csv(csv, r.trace);
    std::istringstream lines(csv.str());
    std::string header;
    std::getline(lines, header);
    CHECK(header == "epoch,contrastive,crossentropy,joint");
    int rows = 0;
    for (std::string line; std::getline(lines, line);) ++rows;
    CHECK(rows == 5);
}
