#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "error.hpp"
#include "experiment.hpp"
#include "rng.hpp"

using namespace gk;

namespace {

ExperimentConfig smoke_config() {
    ExperimentConfig c;
    c.folds = 2;
    c.seed = 5;
    c.net.embed_dim_per_kernel = 16;
    c.net.fusion_dim = 8;
    c.net.classifier_dim = 8;
    c.net.learning_rate = 1e-2;
    c.net.batch_size = 16;
    c.net.max_epochs = 30;
    return c;
}

std::vector<LabeledCase> smoke_cohort() {
    CohortSpec spec;
    spec.n_cases = 40;
    spec.seed = 3;
    return generate_cohort(spec);
}

}  // namespace

TEST_CASE("experiment smoke run: report shape and determinism") {
    const auto cases = smoke_cohort();
    const auto config = smoke_config();
    const auto report = run_experiment(cases, config, "Smoke");
    REQUIRE(report.sections.size() == 2);
    for (const auto& section : report.sections) {
        REQUIRE(section.models.size() == 4);
        CHECK(section.models[0].model == "Euclidean");
        CHECK(section.models[1].model == "Cosine");
        CHECK(section.models[2].model == "SVM");
        CHECK(section.models[3].model == "LR");
        for (const auto& m : section.models) {
            CHECK(m.folds.size() == 2);
            for (const auto& s : m.summary) {
                CHECK(std::isfinite(s.mean));
                CHECK(s.mean >= 0.0);
                CHECK(s.mean <= 1.0);
                CHECK(s.stddev >= 0.0);
            }
        }
        CHECK(section.tests.size() == 6);
        CHECK(section.find_test("Euclidean", "Cosine") != nullptr);
    }
    CHECK(report.find(BalanceMode::balanced)->cases == 40);

    const auto again = run_experiment(cases, config, "Smoke");
    CHECK(report_json(again) == report_json(report));

    auto threaded = config;
    threaded.threads = 2;
    CHECK(report_json(run_experiment(cases, threaded, "Smoke")) == report_json(report));
}

TEST_CASE("experiment report: JSON schema and text table") {
    const auto cases = smoke_cohort();
    auto config = smoke_config();
    config.balances = {BalanceMode::imbalanced_70_30};
    config.metrics = {DistanceMetric::cosine};
    const auto report = run_experiment(cases, config, "Schema");
    const auto doc = nlohmann::json::parse(report_json(report));
    CHECK(doc["title"] == "Schema");
    CHECK(doc["folds"] == 2);
    const auto& section = doc["configurations"]["imbalanced"];
    CHECK(section["models"].size() == 3);
    CHECK(section["models"]["Cosine"]["folds"].size() == 2);
    CHECK(section["models"]["Cosine"]["mean"].contains("auc"));
    CHECK(doc["t_tests"]["imbalanced"].contains("Cosine vs SVM"));
    CHECK_FALSE(doc["configurations"].contains("balanced"));

    std::ostringstream text;
    write_report_text(text, report);
    CHECK(text.str().rfind("Evaluation Results for Schema", 0) == 0);
    CHECK(text.str().find(" ± ") != std::string::npos);
}

TEST_CASE("experiment writes fold-0 embeddings when asked") {
    const auto dir = std::filesystem::temp_directory_path() / "gkpred_experiment_embeddings";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    auto config = smoke_config();
    config.balances = {BalanceMode::balanced};
    config.baselines = false;
    config.embedding_dir = dir.string();
    const auto report = run_experiment(smoke_cohort(), config);
    CHECK(report.sections.front().models.size() == 2);
    for (const char* name : {"embeddings_balanced_euclidean.csv", "embeddings_balanced_cosine.csv"}) {
        std::ifstream in(dir / name);
        REQUIRE(in);
        std::string header;
        std::getline(in, header);
        CHECK(header == "id,split,label,e_0,e_1,e_2,e_3,e_4,e_5,e_6,e_7,x2d,y2d");
        int rows = 0;
        for (std::string line; std::getline(in, line);) ++rows;
        CHECK(rows == 40);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("experiment config validation and stage errors") {
    auto config = smoke_config();
    config.folds = 1;
    CHECK_THROWS_AS(run_experiment(smoke_cohort(), config), Error);
    config = smoke_config();
    config.folds = 30;
    try {
        run_experiment(smoke_cohort(), config);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::data);
    }
}

TEST_CASE("PCA projection: rotation, zero variance, sign convention") {
    Rng rng(2);
    Eigen::MatrixXd pts(12, 2);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) pts.row(i) << rng.uniform(-5, 5), rng.uniform(-1, 1);
    const auto proj = pca_2d(pts);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        for (Eigen::Index j = 0; j < pts.rows(); ++j) {
            CHECK(std::abs((proj.row(i) - proj.row(j)).norm() - (pts.row(i) - pts.row(j)).norm()) <= 1e-9);
        }
    }
    // The first component lies along +x, so projected x follows input x.
    for (Eigen::Index i = 1; i < pts.rows(); ++i) {
        if (pts(i, 0) > pts(0, 0) + 2.0) CHECK(proj(i, 0) > proj(0, 0));
    }

    const auto flat = pca_2d(Eigen::MatrixXd::Constant(5, 4, 3.0));
    CHECK(flat.isZero(0.0));
    CHECK_THROWS_AS(pca_2d(Eigen::MatrixXd::Ones(2, 3)), Error);

    Eigen::MatrixXd wide(6, 5);
    for (Eigen::Index i = 0; i < wide.rows(); ++i) {
        for (Eigen::Index j = 0; j < wide.cols(); ++j) wide(i, j) = rng.uniform(-1, 1);
    }
    CHECK(pca_2d(wide).cols() == 2);
    CHECK(pca_2d(wide) == pca_2d(wide));
}

TEST_CASE("exported embeddings of a trained separable model keep classes apart") {
    // Two clusters in the plane; RBF Grams at three widths.
    Rng rng(30);
    const int n = 40;
    Eigen::MatrixXd x(n, 2);
    std::vector<int> labels;
    std::vector<LabeledCase> cases(n);
    for (int i = 0; i < n; ++i) {
        labels.push_back(i % 2);
        cases[static_cast<std::size_t>(i)].label = i % 2;
        cases[static_cast<std::size_t>(i)].record.patient_id = "E" + std::to_string(i);
        x(i, 0) = (i % 2 ? 2.0 : -2.0) + rng.uniform(-0.5, 0.5);
        x(i, 1) = rng.uniform(-1, 1);
    }
    GramMatrix grams[3];
    const double widths[3] = {1.0, 4.0, 16.0};
    for (int k = 0; k < 3; ++k) {
        grams[k].values.resize(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) grams[k].values(i, j) = std::exp(-(x.row(i) - x.row(j)).squaredNorm() / widths[k]);
        }
    }
    NetConfig config;
    config.embed_dim_per_kernel = 16;
    config.fusion_dim = config.classifier_dim = 8;
    config.learning_rate = 1e-2;
    config.batch_size = 8;
    config.max_epochs = 150;
    config.seed = 6;
    const auto trained = train({&grams[0], &grams[1], &grams[2]}, labels, config);

    std::vector<const LabeledCase*> ptrs;
    for (const auto& c : cases) ptrs.push_back(&c);
    const std::array<Eigen::MatrixXd, 3> rows{grams[0].values, grams[1].values, grams[2].values};
    const std::array<Eigen::MatrixXd, 3> none{Eigen::MatrixXd(0, n), Eigen::MatrixXd(0, n), Eigen::MatrixXd(0, n)};
    const auto table = export_embeddings(trained.net, rows, none, ptrs, {});
    REQUIRE(table.projection.rows() == n);
    double within = 0, between = 0;
    int nw = 0, nb = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = (table.projection.row(i) - table.projection.row(j)).norm();
            if (labels[i] == labels[j]) {
                within += d;
                ++nw;
            } else {
                between += d;
                ++nb;
            }
        }
    }
    CHECK((between / nb) / (within / nw) > 1.0);
    CHECK(table.split[0] == "train");

    std::ostringstream csv;
    write_embeddings_csv(csv, table);
    CHECK(csv.str().rfind("id,split,label,e_0,", 0) == 0);
}
