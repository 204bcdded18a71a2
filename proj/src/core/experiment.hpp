#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metric_net.hpp"
#include "stats.hpp"
#include "synth.hpp"

namespace gk {

struct ExperimentConfig {
    int folds = 10;
    std::uint64_t seed = 0;
    int wl_iterations = 3;
    double tp_alpha = 1e-3;
    NetConfig net;  // `metric` and `seed` are set per configuration
    std::vector<DistanceMetric> metrics = {DistanceMetric::euclidean, DistanceMetric::cosine};
    std::vector<BalanceMode> balances = {BalanceMode::balanced, BalanceMode::imbalanced_70_30};
    bool baselines = true;
    int threads = 1;  // folds run concurrently; each training stays sequential
    std::string embedding_dir;  // when set, fold-0 embeddings are exported per configuration

    void validate() const;
};

inline constexpr const char* kMetricColumns[3] = {"acc", "f1", "auc"};

struct ModelResult {
    std::string model;  // Euclidean, Cosine, SVM, LR
    std::vector<ClassificationMetrics> folds;
    std::array<Summary, 3> summary;          // acc, f1, auc
    std::array<bool, 3> beats_baselines{};   // significant at 0.01 over every baseline
    std::vector<int> stop_epochs;            // metric-net models only
};

struct PairTest {
    std::string model_a;
    std::string model_b;
    std::array<TTestResult, 3> tests;  // acc, f1, auc
};

struct BalanceSection {
    BalanceMode mode = BalanceMode::balanced;
    std::size_t cases = 0;
    std::size_t failures = 0;
    std::vector<ModelResult> models;
    std::vector<PairTest> tests;

    const ModelResult* find(const std::string& model) const;
    const PairTest* find_test(const std::string& a, const std::string& b) const;
};

struct EvalReport {
    std::string title;
    int folds = 0;
    std::uint64_t seed = 0;
    std::vector<BalanceSection> sections;

    const BalanceSection* find(BalanceMode mode) const;
};

std::string model_name(DistanceMetric metric);

EvalReport run_experiment(const std::vector<LabeledCase>& cases, const ExperimentConfig& config,
                          const std::string& title = "");

std::string report_json(const EvalReport& report);
void write_report_text(std::ostream& out, const EvalReport& report);

struct EmbeddingTable {
    std::vector<std::string> ids;
    std::vector<std::string> split;
    std::vector<int> labels;
    Eigen::MatrixXd embeddings;  // cases x fusion_dim
    Eigen::MatrixXd projection;  // cases x 2
};

// Top-2 principal components of the centered rows; each component's
// largest-magnitude loading is made positive.
Eigen::MatrixXd pca_2d(const Eigen::MatrixXd& rows);

// Train rows are the training Grams' rows; test rows come from cross-Grams.
EmbeddingTable export_embeddings(const EmbedNet& net, const std::array<Eigen::MatrixXd, kKernelCount>& train_rows,
                                 const std::array<Eigen::MatrixXd, kKernelCount>& test_rows,
                                 const std::vector<const LabeledCase*>& train_cases,
                                 const std::vector<const LabeledCase*>& test_cases);

void write_embeddings_csv(std::ostream& out, const EmbeddingTable& table);

}  // namespace gk
