#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ehr.hpp"
#include "stats.hpp"

namespace gk {

// L2-normalized bag-of-codes rows (cases x vocabulary). The vocabulary comes
// from the training cases only; unseen test codes are dropped.
class BagOfCodes {
public:
    explicit BagOfCodes(std::span<const LabeledCase* const> training);
    Eigen::MatrixXd transform(std::span<const LabeledCase* const> cases) const;
    std::size_t vocabulary_size() const { return vocabulary_.size(); }

private:
    std::vector<std::string> vocabulary_;  // sorted
};

struct LinearModel {
    Eigen::VectorXd weights;
    double bias = 0.0;

    Eigen::VectorXd margins(const Eigen::MatrixXd& x) const;
};

// (1/2)|w|^2 + C * sum log-loss, full-batch gradient descent.
LinearModel fit_logistic_regression(const Eigen::MatrixXd& x, std::span<const int> labels, double c,
                                    std::uint64_t seed, int iterations = 2000);

// (1/2)|w|^2 + C * sum hinge, stochastic subgradient (Pegasos schedule);
// the bias is learned as the weight of a constant feature.
LinearModel fit_linear_svm(const Eigen::MatrixXd& x, std::span<const int> labels, double c, std::uint64_t seed,
                           int epochs = 50);

struct BaselinePredictions {
    std::vector<double> probs;
    std::vector<int> preds;
};

struct FoldBaselines {
    BaselinePredictions lr;
    BaselinePredictions svm;
};

// Per fold of `folds`: fit both models on the training cases, score the
// held-out ones. Regularization constant 1 for both.
std::vector<FoldBaselines> run_baselines(const std::vector<LabeledCase>& cases, const FoldPlan& folds,
                                         std::uint64_t seed);

FoldBaselines run_baselines_fold(const std::vector<LabeledCase>& cases, std::span<const std::size_t> train,
                                 std::span<const std::size_t> test, std::uint64_t seed);

}  // namespace gk
