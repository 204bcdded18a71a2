#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gk {

struct FoldPlan {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<int> assignment;  // fold index per case

    std::vector<std::size_t> test_indices(int fold) const;
    std::vector<std::size_t> train_indices(int fold) const;
};

// Seeded shuffle within each class, then round-robin assignment continuing
// across classes so fold sizes differ by at most one.
FoldPlan stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed);

struct ClassificationMetrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double auc = 0.0;
};

ClassificationMetrics compute_metrics(std::span<const double> probs, std::span<const int> preds,
                                      std::span<const int> labels);

// Mann-Whitney AUC with ties counted one half.
double roc_auc(std::span<const double> probs, std::span<const int> labels);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    bool significant = false;  // p < 0.01
    bool degenerate = false;   // zero variance of differences, nonzero mean
};

inline constexpr double kSignificanceLevel = 0.01;

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);
// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  // sample (n - 1)
};

Summary summarize(std::span<const double> values);

}  // namespace gk
