#include "baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "error.hpp"
#include "rng.hpp"

namespace gk {

namespace {

double logistic(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

std::vector<const LabeledCase*> pick(const std::vector<LabeledCase>& cases, std::span<const std::size_t> idx) {
    std::vector<const LabeledCase*> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(&cases.at(i));
    return out;
}

BaselinePredictions score(const LinearModel& model, const Eigen::MatrixXd& x) {
    const Eigen::VectorXd m = model.margins(x);
    BaselinePredictions out;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        out.probs.push_back(logistic(m[i]));
        out.preds.push_back(m[i] >= 0.0 ? 1 : 0);
    }
    return out;
}

}  // namespace

BagOfCodes::BagOfCodes(std::span<const LabeledCase* const> training) {
    for (const auto* c : training) {
        for (const auto& e : c->record.events) vocabulary_.push_back(e.code);
    }
    std::sort(vocabulary_.begin(), vocabulary_.end());
    vocabulary_.erase(std::unique(vocabulary_.begin(), vocabulary_.end()), vocabulary_.end());
}

Eigen::MatrixXd BagOfCodes::transform(std::span<const LabeledCase* const> cases) const {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cases.size()),
                                              static_cast<Eigen::Index>(vocabulary_.size()));
    for (std::size_t r = 0; r < cases.size(); ++r) {
        for (const auto& e : cases[r]->record.events) {
            const auto it = std::lower_bound(vocabulary_.begin(), vocabulary_.end(), e.code);
            if (it != vocabulary_.end() && *it == e.code) {
                x(static_cast<Eigen::Index>(r), it - vocabulary_.begin()) += 1.0;
            }
        }
        const double norm = x.row(static_cast<Eigen::Index>(r)).norm();
        if (norm > 0.0) x.row(static_cast<Eigen::Index>(r)) /= norm;
    }
    return x;
}

Eigen::VectorXd LinearModel::margins(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd m = x * weights;
    m.array() += bias;
    return m;
}

LinearModel fit_logistic_regression(const Eigen::MatrixXd& x, std::span<const int> labels, double c,
                                    std::uint64_t seed, int iterations) {
    if (x.rows() != static_cast<Eigen::Index>(labels.size()) || x.rows() == 0) {
        fail(ErrorKind::invalid_argument, "logistic regression: row and label counts differ");
    }
    Rng rng(seed);
    LinearModel model;
    model.weights.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) model.weights[j] = rng.uniform(-0.01, 0.01);

    Eigen::VectorXd y(x.rows());
    double row_norm2 = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        y[i] = labels[static_cast<std::size_t>(i)];
        row_norm2 += x.row(i).squaredNorm() + 1.0;
    }
    // Gradient Lipschitz bound: 1 + C/4 * sum_i |[x_i, 1]|^2.
    const double step = 1.0 / (1.0 + 0.25 * c * row_norm2);
    Eigen::VectorXd residual(x.rows());
    for (int it = 0; it < iterations; ++it) {
        const Eigen::VectorXd m = model.margins(x);
        for (Eigen::Index i = 0; i < m.size(); ++i) residual[i] = logistic(m[i]) - y[i];
        const Eigen::VectorXd grad_w = model.weights + c * (x.transpose() * residual);
        const double grad_b = c * residual.sum();
        model.weights -= step * grad_w;
        model.bias -= step * grad_b;
    }
    return model;
}

LinearModel fit_linear_svm(const Eigen::MatrixXd& x, std::span<const int> labels, double c, std::uint64_t seed,
                           int epochs) {
    const Eigen::Index n = x.rows();
    if (n != static_cast<Eigen::Index>(labels.size()) || n == 0) {
        fail(ErrorKind::invalid_argument, "linear SVM: row and label counts differ");
    }
    const double lambda = 1.0 / (c * static_cast<double>(n));
    const double radius = 1.0 / std::sqrt(lambda);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols() + 1);  // last entry: bias feature
    Rng rng(seed);
    const long steps = static_cast<long>(epochs) * n;
    for (long t = 1; t <= steps; ++t) {
        const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        const double y = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
        const double margin = x.row(i).dot(w.head(x.cols())) + w[x.cols()];
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        w *= 1.0 - eta * lambda;
        if (y * margin < 1.0) {
            w.head(x.cols()) += eta * y * x.row(i).transpose();
            w[x.cols()] += eta * y;
        }
        const double norm = w.norm();
        if (norm > radius) w *= radius / norm;
    }
    LinearModel model;
    model.weights = w.head(x.cols());
    model.bias = w[x.cols()];
    return model;
}

FoldBaselines run_baselines_fold(const std::vector<LabeledCase>& cases, std::span<const std::size_t> train,
                                 std::span<const std::size_t> test, std::uint64_t seed) {
    const auto train_cases = pick(cases, train);
    const auto test_cases = pick(cases, test);
    const BagOfCodes bag(train_cases);
    const Eigen::MatrixXd x_train = bag.transform(train_cases);
    const Eigen::MatrixXd x_test = bag.transform(test_cases);
    std::vector<int> y;
    y.reserve(train.size());
    for (const auto* c : train_cases) y.push_back(c->label);

    constexpr double kRegularization = 1.0;
    FoldBaselines out;
    out.lr = score(fit_logistic_regression(x_train, y, kRegularization, derive_seed(seed, 0)), x_test);
    out.svm = score(fit_linear_svm(x_train, y, kRegularization, derive_seed(seed, 1)), x_test);
    return out;
}

std::vector<FoldBaselines> run_baselines(const std::vector<LabeledCase>& cases, const FoldPlan& folds,
                                         std::uint64_t seed) {
    if (folds.assignment.size() != cases.size()) fail(ErrorKind::invalid_argument, "fold plan does not match cases");
    std::vector<FoldBaselines> out;
    for (int f = 0; f < folds.k; ++f) {
        const auto train = folds.train_indices(f);
        const auto test = folds.test_indices(f);
        out.push_back(run_baselines_fold(cases, train, test, derive_seed(seed, static_cast<std::uint64_t>(f))));
    }
    return out;
}

}  // namespace gk
