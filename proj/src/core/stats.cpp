#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "error.hpp"
#include "rng.hpp"

namespace gk {

std::vector<std::size_t> FoldPlan::test_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldPlan::train_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] != fold) out.push_back(i);
    }
    return out;
}

FoldPlan stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) fail(ErrorKind::invalid_argument, "k-fold needs k >= 2");
    std::vector<std::size_t> members[2];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) fail(ErrorKind::invalid_argument, "labels must be 0 or 1");
        members[labels[i]].push_back(i);
    }
    for (int c = 0; c < 2; ++c) {
        if (members[c].size() < static_cast<std::size_t>(k)) {
            fail(ErrorKind::data, "class " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
                                      " cases; stratified " + std::to_string(k) + "-fold needs at least " +
                                      std::to_string(k));
        }
    }
    FoldPlan plan{k, seed, std::vector<int>(labels.size(), -1)};
    Rng rng(seed);
    std::size_t slot = 0;
    for (int c = 0; c < 2; ++c) {
        rng.shuffle(members[c]);
        for (auto i : members[c]) plan.assignment[i] = static_cast<int>(slot++ % static_cast<std::size_t>(k));
    }
    return plan;
}

double roc_auc(std::span<const double> probs, std::span<const int> labels) {
    const std::size_t n = probs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return probs[a] < probs[b]; });
    double positives = 0.0, negatives = 0.0, positive_rank_sum = 0.0;
    for (std::size_t start = 0; start < n;) {
        std::size_t stop = start + 1;
        while (stop < n && probs[order[stop]] == probs[order[start]]) ++stop;
        // 1-based ranks start+1..stop share their average.
        const double rank = 0.5 * static_cast<double>(start + 1 + stop);
        for (std::size_t r = start; r < stop; ++r) {
            if (labels[order[r]] == 1) {
                positives += 1.0;
                positive_rank_sum += rank;
            } else {
                negatives += 1.0;
            }
        }
        start = stop;
    }
    if (positives == 0.0 || negatives == 0.0) {
        fail(ErrorKind::data, "AUC undefined: labels contain a single class");
    }
    return (positive_rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

ClassificationMetrics compute_metrics(std::span<const double> probs, std::span<const int> preds,
                                      std::span<const int> labels) {
    if (labels.empty() || probs.size() != labels.size() || preds.size() != labels.size()) {
        fail(ErrorKind::invalid_argument, "metrics need equal, non-empty probability/prediction/label vectors");
    }
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = preds[i] == 1;
        const bool actual = labels[i] == 1;
        if (predicted && actual) ++tp;
        else if (!predicted && !actual) ++tn;
        else if (predicted) ++fp;
        else ++fn;
    }
    auto f1 = [](std::size_t hit, std::size_t false_pos, std::size_t false_neg) {
        const std::size_t denom = 2 * hit + false_pos + false_neg;
        return denom == 0 || hit == 0 ? 0.0 : 2.0 * static_cast<double>(hit) / static_cast<double>(denom);
    };
    ClassificationMetrics m;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(labels.size());
    m.macro_f1 = 0.5 * (f1(tp, fp, fn) + f1(tn, fn, fp));
    m.auc = roc_auc(probs, labels);
    return m;
}

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    // The continued fraction converges fast for x < (a+1)/(a+b+2); use symmetry otherwise.
    if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - incomplete_beta(b, a, 1.0 - x);

    constexpr double kTiny = 1e-300;
    constexpr double kEps = 1e-16;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + num / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + num / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) break;
    }
    return std::exp(log_front) * h / a;
}

double student_t_two_sided_p(double t, double df) {
    if (!(df > 0.0)) fail(ErrorKind::invalid_argument, "degrees of freedom must be positive");
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        fail(ErrorKind::invalid_argument, "paired t-test needs two equal-length samples of size >= 2");
    }
    const std::size_t n = a.size();
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
    const Summary s = summarize(diff);

    TTestResult r;
    if (s.stddev == 0.0) {
        if (s.mean == 0.0) return r;
        r.t = s.mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        r.p = 0.0;
        r.degenerate = true;
        r.significant = true;
        return r;
    }
    r.t = s.mean / (s.stddev / std::sqrt(static_cast<double>(n)));
    r.p = student_t_two_sided_p(r.t, static_cast<double>(n - 1));
    r.significant = r.p < kSignificanceLevel;
    return r;
}

Summary summarize(std::span<const double> values) {
    Summary s;
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() < 2) return s;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    return s;
}

}  // namespace gk
