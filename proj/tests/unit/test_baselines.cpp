#include <doctest.h>

#include "baselines.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "stats.hpp"
#include "synth.hpp"

using namespace gk;

namespace {

// Failure cases carry code X, successes code Y; every case also has noise codes.
std::vector<LabeledCase> separable_cohort(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledCase> out;
    for (std::size_t i = 0; i < n; ++i) {
        LabeledCase c;
        c.record.patient_id = "S" + std::to_string(i);
        c.label = static_cast<int>(i % 2);
        c.record.events.push_back({c.label ? "X" : "Y", 1, EventKind::diagnosis});
        for (int e = 0; e < 4; ++e) {
            c.record.events.push_back({"N" + std::to_string(rng.below(10)), 2 + e, EventKind::prescription});
        }
        out.push_back(c);
    }
    return out;
}

std::vector<int> labels_of(const std::vector<LabeledCase>& cases) {
    std::vector<int> y;
    for (const auto& c : cases) y.push_back(c.label);
    return y;
}

}  // namespace

TEST_CASE("bag of codes: training vocabulary, unit rows, unseen codes dropped") {
    std::vector<LabeledCase> cases(2);
    cases[0].record.events = {{"a", 1, EventKind::diagnosis}, {"a", 2, EventKind::diagnosis}, {"b", 3, EventKind::other}};
    cases[1].record.events = {{"c", 1, EventKind::diagnosis}};
    const std::vector<const LabeledCase*> train{&cases[0]};
    const BagOfCodes bag(train);
    CHECK(bag.vocabulary_size() == 2);
    const std::vector<const LabeledCase*> both{&cases[0], &cases[1]};
    const auto x = bag.transform(both);
    CHECK(x(0, 0) == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-15));
    CHECK(x(0, 1) == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-15));
    CHECK(x.row(1).isZero(0.0));
}

TEST_CASE("baselines separate a code-separable cohort") {
    const auto cases = separable_cohort(60, 2);
    const auto y = labels_of(cases);
    const auto plan = stratified_kfold(y, 5, 1);
    const auto folds = run_baselines(cases, plan, 3);
    REQUIRE(folds.size() == 5);
    for (int f = 0; f < 5; ++f) {
        const auto test = plan.test_indices(f);
        std::vector<int> truth;
        for (auto i : test) truth.push_back(y[i]);
        const auto lr = compute_metrics(folds[f].lr.probs, folds[f].lr.preds, truth);
        const auto svm = compute_metrics(folds[f].svm.probs, folds[f].svm.preds, truth);
        CHECK(lr.accuracy == 1.0);
        CHECK(svm.accuracy == 1.0);
        CHECK(lr.auc == 1.0);
        CHECK(svm.auc == 1.0);
    }
    const auto again = run_baselines(cases, plan, 3);
    for (int f = 0; f < 5; ++f) {
        CHECK(again[f].lr.probs == folds[f].lr.probs);
        CHECK(again[f].svm.probs == folds[f].svm.probs);
    }
}

TEST_CASE("baselines are at chance on a cohort without signal") {
    CohortSpec spec;
    spec.n_cases = 200;
    spec.signal_strength = 0.0;
    spec.seed = 12;
    const auto cases = generate_cohort(spec);
    const auto y = labels_of(cases);
    const auto plan = stratified_kfold(y, 5, 2);
    const auto folds = run_baselines(cases, plan, 4);
    double lr_auc = 0.0, svm_auc = 0.0;
    for (int f = 0; f < 5; ++f) {
        std::vector<int> truth;
        for (auto i : plan.test_indices(f)) truth.push_back(y[i]);
        lr_auc += roc_auc(folds[f].lr.probs, truth) / 5.0;
        svm_auc += roc_auc(folds[f].svm.probs, truth) / 5.0;
    }
    CHECK(std::abs(lr_auc - 0.5) <= 0.1);
    CHECK(std::abs(svm_auc - 0.5) <= 0.1);
}

TEST_CASE("baselines reject a mismatched fold plan") {
    const auto cases = separable_cohort(20, 1);
    const auto plan = stratified_kfold(labels_of(separable_cohort(30, 1)), 2, 1);
    CHECK_THROWS_AS(run_baselines(cases, plan, 1), Error);
}
