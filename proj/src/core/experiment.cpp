#include "experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

#include <json.hpp>

#include "baselines.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "patient_graph.hpp"
#include "rng.hpp"

namespace gk {

namespace {

constexpr const char* kSvm = "SVM";
constexpr const char* kLr = "LR";

struct ModelFold {
    ClassificationMetrics metrics;
    int stop_epoch = 0;
};

struct FoldOutcome {
    std::vector<ModelFold> nets;  // one per configured metric
    ClassificationMetrics svm;
    ClassificationMetrics lr;
};

std::array<KernelKind, kKernelCount> kernel_kinds(const ExperimentConfig& config) {
    return {KernelKind::wl(config.wl_iterations), KernelKind::temporal(config.tp_alpha),
            KernelKind::vertex_histogram()};
}

std::array<double, 3> column(const ClassificationMetrics& m) { return {m.accuracy, m.macro_f1, m.auc}; }

// Re-raises with the stage name prepended, keeping the error kind.
template <typename F>
auto staged(const std::string& stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const Error& e) {
        throw Error(e.kind(), stage + ": " + e.what());
    }
}

FoldOutcome run_fold(const std::vector<LabeledCase>& cohort, const std::vector<PatientGraph>& graphs,
                     const FoldPlan& plan, int fold, std::size_t section, BalanceMode mode,
                     const ExperimentConfig& config) {
    const auto train = plan.train_indices(fold);
    const auto test = plan.test_indices(fold);
    {
        std::vector<std::size_t> overlap;
        std::set_intersection(train.begin(), train.end(), test.begin(), test.end(), std::back_inserter(overlap));
        if (!overlap.empty() || train.size() + test.size() != cohort.size()) {
            fail(ErrorKind::data, "fold " + std::to_string(fold) + " train/test indices overlap");
        }
    }
    std::vector<PatientGraph> train_graphs, test_graphs;
    std::vector<int> train_labels, test_labels;
    std::vector<const LabeledCase*> train_cases, test_cases;
    for (auto i : train) {
        train_graphs.push_back(graphs[i]);
        train_labels.push_back(cohort[i].label);
        train_cases.push_back(&cohort[i]);
    }
    for (auto i : test) {
        test_graphs.push_back(graphs[i]);
        test_labels.push_back(cohort[i].label);
        test_cases.push_back(&cohort[i]);
    }

    std::array<GramMatrix, kKernelCount> grams;
    std::array<Eigen::MatrixXd, kKernelCount> cross;
    staged("gram (fold " + std::to_string(fold) + ")", [&] {
        const auto kinds = kernel_kinds(config);
        for (int k = 0; k < kKernelCount; ++k) {
            grams[k] = gram_matrix(kinds[k], train_graphs, true);
            const auto diag = self_kernels(kinds[k], train_graphs);
            cross[k] = cross_gram(kinds[k], test_graphs, train_graphs, diag, true);
        }
        return 0;
    });
    const GramTriple triple = {&grams[0], &grams[1], &grams[2]};

    FoldOutcome out;
    for (std::size_t m = 0; m < config.metrics.size(); ++m) {
        const DistanceMetric metric = config.metrics[m];
        NetConfig net_config = config.net;
        net_config.metric = metric;
        net_config.seed = derive_seed(config.seed, 1000 + 100 * section + 10 * static_cast<std::uint64_t>(fold) + m);
        const std::string stage = "train " + std::string(to_string(metric)) + " (fold " + std::to_string(fold) + ")";
        const TrainResult trained = staged(stage, [&] { return gk::train(triple, train_labels, net_config); });
        const auto predictions = predict(trained.net, cross);
        std::vector<double> probs;
        std::vector<int> preds;
        for (const auto& p : predictions) {
            probs.push_back(p.probability);
            preds.push_back(p.label);
        }
        out.nets.push_back({staged("metrics", [&] { return compute_metrics(probs, preds, test_labels); }),
                            trained.trace.stop_epoch});

        if (fold == 0 && !config.embedding_dir.empty()) {
            std::array<Eigen::MatrixXd, kKernelCount> train_rows;
            for (int k = 0; k < kKernelCount; ++k) train_rows[k] = grams[k].values;
            const auto table = export_embeddings(trained.net, train_rows, cross, train_cases, test_cases);
            const auto path = std::filesystem::path(config.embedding_dir) /
                              ("embeddings_" + std::string(to_string(mode)) + "_" + std::string(to_string(metric)) + ".csv");
            std::ofstream file(path);
            if (!file) fail(ErrorKind::io, "cannot write " + path.string());
            write_embeddings_csv(file, table);
        }
    }
    if (config.baselines) {
        const auto base = staged("baselines (fold " + std::to_string(fold) + ")", [&] {
            return run_baselines_fold(cohort, train, test, derive_seed(config.seed, 5000 + 100 * section + fold));
        });
        out.svm = compute_metrics(base.svm.probs, base.svm.preds, test_labels);
        out.lr = compute_metrics(base.lr.probs, base.lr.preds, test_labels);
    }
    return out;
}

void summarize_model(ModelResult& m) {
    for (int c = 0; c < 3; ++c) {
        std::vector<double> values;
        for (const auto& f : m.folds) values.push_back(column(f)[c]);
        m.summary[c] = summarize(values);
    }
}

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (folds < 2) fail(ErrorKind::invalid_argument, "folds must be >= 2");
    if (metrics.empty() && !baselines) fail(ErrorKind::invalid_argument, "experiment has no models to run");
    if (balances.empty()) fail(ErrorKind::invalid_argument, "experiment has no balance modes");
    if (threads < 1) fail(ErrorKind::invalid_argument, "threads must be >= 1");
    KernelKind::wl(wl_iterations).validate();
    KernelKind::temporal(tp_alpha).validate();
    net.validate();
}

std::string model_name(DistanceMetric metric) {
    return metric == DistanceMetric::cosine ? "Cosine" : "Euclidean";
}

const ModelResult* BalanceSection::find(const std::string& model) const {
    for (const auto& m : models) {
        if (m.model == model) return &m;
    }
    return nullptr;
}

const PairTest* BalanceSection::find_test(const std::string& a, const std::string& b) const {
    for (const auto& t : tests) {
        if ((t.model_a == a && t.model_b == b) || (t.model_a == b && t.model_b == a)) return &t;
    }
    return nullptr;
}

const BalanceSection* EvalReport::find(BalanceMode mode) const {
    for (const auto& s : sections) {
        if (s.mode == mode) return &s;
    }
    return nullptr;
}

EvalReport run_experiment(const std::vector<LabeledCase>& cases, const ExperimentConfig& config,
                          const std::string& title) {
    config.validate();
    if (!config.embedding_dir.empty()) std::filesystem::create_directories(config.embedding_dir);
    EvalReport report;
    report.title = title;
    report.folds = config.folds;
    report.seed = config.seed;

    for (std::size_t s = 0; s < config.balances.size(); ++s) {
        const BalanceMode mode = config.balances[s];
        const std::uint64_t section = static_cast<std::uint64_t>(mode);
        const auto cohort = staged("rebalance", [&] { return rebalance(cases, mode, derive_seed(config.seed, 10 + section)); });
        std::vector<int> labels;
        for (const auto& c : cohort) labels.push_back(c.label);
        const auto plan = staged("folds", [&] { return stratified_kfold(labels, config.folds, derive_seed(config.seed, 20 + section)); });
        std::vector<PatientGraph> graphs;
        staged("graph", [&] {
            for (const auto& c : cohort) graphs.push_back(build_patient_graph(c));
            return 0;
        });

        std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(config.folds));
        parallel_for(outcomes.size(), config.threads, [&](std::size_t f) {
            outcomes[f] = run_fold(cohort, graphs, plan, static_cast<int>(f), section, mode, config);
        });

        BalanceSection sec;
        sec.mode = mode;
        sec.cases = cohort.size();
        sec.failures = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
        for (std::size_t m = 0; m < config.metrics.size(); ++m) {
            ModelResult r;
            r.model = model_name(config.metrics[m]);
            for (const auto& o : outcomes) {
                r.folds.push_back(o.nets[m].metrics);
                r.stop_epochs.push_back(o.nets[m].stop_epoch);
            }
            sec.models.push_back(std::move(r));
        }
        if (config.baselines) {
            ModelResult svm{kSvm, {}, {}, {}, {}};
            ModelResult lr{kLr, {}, {}, {}, {}};
            for (const auto& o : outcomes) {
                svm.folds.push_back(o.svm);
                lr.folds.push_back(o.lr);
            }
            sec.models.push_back(std::move(svm));
            sec.models.push_back(std::move(lr));
        }
        for (auto& m : sec.models) summarize_model(m);

        for (std::size_t a = 0; a < sec.models.size(); ++a) {
            for (std::size_t b = a + 1; b < sec.models.size(); ++b) {
                PairTest t{sec.models[a].model, sec.models[b].model, {}};
                for (int c = 0; c < 3; ++c) {
                    std::vector<double> xa, xb;
                    for (const auto& f : sec.models[a].folds) xa.push_back(column(f)[c]);
                    for (const auto& f : sec.models[b].folds) xb.push_back(column(f)[c]);
                    t.tests[c] = paired_t_test(xa, xb);
                }
                sec.tests.push_back(std::move(t));
            }
        }
        for (auto& m : sec.models) {
            if (m.model == kSvm || m.model == kLr || !config.baselines) continue;
            for (int c = 0; c < 3; ++c) {
                bool all = true;
                for (const char* base : {kSvm, kLr}) {
                    const auto* other = sec.find(base);
                    const auto* test = sec.find_test(m.model, base);
                    all = all && other && test && m.summary[c].mean > other->summary[c].mean && test->tests[c].significant;
                }
                m.beats_baselines[c] = all;
            }
        }
        report.sections.push_back(std::move(sec));
    }
    return report;
}

std::string report_json(const EvalReport& report) {
    using nlohmann::json;
    json root;
    root["title"] = report.title;
    root["folds"] = report.folds;
    root["seed"] = report.seed;
    json configurations = json::object();
    json t_tests = json::object();
    for (const auto& sec : report.sections) {
        const std::string mode(to_string(sec.mode));
        json models = json::object();
        for (const auto& m : sec.models) {
            json entry;
            json folds = json::array();
            for (const auto& f : m.folds) folds.push_back({{"acc", f.accuracy}, {"f1", f.macro_f1}, {"auc", f.auc}});
            entry["folds"] = folds;
            for (int c = 0; c < 3; ++c) {
                entry["mean"][kMetricColumns[c]] = m.summary[c].mean;
                entry["std"][kMetricColumns[c]] = m.summary[c].stddev;
                entry["beats_baselines"][kMetricColumns[c]] = m.beats_baselines[c];
            }
            if (!m.stop_epochs.empty()) entry["stop_epochs"] = m.stop_epochs;
            models[m.model] = entry;
        }
        configurations[mode] = {{"cases", sec.cases}, {"failures", sec.failures}, {"models", models}};
        json tests = json::object();
        for (const auto& t : sec.tests) {
            json pair;
            for (int c = 0; c < 3; ++c) {
                pair[kMetricColumns[c]] = {{"t", t.tests[c].t},
                                           {"p", t.tests[c].p},
                                           {"significant", t.tests[c].significant},
                                           {"degenerate", t.tests[c].degenerate}};
            }
            tests[t.model_a + " vs " + t.model_b] = pair;
        }
        t_tests[mode] = tests;
    }
    root["configurations"] = configurations;
    root["t_tests"] = t_tests;
    return root.dump(2);
}

void write_report_text(std::ostream& out, const EvalReport& report) {
    if (!report.title.empty()) out << "Evaluation Results for " << report.title << "\n";
    out << report.folds << "-fold cross validation, seed " << report.seed << "\n";
    for (const auto& sec : report.sections) {
        out << "\n" << (sec.mode == BalanceMode::balanced ? "Balanced" : "Imbalanced") << " (" << sec.cases
            << " cases, " << sec.failures << " failures)\n";
        out << std::left << std::setw(11) << "Model";
        for (const char* h : {"ACC", "F1", "AUC"}) out << std::setw(20) << h;
        out << "\n";
        for (const auto& m : sec.models) {
            out << std::setw(11) << m.model;
            for (int c = 0; c < 3; ++c) {
                const std::string cell = std::string(m.beats_baselines[c] ? "*" : " ") + fixed4(m.summary[c].mean) +
                                         " ± " + fixed4(m.summary[c].stddev);
                out << cell << "  ";
            }
            out << "\n";
        }
        const auto* e = sec.find("Euclidean");
        const auto* c = sec.find("Cosine");
        if (e && c) {
            if (const auto* t = sec.find_test("Euclidean", "Cosine")) {
                out << "Euclidean vs Cosine p:";
                for (int k = 0; k < 3; ++k) out << " " << kMetricColumns[k] << "=" << fixed4(t->tests[k].p);
                out << "\n";
            }
        }
    }
    const bool has_baselines = std::any_of(report.sections.begin(), report.sections.end(),
                                           [](const BalanceSection& s) { return s.find(kSvm) != nullptr; });
    if (has_baselines) out << "\n* significant over all baselines (SVM and LR), paired t-test p < 0.01\n";
}

Eigen::MatrixXd pca_2d(const Eigen::MatrixXd& rows) {
    if (rows.rows() < 3) fail(ErrorKind::invalid_argument, "2D projection needs at least 3 cases");
    const Eigen::RowVectorXd mean = rows.colwise().mean();
    const Eigen::MatrixXd centered = rows.rowwise() - mean;
    const Eigen::MatrixXd covariance = centered.transpose() * centered;
    const SymmetricEigen eig = jacobi_eigen(covariance, true);
    const Eigen::Index d = covariance.rows();

    Eigen::MatrixXd components = Eigen::MatrixXd::Zero(d, 2);
    for (Eigen::Index c = 0; c < std::min<Eigen::Index>(2, d); ++c) {
        Eigen::VectorXd v = eig.vectors.col(d - 1 - c);
        Eigen::Index largest = 0;
        v.cwiseAbs().maxCoeff(&largest);
        if (v[largest] < 0.0) v = -v;
        components.col(c) = v;
    }
    return centered * components;
}

EmbeddingTable export_embeddings(const EmbedNet& net, const std::array<Eigen::MatrixXd, kKernelCount>& train_rows,
                                 const std::array<Eigen::MatrixXd, kKernelCount>& test_rows,
                                 const std::vector<const LabeledCase*>& train_cases,
                                 const std::vector<const LabeledCase*>& test_cases) {
    if (static_cast<Eigen::Index>(train_cases.size()) != train_rows[0].rows() ||
        static_cast<Eigen::Index>(test_cases.size()) != test_rows[0].rows()) {
        fail(ErrorKind::invalid_argument, "embedding export: case and row counts differ");
    }
    const Eigen::MatrixXd train_e = embed_rows(net, train_rows);
    const Eigen::MatrixXd test_e = test_cases.empty() ? Eigen::MatrixXd(net.fusion_dim(), 0) : embed_rows(net, test_rows);

    EmbeddingTable table;
    table.embeddings.resize(train_e.cols() + test_e.cols(), net.fusion_dim());
    table.embeddings.topRows(train_e.cols()) = train_e.transpose();
    table.embeddings.bottomRows(test_e.cols()) = test_e.transpose();
    for (const auto* c : train_cases) {
        table.ids.push_back(c->record.patient_id);
        table.split.push_back("train");
        table.labels.push_back(c->label);
    }
    for (const auto* c : test_cases) {
        table.ids.push_back(c->record.patient_id);
        table.split.push_back("test");
        table.labels.push_back(c->label);
    }
    table.projection = pca_2d(table.embeddings);
    return table;
}

void write_embeddings_csv(std::ostream& out, const EmbeddingTable& table) {
    out << "id,split,label";
    for (Eigen::Index j = 0; j < table.embeddings.cols(); ++j) out << ",e_" << j;
    out << ",x2d,y2d\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << table.ids[i] << ',' << table.split[i] << ',' << table.labels[i];
        for (Eigen::Index j = 0; j < table.embeddings.cols(); ++j) out << ',' << table.embeddings(r, j);
        out << ',' << table.projection(r, 0) << ',' << table.projection(r, 1) << '\n';
    }
}

}  // namespace gk
