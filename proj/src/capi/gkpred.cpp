#include "gkpred/gkpred.h"

#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ehr.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "kernels.hpp"
#include "metric_net.hpp"
#include "patient_graph.hpp"
#include "synth.hpp"

struct gk_cohort {
    std::vector<gk::PatientRecord> records;  // full records, in case order
    gk::DiseaseSpec disease;
    std::vector<gk::LabeledCase> cases;
    std::size_t excluded = 0;
};

struct gk_gram {
    gk::GramMatrix gram;
};

struct gk_model {
    gk::EmbedNet net;
    gk::NetConfig config;
    gk::TrainTrace trace;
    bool has_trace = false;
};

struct gk_report {
    gk::EvalReport report;
};

namespace {

thread_local std::string last_error;

gk_status status_of(gk::ErrorKind kind) {
    switch (kind) {
        case gk::ErrorKind::invalid_argument: return GK_ERR_INVALID_ARGUMENT;
        case gk::ErrorKind::parse: return GK_ERR_PARSE;
        case gk::ErrorKind::data: return GK_ERR_DATA;
        case gk::ErrorKind::numeric: return GK_ERR_NUMERIC;
        case gk::ErrorKind::io: return GK_ERR_IO;
    }
    return GK_ERR_INTERNAL;
}

template <typename F>
gk_status guarded(F&& body) {
    last_error.clear();
    try {
        body();
        return GK_OK;
    } catch (const gk::Error& e) {
        last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return GK_ERR_INTERNAL;
    } catch (const std::filesystem::filesystem_error& e) {
        last_error = e.what();
        return GK_ERR_IO;
    } catch (const std::exception& e) {
        last_error = e.what();
        return GK_ERR_INTERNAL;
    }
}

void require(bool ok, const char* what) {
    if (!ok) gk::fail(gk::ErrorKind::invalid_argument, what);
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) gk::fail(gk::ErrorKind::io, "cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) gk::fail(gk::ErrorKind::io, "cannot write " + path.string());
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) gk::fail(gk::ErrorKind::io, "failed writing " + path.string());
}

gk::KernelKind kernel_kind(gk_kernel kernel, const gk_kernel_params& params) {
    switch (kernel) {
        case GK_KERNEL_WL: return gk::KernelKind::wl(params.wl_iterations);
        case GK_KERNEL_TEMPORAL: return gk::KernelKind::temporal(params.tp_alpha);
        case GK_KERNEL_VERTEX_HISTOGRAM: return gk::KernelKind::vertex_histogram();
    }
    gk::fail(gk::ErrorKind::invalid_argument, "unknown kernel " + std::to_string(static_cast<int>(kernel)));
}

std::array<gk::KernelKind, gk::kKernelCount> kernel_triple(const gk_kernel_params& params) {
    return {kernel_kind(GK_KERNEL_WL, params), kernel_kind(GK_KERNEL_TEMPORAL, params),
            kernel_kind(GK_KERNEL_VERTEX_HISTOGRAM, params)};
}

std::vector<gk::PatientGraph> graphs_of(const gk_cohort& cohort) {
    std::vector<gk::PatientGraph> out;
    out.reserve(cohort.cases.size());
    for (const auto& c : cohort.cases) {
        try {
            out.push_back(gk::build_patient_graph(c));
        } catch (const gk::Error& e) {
            throw gk::Error(e.kind(), "patient " + c.record.patient_id + ": " + e.what());
        }
    }
    return out;
}

gk::NetConfig to_core(const gk_net_config& c) {
    gk::NetConfig n;
    n.embed_dim_per_kernel = c.embed_dim;
    n.fusion_dim = c.fusion_dim;
    n.classifier_dim = c.classifier_dim;
    n.margin_lambda = c.margin;
    require(c.metric == GK_EUCLIDEAN || c.metric == GK_COSINE, "unknown distance metric");
    n.metric = c.metric == GK_COSINE ? gk::DistanceMetric::cosine : gk::DistanceMetric::euclidean;
    n.learning_rate = c.learning_rate;
    n.batch_size = c.batch_size;
    n.max_epochs = c.max_epochs;
    n.early_stop_patience = c.patience;
    n.seed = c.seed;
    return n;
}

gk_net_config from_core(const gk::NetConfig& n) {
    gk_net_config c;
    c.embed_dim = n.embed_dim_per_kernel;
    c.fusion_dim = n.fusion_dim;
    c.classifier_dim = n.classifier_dim;
    c.margin = n.margin_lambda;
    c.metric = n.metric == gk::DistanceMetric::cosine ? GK_COSINE : GK_EUCLIDEAN;
    c.learning_rate = n.learning_rate;
    c.batch_size = n.batch_size;
    c.max_epochs = n.max_epochs;
    c.patience = n.early_stop_patience;
    c.seed = n.seed;
    return c;
}

gk::BalanceMode to_core(gk_balance mode) {
    require(mode == GK_BALANCED || mode == GK_IMBALANCED_70_30, "unknown balance mode");
    return mode == GK_BALANCED ? gk::BalanceMode::balanced : gk::BalanceMode::imbalanced_70_30;
}

// Full records for `cases`, in case order.
std::vector<gk::PatientRecord> records_for(const std::vector<gk::LabeledCase>& cases,
                                           const std::vector<gk::PatientRecord>& pool) {
    std::unordered_map<std::string, const gk::PatientRecord*> by_id;
    for (const auto& r : pool) by_id.emplace(r.patient_id, &r);
    std::vector<gk::PatientRecord> out;
    out.reserve(cases.size());
    for (const auto& c : cases) {
        const auto it = by_id.find(c.record.patient_id);
        if (it == by_id.end()) gk::fail(gk::ErrorKind::data, "no record for patient " + c.record.patient_id);
        out.push_back(*it->second);
    }
    return out;
}

gk_cohort* ingest(const std::filesystem::path& events, const std::filesystem::path* demographics,
                  const std::filesystem::path& disease) {
    auto in = open_in(events);
    std::vector<gk::PatientRecord> records;
    try {
        records = gk::parse_records(in);
    } catch (const gk::Error& e) {
        throw gk::Error(e.kind(), events.string() + ": " + e.what());
    }
    if (demographics) {
        auto demo = open_in(*demographics);
        try {
            gk::apply_demographics(demo, records);
        } catch (const gk::Error& e) {
            throw gk::Error(e.kind(), demographics->string() + ": " + e.what());
        }
    }
    auto cfg = open_in(disease);
    gk::DiseaseSpec spec;
    try {
        spec = gk::parse_disease_spec(cfg);
    } catch (const gk::Error& e) {
        throw gk::Error(e.kind(), disease.string() + ": " + e.what());
    }
    auto labeled = gk::label_cohort(records, spec);
    auto cohort = std::make_unique<gk_cohort>();
    cohort->records = records_for(labeled.cases, records);
    cohort->disease = std::move(spec);
    cohort->cases = std::move(labeled.cases);
    cohort->excluded = labeled.excluded;
    return cohort.release();
}

bool valid_name(const char* name) {
    if (!name || !*name) return false;
    for (const char* p = name; *p; ++p) {
        const auto c = static_cast<unsigned char>(*p);
        if (std::isspace(c) || c == ',' || c == '=' || c == '#') return false;
    }
    return true;
}

}  // namespace

extern "C" {

const char* gk_last_error(void) { return last_error.c_str(); }

const char* gk_status_name(gk_status status) {
    switch (status) {
        case GK_OK: return "ok";
        case GK_ERR_INVALID_ARGUMENT: return "invalid argument";
        case GK_ERR_PARSE: return "parse error";
        case GK_ERR_DATA: return "data error";
        case GK_ERR_NUMERIC: return "numeric error";
        case GK_ERR_IO: return "I/O error";
        case GK_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* gk_version(void) { return "0.1.0"; }

void gk_cohort_spec_init(gk_cohort_spec* spec) {
    if (!spec) return;
    const gk::CohortSpec d;
    spec->n_cases = d.n_cases;
    spec->failure_ratio = d.failure_ratio;
    spec->kind = d.kind == gk::DiseaseKind::chronic ? GK_CHRONIC : GK_SHORT_TERM;
    spec->signal_strength = d.signal_strength;
    spec->vocab_size = d.vocab_size;
    spec->min_events = d.min_events;
    spec->max_events = d.max_events;
    spec->seed = d.seed;
}

gk_status gk_cohort_spec_preset(gk_cohort_spec* spec, const char* preset, uint64_t n_cases) {
    return guarded([&] {
        require(spec && preset, "null argument");
        const auto n = n_cases ? n_cases : spec->n_cases;
        const auto p = gk::preset_spec(preset, static_cast<std::size_t>(n), 1.0, spec->seed);
        spec->n_cases = p.n_cases;
        spec->failure_ratio = p.failure_ratio;
        spec->kind = p.kind == gk::DiseaseKind::chronic ? GK_CHRONIC : GK_SHORT_TERM;
        spec->min_events = p.min_events;
        spec->max_events = p.max_events;
    });
}

gk_status gk_cohort_generate(const gk_cohort_spec* spec, const char* name, gk_cohort** out) {
    return guarded([&] {
        require(spec && out, "null argument");
        *out = nullptr;
        require(name == nullptr || valid_name(name), "cohort name must be a non-empty token without spaces, ',', '=' or '#'");
        gk::CohortSpec s;
        s.n_cases = static_cast<std::size_t>(spec->n_cases);
        s.failure_ratio = spec->failure_ratio;
        require(spec->kind == GK_SHORT_TERM || spec->kind == GK_CHRONIC, "unknown disease kind");
        s.kind = spec->kind == GK_CHRONIC ? gk::DiseaseKind::chronic : gk::DiseaseKind::short_term;
        s.signal_strength = spec->signal_strength;
        s.vocab_size = spec->vocab_size;
        s.min_events = spec->min_events;
        s.max_events = spec->max_events;
        s.seed = spec->seed;
        if (name) s.preset = name;
        auto synthetic = gk::synthesize(s);
        auto cohort = std::make_unique<gk_cohort>();
        cohort->records = std::move(synthetic.records);
        cohort->disease = std::move(synthetic.disease);
        cohort->cases = std::move(synthetic.cases);
        *out = cohort.release();
    });
}

gk_status gk_cohort_ingest(const char* events_path, const char* demographics_path, const char* disease_path,
                           gk_cohort** out) {
    return guarded([&] {
        require(events_path && disease_path && out, "null argument");
        *out = nullptr;
        const std::filesystem::path demo = demographics_path ? demographics_path : "";
        *out = ingest(events_path, demographics_path ? &demo : nullptr, disease_path);
    });
}

gk_status gk_cohort_save(const gk_cohort* cohort, const char* dir) {
    return guarded([&] {
        require(cohort && dir, "null argument");
        const std::filesystem::path root(dir);
        std::filesystem::create_directories(root);
        {
            const auto path = root / "events.tsv";
            auto out = open_out(path);
            gk::write_records(out, cohort->records);
            finish(out, path);
        }
        {
            const auto path = root / "demographics.tsv";
            auto out = open_out(path);
            gk::write_demographics(out, cohort->records);
            finish(out, path);
        }
        {
            const auto path = root / "disease.cfg";
            auto out = open_out(path);
            gk::write_disease_spec(out, cohort->disease);
            finish(out, path);
        }
        {
            const auto path = root / "labels.tsv";
            auto out = open_out(path);
            gk::write_labels(out, cohort->cases);
            finish(out, path);
        }
    });
}

gk_status gk_cohort_load(const char* dir, gk_cohort** out) {
    return guarded([&] {
        require(dir && out, "null argument");
        *out = nullptr;
        const std::filesystem::path root(dir);
        const auto demo = root / "demographics.tsv";
        const bool has_demo = std::filesystem::exists(demo);
        std::unique_ptr<gk_cohort> cohort(ingest(root / "events.tsv", has_demo ? &demo : nullptr, root / "disease.cfg"));

        const auto manifest = root / "labels.tsv";
        if (std::filesystem::exists(manifest)) {
            auto in = open_in(manifest);
            std::vector<gk::PatientRecord> stubs;
            for (const auto& c : cohort->cases) stubs.push_back({c.record.patient_id, {}, {}});
            const auto listed = gk::attach_labels(in, stubs);
            if (listed.size() != cohort->cases.size()) {
                gk::fail(gk::ErrorKind::data, manifest.string() + " lists " + std::to_string(listed.size()) +
                                                  " cases; the disease rule labels " +
                                                  std::to_string(cohort->cases.size()));
            }
            for (std::size_t i = 0; i < listed.size(); ++i) {
                const auto& a = listed[i];
                const auto& b = cohort->cases[i];
                if (a.record.patient_id != b.record.patient_id || a.label != b.label || a.index_day != b.index_day) {
                    gk::fail(gk::ErrorKind::data, manifest.string() + ": entry " + std::to_string(i + 1) + " (" +
                                                      a.record.patient_id + ") disagrees with the disease rule");
                }
            }
        }
        *out = cohort.release();
    });
}

gk_status gk_cohort_rebalance(const gk_cohort* cohort, gk_balance mode, uint64_t seed, gk_cohort** out) {
    return guarded([&] {
        require(cohort && out, "null argument");
        *out = nullptr;
        auto result = std::make_unique<gk_cohort>();
        result->cases = gk::rebalance(cohort->cases, to_core(mode), seed);
        result->records = records_for(result->cases, cohort->records);
        result->disease = cohort->disease;
        *out = result.release();
    });
}

size_t gk_cohort_size(const gk_cohort* cohort) { return cohort ? cohort->cases.size() : 0; }

size_t gk_cohort_failures(const gk_cohort* cohort) {
    if (!cohort) return 0;
    std::size_t n = 0;
    for (const auto& c : cohort->cases) n += c.label == 1 ? 1 : 0;
    return n;
}

size_t gk_cohort_excluded(const gk_cohort* cohort) { return cohort ? cohort->excluded : 0; }

gk_status gk_cohort_case(const gk_cohort* cohort, size_t index, const char** patient_id, int* label) {
    return guarded([&] {
        require(cohort != nullptr, "null argument");
        require(index < cohort->cases.size(), "case index out of range");
        if (patient_id) *patient_id = cohort->cases[index].record.patient_id.c_str();
        if (label) *label = cohort->cases[index].label;
    });
}

gk_status gk_cohort_write_graphs(const gk_cohort* cohort, const char* path) {
    return guarded([&] {
        require(cohort && path, "null argument");
        const auto graphs = graphs_of(*cohort);
        auto out = open_out(path);
        for (std::size_t i = 0; i < graphs.size(); ++i) {
            out << "# " << cohort->cases[i].record.patient_id << '\n';
            gk::write_adjacency(out, graphs[i]);
        }
        finish(out, path);
    });
}

void gk_cohort_free(gk_cohort* cohort) { delete cohort; }

void gk_kernel_params_init(gk_kernel_params* params) {
    if (!params) return;
    const gk::KernelKind wl = gk::KernelKind::wl(3);
    const gk::KernelKind tp = gk::KernelKind::temporal(1e-3);
    params->wl_iterations = wl.wl_iterations;
    params->tp_alpha = tp.alpha;
}

gk_status gk_gram_compute(const gk_cohort* cohort, gk_kernel kernel, const gk_kernel_params* params, int normalize,
                          int threads, gk_gram** out) {
    return guarded([&] {
        require(cohort && params && out, "null argument");
        *out = nullptr;
        require(threads >= 1, "threads must be >= 1");
        const auto kind = kernel_kind(kernel, *params);
        kind.validate();
        const auto graphs = graphs_of(*cohort);
        auto gram = std::make_unique<gk_gram>();
        gram->gram = gk::gram_matrix(kind, graphs, normalize != 0, threads);
        *out = gram.release();
    });
}

gk_status gk_gram_save(const gk_gram* gram, const char* path) {
    return guarded([&] {
        require(gram && path, "null argument");
        auto out = open_out(path);
        gk::save_gram(out, gram->gram);
        finish(out, path);
    });
}

gk_status gk_gram_load(const char* path, gk_gram** out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = nullptr;
        auto in = open_in(path);
        auto gram = std::make_unique<gk_gram>();
        try {
            gram->gram = gk::load_gram(in);
        } catch (const gk::Error& e) {
            throw gk::Error(e.kind(), std::string(path) + ": " + e.what());
        }
        *out = gram.release();
    });
}

gk_status gk_gram_write_csv(const gk_gram* gram, const char* path) {
    return guarded([&] {
        require(gram && path, "null argument");
        auto out = open_out(path);
        gk::write_gram_csv(out, gram->gram);
        finish(out, path);
    });
}

size_t gk_gram_size(const gk_gram* gram) { return gram ? static_cast<size_t>(gram->gram.values.rows()) : 0; }

gk_kernel gk_gram_kernel(const gk_gram* gram) {
    if (!gram) return GK_KERNEL_WL;
    return static_cast<gk_kernel>(static_cast<int>(gram->gram.kernel.type));
}

int gk_gram_normalized(const gk_gram* gram) { return gram && gram->gram.normalized ? 1 : 0; }

gk_status gk_gram_value(const gk_gram* gram, size_t row, size_t col, double* value) {
    return guarded([&] {
        require(gram && value, "null argument");
        const auto n = static_cast<size_t>(gram->gram.values.rows());
        require(row < n && col < n, "Gram index out of range");
        *value = gram->gram.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
    });
}

gk_status gk_gram_min_eigenvalue(const gk_gram* gram, double* value) {
    return guarded([&] {
        require(gram && value, "null argument");
        *value = gk::psd_check(gram->gram);
    });
}

void gk_gram_free(gk_gram* gram) { delete gram; }

void gk_net_config_init(gk_net_config* config) {
    if (config) *config = from_core(gk::NetConfig{});
}

gk_status gk_model_train(const gk_gram* const grams[3], const gk_cohort* cohort, const gk_net_config* config,
                         gk_model** out) {
    return guarded([&] {
        require(grams && cohort && config && out, "null argument");
        *out = nullptr;
        gk::GramTriple triple{};
        for (int k = 0; k < gk::kKernelCount; ++k) {
            require(grams[k] != nullptr, "null Gram matrix");
            if (static_cast<int>(grams[k]->gram.kernel.type) != k) {
                gk::fail(gk::ErrorKind::invalid_argument, "Gram " + std::to_string(k) + " holds the " +
                                                              grams[k]->gram.kernel.name() +
                                                              " kernel; expected order wl, tp, vh");
            }
            if (grams[k]->gram.values.rows() != static_cast<Eigen::Index>(cohort->cases.size())) {
                gk::fail(gk::ErrorKind::data, "Gram " + grams[k]->gram.kernel.name() + " has " +
                                                  std::to_string(grams[k]->gram.values.rows()) +
                                                  " rows; cohort has " + std::to_string(cohort->cases.size()) +
                                                  " cases");
            }
            triple[k] = &grams[k]->gram;
        }
        std::vector<int> labels;
        for (const auto& c : cohort->cases) labels.push_back(c.label);
        const auto net_config = to_core(*config);
        auto result = gk::train(triple, labels, net_config);
        auto model = std::make_unique<gk_model>();
        model->net = std::move(result.net);
        model->config = net_config;
        model->trace = std::move(result.trace);
        model->has_trace = true;
        *out = model.release();
    });
}

gk_status gk_model_save(const gk_model* model, const char* path) {
    return guarded([&] {
        require(model && path, "null argument");
        auto out = open_out(path);
        gk::save_model(out, model->net, model->config);
        finish(out, path);
    });
}

gk_status gk_model_load(const char* path, gk_model** out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = nullptr;
        auto in = open_in(path);
        auto model = std::make_unique<gk_model>();
        try {
            auto loaded = gk::load_model(in);
            model->net = std::move(loaded.net);
            model->config = loaded.config;
        } catch (const gk::Error& e) {
            throw gk::Error(e.kind(), std::string(path) + ": " + e.what());
        }
        *out = model.release();
    });
}

gk_status gk_model_config(const gk_model* model, gk_net_config* config) {
    return guarded([&] {
        require(model && config, "null argument");
        *config = from_core(model->config);
    });
}

gk_status gk_model_write_trace(const gk_model* model, const char* path) {
    return guarded([&] {
        require(model && path, "null argument");
        require(model->has_trace, "model was loaded from disk and carries no training trace");
        auto out = open_out(path);
        gk::write_trace_csv(out, model->trace);
        finish(out, path);
    });
}

int gk_model_stop_epoch(const gk_model* model) { return model && model->has_trace ? model->trace.stop_epoch : -1; }

gk_status gk_model_predict(const gk_model* model, const gk_cohort* train, const gk_cohort* test,
                           const gk_kernel_params* params, int threads, double* probs, int* labels) {
    return guarded([&] {
        require(model && train && test && params, "null argument");
        require(threads >= 1, "threads must be >= 1");
        require(test->cases.empty() || (probs && labels), "null output buffer");
        if (model->net.input_dim() != static_cast<Eigen::Index>(train->cases.size())) {
            gk::fail(gk::ErrorKind::data, "model expects " + std::to_string(model->net.input_dim()) +
                                              " training cases; cohort has " + std::to_string(train->cases.size()));
        }
        if (test->cases.empty()) return;
        const auto train_graphs = graphs_of(*train);
        const auto test_graphs = graphs_of(*test);
        std::array<Eigen::MatrixXd, gk::kKernelCount> cross;
        const auto kinds = kernel_triple(*params);
        for (int k = 0; k < gk::kKernelCount; ++k) {
            const auto diag = gk::self_kernels(kinds[k], train_graphs);
            cross[k] = gk::cross_gram(kinds[k], test_graphs, train_graphs, diag, true, threads);
        }
        const auto predictions = gk::predict(model->net, cross);
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            probs[i] = predictions[i].probability;
            labels[i] = predictions[i].label;
        }
    });
}

gk_status gk_model_export_embeddings(const gk_model* model, const gk_cohort* train, const gk_cohort* test,
                                     const gk_kernel_params* params, int threads, const char* path) {
    return guarded([&] {
        require(model && train && params && path, "null argument");
        require(threads >= 1, "threads must be >= 1");
        if (model->net.input_dim() != static_cast<Eigen::Index>(train->cases.size())) {
            gk::fail(gk::ErrorKind::data, "model expects " + std::to_string(model->net.input_dim()) +
                                              " training cases; cohort has " + std::to_string(train->cases.size()));
        }
        const auto train_graphs = graphs_of(*train);
        const std::vector<gk::PatientGraph> test_graphs = test ? graphs_of(*test) : std::vector<gk::PatientGraph>{};
        const auto kinds = kernel_triple(*params);
        std::array<Eigen::MatrixXd, gk::kKernelCount> train_rows, test_rows;
        for (int k = 0; k < gk::kKernelCount; ++k) {
            train_rows[k] = gk::gram_matrix(kinds[k], train_graphs, true, threads).values;
            if (test_graphs.empty()) {
                test_rows[k] = Eigen::MatrixXd(0, train_rows[k].cols());
            } else {
                const auto diag = gk::self_kernels(kinds[k], train_graphs);
                test_rows[k] = gk::cross_gram(kinds[k], test_graphs, train_graphs, diag, true, threads);
            }
        }
        std::vector<const gk::LabeledCase*> train_cases, test_cases;
        for (const auto& c : train->cases) train_cases.push_back(&c);
        if (test) {
            for (const auto& c : test->cases) test_cases.push_back(&c);
        }
        const auto table = gk::export_embeddings(model->net, train_rows, test_rows, train_cases, test_cases);
        auto out = open_out(path);
        gk::write_embeddings_csv(out, table);
        finish(out, path);
    });
}

void gk_model_free(gk_model* model) { delete model; }

void gk_experiment_config_init(gk_experiment_config* config) {
    if (!config) return;
    const gk::ExperimentConfig d;
    config->folds = d.folds;
    config->seed = d.seed;
    config->kernels.wl_iterations = d.wl_iterations;
    config->kernels.tp_alpha = d.tp_alpha;
    config->net = from_core(d.net);
    config->metrics = GK_METRIC_EUCLIDEAN | GK_METRIC_COSINE;
    config->balances = GK_BALANCE_BALANCED | GK_BALANCE_IMBALANCED;
    config->baselines = d.baselines ? 1 : 0;
    config->threads = d.threads;
    config->embedding_dir = nullptr;
}

gk_status gk_experiment_run(const gk_cohort* cohort, const gk_experiment_config* config, const char* title,
                            gk_report** out) {
    return guarded([&] {
        require(cohort && config && out, "null argument");
        *out = nullptr;
        require((config->metrics & ~3u) == 0, "unknown metric bits");
        require((config->balances & ~3u) == 0, "unknown balance bits");
        gk::ExperimentConfig c;
        c.folds = config->folds;
        c.seed = config->seed;
        c.wl_iterations = config->kernels.wl_iterations;
        c.tp_alpha = config->kernels.tp_alpha;
        c.net = to_core(config->net);
        c.metrics.clear();
        if (config->metrics & GK_METRIC_EUCLIDEAN) c.metrics.push_back(gk::DistanceMetric::euclidean);
        if (config->metrics & GK_METRIC_COSINE) c.metrics.push_back(gk::DistanceMetric::cosine);
        c.balances.clear();
        if (config->balances & GK_BALANCE_BALANCED) c.balances.push_back(gk::BalanceMode::balanced);
        if (config->balances & GK_BALANCE_IMBALANCED) c.balances.push_back(gk::BalanceMode::imbalanced_70_30);
        c.baselines = config->baselines != 0;
        c.threads = config->threads;
        if (config->embedding_dir) c.embedding_dir = config->embedding_dir;
        auto report = std::make_unique<gk_report>();
        report->report = gk::run_experiment(cohort->cases, c, title ? title : cohort->disease.name);
        *out = report.release();
    });
}

gk_status gk_report_json(const gk_report* report, char* buf, size_t capacity, size_t* needed) {
    return guarded([&] {
        require(report != nullptr, "null argument");
        const std::string json = gk::report_json(report->report);
        if (needed) *needed = json.size() + 1;
        if (buf && capacity > json.size()) std::memcpy(buf, json.c_str(), json.size() + 1);
        else if (buf) gk::fail(gk::ErrorKind::invalid_argument, "buffer too small for report JSON");
    });
}

gk_status gk_report_write_json(const gk_report* report, const char* path) {
    return guarded([&] {
        require(report && path, "null argument");
        auto out = open_out(path);
        out << gk::report_json(report->report) << '\n';
        finish(out, path);
    });
}

gk_status gk_report_write_text(const gk_report* report, const char* path) {
    return guarded([&] {
        require(report && path, "null argument");
        auto out = open_out(path);
        gk::write_report_text(out, report->report);
        finish(out, path);
    });
}

gk_status gk_report_summary(const gk_report* report, gk_balance mode, const char* model, int column, double* mean,
                            double* stddev) {
    return guarded([&] {
        require(report && model, "null argument");
        require(column >= 0 && column < 3, "column must be 0 (acc), 1 (f1) or 2 (auc)");
        const auto* section = report->report.find(to_core(mode));
        if (!section) gk::fail(gk::ErrorKind::invalid_argument, "report has no such balance mode");
        const auto* result = section->find(model);
        if (!result) gk::fail(gk::ErrorKind::invalid_argument, std::string("report has no model ") + model);
        if (mean) *mean = result->summary[column].mean;
        if (stddev) *stddev = result->summary[column].stddev;
    });
}

gk_status gk_report_p_value(const gk_report* report, gk_balance mode, const char* model_a, const char* model_b,
                            int column, double* p) {
    return guarded([&] {
        require(report && model_a && model_b && p, "null argument");
        require(column >= 0 && column < 3, "column must be 0 (acc), 1 (f1) or 2 (auc)");
        const auto* section = report->report.find(to_core(mode));
        if (!section) gk::fail(gk::ErrorKind::invalid_argument, "report has no such balance mode");
        const auto* test = section->find_test(model_a, model_b);
        if (!test) gk::fail(gk::ErrorKind::invalid_argument, "report has no such model pair");
        *p = test->tests[column].p;
    });
}

void gk_report_free(gk_report* report) { delete report; }

}  // extern "C"
