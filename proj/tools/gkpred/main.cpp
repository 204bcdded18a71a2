#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gkpred/gkpred.h"

namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kDataError = 3, kNumericError = 4 };

struct Failure {
    int code;
    std::string message;
};

[[noreturn]] void usage(const std::string& message) { throw Failure{kUsage, message}; }

int exit_code_for(gk_status status) {
    switch (status) {
        case GK_OK: return kOk;
        case GK_ERR_INVALID_ARGUMENT: return kUsage;
        case GK_ERR_NUMERIC: return kNumericError;
        default: return kDataError;
    }
}

// Throws with the stage name when a library call fails.
void check(gk_status status, const std::string& stage) {
    if (status != GK_OK) throw Failure{exit_code_for(status), stage + ": " + gk_last_error()};
}

void log(const std::string& line) { std::cerr << "gkpred: " << line << '\n'; }

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---- run configuration ----------------------------------------------------

using Settings = std::map<std::string, std::string>;

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "seed", "out", "threads",
        "preset", "name", "n", "failure_ratio", "kind", "signal", "vocab_size", "min_events", "max_events",
        "events", "demographics", "disease",
        "cohort", "test_cohort", "grams", "model",
        "wl_h", "tp_alpha", "csv", "graphs",
        "embed_dim", "fusion_dim", "classifier_dim", "margin", "metric", "learning_rate", "batch_size",
        "max_epochs", "patience",
        "folds", "balance", "baselines", "title", "embeddings"};
    return keys;
}

Settings defaults_for(const std::string& command) {
    gk_cohort_spec spec;
    gk_cohort_spec_init(&spec);
    gk_kernel_params kernels;
    gk_kernel_params_init(&kernels);
    gk_net_config net;
    gk_net_config_init(&net);
    gk_experiment_config experiment;
    gk_experiment_config_init(&experiment);
    return {
        {"seed", "0"},
        {"out", "."},
        {"threads", "1"},
        {"preset", ""},
        {"name", ""},
        {"n", std::to_string(spec.n_cases)},
        {"failure_ratio", format_double(spec.failure_ratio)},
        {"kind", spec.kind == GK_CHRONIC ? "chronic" : "short_term"},
        {"signal", format_double(spec.signal_strength)},
        {"vocab_size", std::to_string(spec.vocab_size)},
        {"min_events", std::to_string(spec.min_events)},
        {"max_events", std::to_string(spec.max_events)},
        {"events", ""},
        {"demographics", ""},
        {"disease", ""},
        {"cohort", ""},
        {"test_cohort", ""},
        {"grams", ""},
        {"model", ""},
        {"wl_h", std::to_string(kernels.wl_iterations)},
        {"tp_alpha", format_double(kernels.tp_alpha)},
        {"csv", "false"},
        {"graphs", "false"},
        {"embed_dim", std::to_string(net.embed_dim)},
        {"fusion_dim", std::to_string(net.fusion_dim)},
        {"classifier_dim", std::to_string(net.classifier_dim)},
        {"margin", format_double(net.margin)},
        {"metric", command == "evaluate" ? "both" : "euclidean"},
        {"learning_rate", format_double(net.learning_rate)},
        {"batch_size", std::to_string(net.batch_size)},
        {"max_epochs", std::to_string(net.max_epochs)},
        {"patience", std::to_string(net.patience)},
        {"folds", std::to_string(experiment.folds)},
        {"balance", "both"},
        {"baselines", experiment.baselines ? "true" : "false"},
        {"title", ""},
        {"embeddings", "true"},
    };
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

Settings read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Failure{kDataError, "config: cannot open " + path};
    const std::set<std::string> known(known_keys().begin(), known_keys().end());
    Settings out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) usage("config " + path + " line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        if (!known.count(key)) usage("config " + path + " line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (out.count(key)) usage("config " + path + " line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        out[key] = trim(t.substr(eq + 1));
    }
    return out;
}

class Config {
public:
    Config(std::string command, Settings values, std::set<std::string> given)
        : command_(std::move(command)), values_(std::move(values)), given_(std::move(given)) {}

    const std::string& str(const std::string& key) const { return values_.at(key); }
    bool given(const std::string& key) const { return given_.count(key) > 0; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    std::uint64_t u64(const std::string& key) const {
        const auto& v = str(key);
        char* end = nullptr;
        errno = 0;
        const auto x = std::strtoull(v.c_str(), &end, 10);
        if (v.empty() || v[0] == '-' || *end != '\0' || errno == ERANGE) usage(key + " must be an unsigned integer, got '" + v + "'");
        return x;
    }

    int integer(const std::string& key) const {
        const auto& v = str(key);
        char* end = nullptr;
        errno = 0;
        const long x = std::strtol(v.c_str(), &end, 10);
        if (v.empty() || *end != '\0' || errno == ERANGE || x < INT32_MIN || x > INT32_MAX) {
            usage(key + " must be an integer, got '" + v + "'");
        }
        return static_cast<int>(x);
    }

    double real(const std::string& key) const {
        const auto& v = str(key);
        char* end = nullptr;
        const double x = std::strtod(v.c_str(), &end);
        if (v.empty() || *end != '\0') usage(key + " must be a number, got '" + v + "'");
        return x;
    }

    bool flag(const std::string& key) const {
        const auto& v = str(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        usage(key + " must be true or false, got '" + v + "'");
    }

    std::string required_path(const std::string& key) const {
        const auto& v = str(key);
        if (v.empty()) usage(command_ + " needs --" + option_name(key));
        return v;
    }

    fs::path out() const { return fs::path(str("out")); }

    void write_resolved(const fs::path& dir) const {
        fs::create_directories(dir);
        const auto path = dir / (command_ + ".resolved.cfg");
        std::ofstream file(path, std::ios::trunc);
        if (!file) throw Failure{kDataError, "config: cannot write " + path.string()};
        file << "# gkpred " << command_ << " --config " << path.filename().string() << '\n';
        for (const auto& [key, value] : values_) file << key << " = " << value << '\n';
    }

    static std::string option_name(std::string key) {
        for (auto& c : key) {
            if (c == '_') c = '-';
        }
        return key;
    }

private:
    std::string command_;
    Settings values_;
    std::set<std::string> given_;  // set by a flag or the config file
};

gk_kernel_params kernel_params(const Config& c) {
    gk_kernel_params p;
    gk_kernel_params_init(&p);
    p.wl_iterations = c.integer("wl_h");
    p.tp_alpha = c.real("tp_alpha");
    return p;
}

gk_metric single_metric(const Config& c) {
    const auto& m = c.str("metric");
    if (m == "euclidean") return GK_EUCLIDEAN;
    if (m == "cosine") return GK_COSINE;
    usage("metric must be euclidean or cosine here, got '" + m + "'");
}

gk_net_config net_config(const Config& c) {
    gk_net_config n;
    gk_net_config_init(&n);
    n.embed_dim = c.integer("embed_dim");
    n.fusion_dim = c.integer("fusion_dim");
    n.classifier_dim = c.integer("classifier_dim");
    n.margin = c.real("margin");
    n.learning_rate = c.real("learning_rate");
    n.batch_size = c.integer("batch_size");
    n.max_epochs = c.integer("max_epochs");
    n.patience = c.integer("patience");
    n.seed = c.u64("seed");
    return n;
}

int threads(const Config& c) {
    const int t = c.integer("threads");
    if (t < 1) usage("threads must be >= 1");
    return t;
}

// Owning wrappers so early exits release library handles.
template <typename T, void (*Free)(T*)>
struct Handle {
    T* ptr = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { Free(ptr); }
    T** out() { return &ptr; }
    T* get() const { return ptr; }
};
using Cohort = Handle<gk_cohort, gk_cohort_free>;
using Gram = Handle<gk_gram, gk_gram_free>;
using Model = Handle<gk_model, gk_model_free>;
using Report = Handle<gk_report, gk_report_free>;

constexpr const char* kGramFiles[3] = {"gram_wl.kgrm", "gram_tp.kgrm", "gram_vh.kgrm"};
constexpr const char* kKernelNames[3] = {"wl", "tp", "vh"};

void load_cohort(const std::string& dir, Cohort& cohort) {
    if (!fs::is_directory(dir)) throw Failure{kDataError, "ingest: cohort directory " + dir + " does not exist"};
    check(gk_cohort_load(dir.c_str(), cohort.out()), "ingest");
}

std::string cohort_summary(const gk_cohort* cohort) {
    const auto n = gk_cohort_size(cohort);
    const auto f = gk_cohort_failures(cohort);
    return std::to_string(n) + " cases, " + std::to_string(f) + " failures, " + std::to_string(n - f) + " successes";
}

// ---- subcommands ------------------------------------------------------------

void cmd_generate(Config& c) {
    gk_cohort_spec spec;
    gk_cohort_spec_init(&spec);
    spec.seed = c.u64("seed");
    std::string name = c.str("name");
    const auto& preset = c.str("preset");
    if (!preset.empty()) {
        check(gk_cohort_spec_preset(&spec, preset.c_str(), 0), "generate");
        if (name.empty()) name = preset;
    }
    // A preset supplies ratio, kind and event counts unless they are given explicitly.
    auto take = [&](const char* key) { return preset.empty() || c.given(key); };
    spec.n_cases = c.u64("n");
    if (take("failure_ratio")) spec.failure_ratio = c.real("failure_ratio");
    if (take("kind")) {
        const auto& kind = c.str("kind");
        if (kind != "short_term" && kind != "chronic") usage("kind must be short_term or chronic, got '" + kind + "'");
        spec.kind = kind == "chronic" ? GK_CHRONIC : GK_SHORT_TERM;
    }
    spec.signal_strength = c.real("signal");
    spec.vocab_size = c.integer("vocab_size");
    if (take("min_events")) spec.min_events = c.integer("min_events");
    if (take("max_events")) spec.max_events = c.integer("max_events");
    c.set("failure_ratio", format_double(spec.failure_ratio));
    c.set("kind", spec.kind == GK_CHRONIC ? "chronic" : "short_term");
    c.set("min_events", std::to_string(spec.min_events));
    c.set("max_events", std::to_string(spec.max_events));
    Cohort cohort;
    check(gk_cohort_generate(&spec, name.empty() ? nullptr : name.c_str(), cohort.out()), "generate");
    check(gk_cohort_save(cohort.get(), c.out().string().c_str()), "generate");
    c.write_resolved(c.out());
    log("generate: " + cohort_summary(cohort.get()) + " -> " + c.out().string());
}

void cmd_ingest(const Config& c) {
    const auto events = c.required_path("events");
    const auto disease = c.required_path("disease");
    const auto& demo = c.str("demographics");
    Cohort cohort;
    check(gk_cohort_ingest(events.c_str(), demo.empty() ? nullptr : demo.c_str(), disease.c_str(), cohort.out()),
          "ingest");
    check(gk_cohort_save(cohort.get(), c.out().string().c_str()), "ingest");
    c.write_resolved(c.out());
    log("ingest: " + cohort_summary(cohort.get()) + "; " + std::to_string(gk_cohort_excluded(cohort.get())) +
        " records without an index event excluded");
}

void cmd_gram(const Config& c) {
    Cohort cohort;
    load_cohort(c.required_path("cohort"), cohort);
    const auto params = kernel_params(c);
    const auto dir = c.out();
    fs::create_directories(dir);
    if (c.flag("graphs")) check(gk_cohort_write_graphs(cohort.get(), (dir / "graphs.txt").string().c_str()), "graph");
    const auto n = gk_cohort_size(cohort.get());
    for (int k = 0; k < 3; ++k) {
        Gram gram;
        const std::string stage = std::string("gram ") + kKernelNames[k];
        check(gk_gram_compute(cohort.get(), static_cast<gk_kernel>(k), &params, 1, threads(c), gram.out()), stage);
        double min_eig = 0.0;
        check(gk_gram_min_eigenvalue(gram.get(), &min_eig), stage);
        const double tolerance = -1e-8 * static_cast<double>(n);
        log(stage + ": N=" + std::to_string(n) + ", min eigenvalue " + format_double(min_eig));
        if (min_eig < tolerance) {
            throw Failure{kNumericError, stage + ": Gram is not positive semidefinite (min eigenvalue " +
                                             format_double(min_eig) + " < " + format_double(tolerance) + ")"};
        }
        check(gk_gram_save(gram.get(), (dir / kGramFiles[k]).string().c_str()), stage);
        if (c.flag("csv")) {
            const auto csv = (dir / kGramFiles[k]).replace_extension(".csv");
            check(gk_gram_write_csv(gram.get(), csv.string().c_str()), stage);
        }
    }
    c.write_resolved(dir);
}

void cmd_train(const Config& c) {
    Cohort cohort;
    load_cohort(c.required_path("cohort"), cohort);
    const auto params = kernel_params(c);
    Gram grams[3];
    const auto& gram_dir = c.str("grams");
    for (int k = 0; k < 3; ++k) {
        const std::string stage = std::string("gram ") + kKernelNames[k];
        if (gram_dir.empty()) {
            check(gk_gram_compute(cohort.get(), static_cast<gk_kernel>(k), &params, 1, threads(c), grams[k].out()),
                  stage);
        } else {
            const auto path = fs::path(gram_dir) / kGramFiles[k];
            check(gk_gram_load(path.string().c_str(), grams[k].out()), stage);
        }
    }
    auto net = net_config(c);
    net.metric = single_metric(c);
    const gk_gram* triple[3] = {grams[0].get(), grams[1].get(), grams[2].get()};
    Model model;
    check(gk_model_train(triple, cohort.get(), &net, model.out()), "train");
    const auto dir = c.out();
    fs::create_directories(dir);
    check(gk_model_save(model.get(), (dir / "model.knet").string().c_str()), "train");
    check(gk_model_write_trace(model.get(), (dir / "trace.csv").string().c_str()), "train");
    c.write_resolved(dir);
    log("train: stopped after " + std::to_string(gk_model_stop_epoch(model.get())) + " epochs -> " +
        (dir / "model.knet").string());
}

void cmd_evaluate(const Config& c) {
    Cohort cohort;
    load_cohort(c.required_path("cohort"), cohort);
    gk_experiment_config e;
    gk_experiment_config_init(&e);
    e.seed = c.u64("seed");
    e.folds = c.integer("folds");
    e.kernels = kernel_params(c);
    e.net = net_config(c);
    e.threads = threads(c);
    e.baselines = c.flag("baselines") ? 1 : 0;
    const auto& metric = c.str("metric");
    if (metric == "both") e.metrics = GK_METRIC_EUCLIDEAN | GK_METRIC_COSINE;
    else e.metrics = single_metric(c) == GK_COSINE ? GK_METRIC_COSINE : GK_METRIC_EUCLIDEAN;
    const auto& balance = c.str("balance");
    if (balance == "both") e.balances = GK_BALANCE_BALANCED | GK_BALANCE_IMBALANCED;
    else if (balance == "balanced") e.balances = GK_BALANCE_BALANCED;
    else if (balance == "imbalanced" || balance == "imbalanced_70_30") e.balances = GK_BALANCE_IMBALANCED;
    else usage("balance must be balanced, imbalanced or both, got '" + balance + "'");

    const auto dir = c.out();
    fs::create_directories(dir);
    const auto embeddings = (dir / "embeddings").string();
    if (c.flag("embeddings")) e.embedding_dir = embeddings.c_str();
    const auto& title = c.str("title");
    Report report;
    check(gk_experiment_run(cohort.get(), &e, title.empty() ? nullptr : title.c_str(), report.out()), "evaluate");
    check(gk_report_write_json(report.get(), (dir / "report.json").string().c_str()), "report");
    check(gk_report_write_text(report.get(), (dir / "report.txt").string().c_str()), "report");
    c.write_resolved(dir);
    std::ifstream table(dir / "report.txt");
    std::cout << table.rdbuf();
}

void cmd_export(const Config& c) {
    Model model;
    check(gk_model_load(c.required_path("model").c_str(), model.out()), "export");
    Cohort train;
    load_cohort(c.required_path("cohort"), train);
    Cohort test;
    if (!c.str("test_cohort").empty()) load_cohort(c.str("test_cohort"), test);
    const auto params = kernel_params(c);
    const auto dir = c.out();
    fs::create_directories(dir);
    const auto path = dir / "embeddings.csv";
    check(gk_model_export_embeddings(model.get(), train.get(), test.get(), &params, threads(c), path.string().c_str()),
          "export");
    c.write_resolved(dir);
    log("export-embeddings: -> " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-kernel metric-learning outcome prediction"};
    app.require_subcommand(1);
    app.fallthrough();

    Settings flags;
    std::string config_path;
    auto bind = [&flags](CLI::App* cmd, const std::string& name, const std::string& key, const std::string& help) {
        cmd->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
    };
    auto bind_flag = [&flags](CLI::App* cmd, const std::string& name, const std::string& key, const std::string& value,
                              const std::string& help) {
        cmd->add_flag_callback(name, [&flags, key, value] { flags[key] = value; }, help);
    };

    app.add_option("--config", config_path, "flat key=value run configuration; flags override it");
    bind(&app, "--seed", "seed", "random seed (u64)");
    bind(&app, "--out", "out", "output directory");
    bind(&app, "--threads", "threads", "worker threads for Gram computation and folds");

    auto* generate = app.add_subcommand("generate", "write a synthetic cohort directory");
    bind(generate, "--preset", "preset", "uti|aom|pneumonia|cystitis|htn|lipid|dm");
    bind(generate, "--name", "name", "disease name used in index/failure codes");
    bind(generate, "--n", "n", "number of cases");
    bind(generate, "--failure-ratio", "failure_ratio", "fraction of failure cases");
    bind(generate, "--kind", "kind", "short_term|chronic");
    bind(generate, "--signal", "signal", "signal strength in [0,1]");
    bind(generate, "--vocab-size", "vocab_size", "number of distinct event codes");
    bind(generate, "--min-events", "min_events", "fewest history events per case");
    bind(generate, "--max-events", "max_events", "most history events per case");

    auto* ingest = app.add_subcommand("ingest", "label raw event records into a cohort directory");
    bind(ingest, "--events", "events", "event records (patient_id, day, dx|rx|other, code)");
    bind(ingest, "--demographics", "demographics", "demographics (patient_id, F|M|U, age)");
    bind(ingest, "--disease", "disease", "disease rule (key=value)");

    auto* gram = app.add_subcommand("gram", "compute the three normalized Gram matrices");
    auto* train = app.add_subcommand("train", "train the metric-learning network on a cohort");
    auto* evaluate = app.add_subcommand("evaluate", "cross-validated comparison of metrics and baselines");
    auto* exporter = app.add_subcommand("export-embeddings", "write kernel embeddings with a 2D projection");

    for (auto* cmd : {gram, train, evaluate, exporter}) {
        bind(cmd, "--cohort", "cohort", "cohort directory");
        bind(cmd, "--wl-h", "wl_h", "Weisfeiler-Lehman iterations");
        bind(cmd, "--tp-alpha", "tp_alpha", "temporal kernel bandwidth");
    }
    bind_flag(gram, "--csv", "csv", "true", "also write each Gram as CSV");
    bind_flag(gram, "--graphs", "graphs", "true", "also write the patient graphs as edge listings");
    for (auto* cmd : {train, evaluate}) {
        bind(cmd, "--embed-dim", "embed_dim", "per-kernel embedding width");
        bind(cmd, "--fusion-dim", "fusion_dim", "fusion (embedding) width");
        bind(cmd, "--classifier-dim", "classifier_dim", "classifier input width (equals fusion width)");
        bind(cmd, "--margin", "margin", "contrastive margin");
        bind(cmd, "--metric", "metric", train == cmd ? "euclidean|cosine" : "euclidean|cosine|both");
        bind(cmd, "--learning-rate", "learning_rate", "Adamax learning rate");
        bind(cmd, "--batch-size", "batch_size", "minibatch size");
        bind(cmd, "--max-epochs", "max_epochs", "epoch limit");
        bind(cmd, "--patience", "patience", "early-stopping patience in epochs");
    }
    bind(train, "--grams", "grams", "directory of precomputed Gram files (computed when omitted)");
    bind(evaluate, "--folds", "folds", "cross-validation folds");
    bind(evaluate, "--balance", "balance", "balanced|imbalanced|both");
    bind_flag(evaluate, "--no-baselines", "baselines", "false", "skip the SVM and LR baselines");
    bind_flag(evaluate, "--no-embeddings", "embeddings", "false", "skip the fold-0 embedding export");
    bind(evaluate, "--title", "title", "report title");
    bind(exporter, "--model", "model", "trained model file");
    bind(exporter, "--test-cohort", "test_cohort", "held-out cohort directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    CLI::App* chosen = app.get_subcommands().front();
    const std::string command = chosen->get_name();
    try {
        Settings values = defaults_for(command);
        std::set<std::string> given;
        if (!config_path.empty()) {
            for (auto& [k, v] : read_config_file(config_path)) {
                values[k] = v;
                given.insert(k);
            }
        }
        for (auto& [k, v] : flags) {
            values[k] = v;
            given.insert(k);
        }
        Config config(command, std::move(values), std::move(given));
        if (command == "generate") cmd_generate(config);
        else if (command == "ingest") cmd_ingest(config);
        else if (command == "gram") cmd_gram(config);
        else if (command == "train") cmd_train(config);
        else if (command == "evaluate") cmd_evaluate(config);
        else cmd_export(config);
    } catch (const Failure& f) {
        std::cerr << "gkpred " << command << ": error: " << f.message << '\n';
        return f.code;
    } catch (const std::exception& e) {
        std::cerr << "gkpred " << command << ": error: " << e.what() << '\n';
        return kDataError;
    }
    return kOk;
}
