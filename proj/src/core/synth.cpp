#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "error.hpp"
#include "rng.hpp"

namespace gk {

namespace {

constexpr int kShortHistoryDays = 2 * kDaysPerMonth;
constexpr int kChronicHistoryDays = 10 * kDaysPerYear;
constexpr int kShortOutcomeDays = 2 * kDaysPerMonth;
constexpr int kChronicOutcomeDays = kDaysPerYear;
constexpr double kChronicMeanGapDays = 90.0;
constexpr double kLateRecurrenceRate = 0.3;

std::string code_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "C%03d", index);
    return buf;
}

std::string patient_name(std::size_t index) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "P%06zu", index);
    return buf;
}

EventKind code_kind(int index) { return index % 2 == 0 ? EventKind::diagnosis : EventKind::prescription; }

// Each case carries a latent phenotype (a, b) choosing one half of code block
// A and one half of block B. Failure iff a != b, so both classes see every
// code with the same marginal frequency and the signal is only recoverable
// from which codes co-occur.
struct Phenotype {
    int a = 0;
    int b = 0;
};

int draw_code(Rng& rng, const CohortSpec& spec, Phenotype ph) {
    const int v = spec.vocab_size;
    if (!rng.bernoulli(spec.signal_strength)) return static_cast<int>(rng.below(static_cast<std::uint64_t>(v)));
    const int half = v / 8;  // size of A0, A1, B0, B1
    const std::uint64_t pick = rng.below(static_cast<std::uint64_t>(2 * half));
    if (pick < static_cast<std::uint64_t>(half)) return ph.a * half + static_cast<int>(pick);
    return 2 * half + ph.b * half + static_cast<int>(pick) - half;
}

}  // namespace

void CohortSpec::validate() const {
    if (n_cases < 2) fail(ErrorKind::invalid_argument, "cohort needs at least 2 cases");
    if (!(failure_ratio > 0.0 && failure_ratio < 1.0)) {
        fail(ErrorKind::invalid_argument, "failure_ratio must lie in (0, 1)");
    }
    if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) {
        fail(ErrorKind::invalid_argument, "signal_strength must lie in [0, 1]");
    }
    if (vocab_size < 8) fail(ErrorKind::invalid_argument, "vocab_size must be at least 8");
    if (min_events < 1 || max_events < min_events) {
        fail(ErrorKind::invalid_argument, "events_per_case range must satisfy 1 <= min <= max");
    }
}

const std::vector<DiseasePreset>& disease_presets() {
    static const std::vector<DiseasePreset> presets = {
        {"uti", "Urinary tract infection", 1501310, 703646, 0.47, DiseaseKind::short_term},
        {"aom", "Acute otitis media", 151522, 72264, 0.48, DiseaseKind::short_term},
        {"pneumonia", "Pneumonia", 95796, 37724, 0.39, DiseaseKind::short_term},
        {"cystitis", "Acute cystitis", 733119, 301902, 0.41, DiseaseKind::short_term},
        {"htn", "Hypertension", 235695, 104936, 0.45, DiseaseKind::chronic},
        {"lipid", "Hyperlipidemia", 123380, 26043, 0.21, DiseaseKind::chronic},
        {"dm", "Diabetes", 131997, 34414, 0.26, DiseaseKind::chronic},
    };
    return presets;
}

const DiseasePreset& find_preset(std::string_view key) {
    for (const auto& p : disease_presets()) {
        if (p.key == key) return p;
    }
    fail(ErrorKind::invalid_argument,
         "unknown preset '" + std::string(key) + "' (expected uti|aom|pneumonia|cystitis|htn|lipid|dm)");
}

CohortSpec preset_spec(std::string_view key, std::size_t n_cases, double scale, std::uint64_t seed) {
    const auto& p = find_preset(key);
    CohortSpec spec;
    spec.preset = std::string(p.key);
    spec.failure_ratio = p.failure_ratio;
    spec.kind = p.kind;
    spec.seed = seed;
    if (p.kind == DiseaseKind::chronic) {
        spec.min_events = 8;
        spec.max_events = 30;
    }
    if (n_cases > 0) {
        spec.n_cases = n_cases;
    } else {
        if (!(scale > 0.0)) fail(ErrorKind::invalid_argument, "preset scale must be positive");
        spec.n_cases = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(static_cast<double>(p.cases) * scale)));
    }
    return spec;
}

SyntheticCohort synthesize(const CohortSpec& spec) {
    spec.validate();
    const bool chronic = spec.kind == DiseaseKind::chronic;
    const std::string name = spec.preset.empty() ? std::string("synthetic") : spec.preset;

    SyntheticCohort out;
    out.disease.name = name;
    out.disease.kind = spec.kind;
    out.disease.history_window_days = chronic ? kChronicHistoryDays : kShortHistoryDays;
    out.disease.outcome_window_days = chronic ? kChronicOutcomeDays : kShortOutcomeDays;
    const std::string index_code = "IDX:" + name;
    // Short-term failure is recurrence of the index diagnosis.
    const std::string failure_code = chronic ? "CX:" + name : index_code;
    out.disease.index_codes = {index_code};
    out.disease.failure_codes = {failure_code};

    const auto failures = static_cast<std::size_t>(std::llround(static_cast<double>(spec.n_cases) * spec.failure_ratio));
    std::vector<int> labels(spec.n_cases, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(failures), 1);
    Rng label_rng(derive_seed(spec.seed, 0));
    label_rng.shuffle(labels);

    const int history = out.disease.history_window_days;
    const int outcome = out.disease.outcome_window_days;
    out.records.reserve(spec.n_cases);
    out.cases.reserve(spec.n_cases);
    for (std::size_t i = 0; i < spec.n_cases; ++i) {
        Rng rng(derive_seed(spec.seed, i + 1));
        const int label = labels[i];
        Phenotype ph;
        ph.a = static_cast<int>(rng.below(2));
        ph.b = label == 1 ? 1 - ph.a : ph.a;

        PatientRecord record;
        record.patient_id = patient_name(i);
        record.demographics.gender = rng.bernoulli(0.5) ? Gender::female : Gender::male;
        record.demographics.age_years = static_cast<int>(rng.range(18, 90));

        const std::int64_t index_day = history + rng.range(0, kDaysPerYear);
        const int n_events = static_cast<int>(rng.range(spec.min_events, spec.max_events));
        std::int64_t day = index_day;
        for (int e = 0; e < n_events; ++e) {
            if (chronic) {
                // Failure histories are sparser: longer gaps between visits.
                const double mean_gap = kChronicMeanGapDays * (1.0 + (label == 1 ? spec.signal_strength : 0.0));
                day -= 1 + static_cast<std::int64_t>(rng.exponential(mean_gap));
            } else {
                day = index_day - rng.range(1, history);
            }
            if (day < index_day - history) {
                if (chronic) break;
                continue;
            }
            const int code = draw_code(rng, spec, ph);
            record.events.push_back({code_name(code), day, code_kind(code)});
        }
        record.events.push_back({index_code, index_day, EventKind::diagnosis});

        if (label == 1) {
            record.events.push_back({failure_code, index_day + rng.range(1, outcome), EventKind::diagnosis});
        } else if (rng.bernoulli(kLateRecurrenceRate)) {
            record.events.push_back({failure_code, index_day + outcome + rng.range(1, 60), EventKind::diagnosis});
        }
        std::sort(record.events.begin(), record.events.end(), event_before);
        record.events.erase(std::unique(record.events.begin(), record.events.end()), record.events.end());

        LabeledCase c;
        c.record.patient_id = record.patient_id;
        c.record.demographics = record.demographics;
        c.label = label;
        c.index_day = index_day;
        for (const auto& ev : record.events) {
            if (ev.day >= index_day - history && ev.day <= index_day) c.record.events.push_back(ev);
        }
        out.cases.push_back(std::move(c));
        out.records.push_back(std::move(record));
    }
    return out;
}

std::vector<LabeledCase> generate_cohort(const CohortSpec& spec) { return synthesize(spec).cases; }

std::string_view to_string(BalanceMode mode) {
    return mode == BalanceMode::balanced ? "balanced" : "imbalanced";
}

BalanceMode parse_balance(std::string_view token) {
    if (token == "balanced") return BalanceMode::balanced;
    if (token == "imbalanced" || token == "imbalanced_70_30") return BalanceMode::imbalanced_70_30;
    fail(ErrorKind::invalid_argument, "unknown balance mode '" + std::string(token) + "'");
}

ClassQuota rebalance_quota(std::size_t successes, std::size_t failures, BalanceMode mode) {
    if (successes == 0 || failures == 0) fail(ErrorKind::data, "rebalance needs both classes present");
    if (mode == BalanceMode::balanced) {
        const auto m = std::min(successes, failures);
        return {m, m};
    }
    // Ties make success the majority class.
    const bool success_major = successes >= failures;
    const std::size_t major = success_major ? successes : failures;
    const std::size_t minor = success_major ? failures : successes;
    std::size_t keep_major = major, keep_minor = minor;
    if (major * 30 >= minor * 70) {
        keep_major = minor * 70 / 30;
    } else {
        keep_minor = major * 30 / 70;
        if (keep_minor == 0) fail(ErrorKind::data, "too few cases for a 70:30 split");
    }
    return success_major ? ClassQuota{keep_major, keep_minor} : ClassQuota{keep_minor, keep_major};
}

std::vector<LabeledCase> rebalance(const std::vector<LabeledCase>& cases, BalanceMode mode, std::uint64_t seed) {
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < cases.size(); ++i) by_class[cases[i].label == 1 ? 1 : 0].push_back(i);
    const ClassQuota quota = rebalance_quota(by_class[0].size(), by_class[1].size(), mode);

    Rng rng(seed);
    std::vector<std::size_t> keep;
    const std::size_t wanted[2] = {quota.successes, quota.failures};
    for (int c = 0; c < 2; ++c) {
        rng.shuffle(by_class[c]);
        keep.insert(keep.end(), by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(wanted[c]));
    }
    rng.shuffle(keep);
    std::vector<LabeledCase> out;
    out.reserve(keep.size());
    for (auto i : keep) out.push_back(cases[i]);
    return out;
}

}  // namespace gk
