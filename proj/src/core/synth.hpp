#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ehr.hpp"

namespace gk {

struct CohortSpec {
    std::size_t n_cases = 100;
    double failure_ratio = 0.5;
    DiseaseKind kind = DiseaseKind::short_term;
    double signal_strength = 1.0;  // 0: labels independent of events
    int vocab_size = 48;
    int min_events = 4;
    int max_events = 12;
    std::uint64_t seed = 0;
    std::string preset;  // disease name; empty for a custom cohort

    void validate() const;
};

// Disease statistics of the seven reference cohorts. `failure_ratio` is the
// rounded percentage the generator uses.
struct DiseasePreset {
    std::string_view key;
    std::string_view disease;
    std::size_t cases;
    std::size_t failures;
    double failure_ratio;
    DiseaseKind kind;
};

const std::vector<DiseasePreset>& disease_presets();
const DiseasePreset& find_preset(std::string_view key);

// Preset ratio and kind with chronic-sized event counts; n = round(cases * scale)
// unless `n_cases` is nonzero.
CohortSpec preset_spec(std::string_view key, std::size_t n_cases, double scale, std::uint64_t seed);

struct SyntheticCohort {
    std::vector<PatientRecord> records;  // full records, outcome events included
    DiseaseSpec disease;                 // labeling rule that reproduces `cases`
    std::vector<LabeledCase> cases;
};

SyntheticCohort synthesize(const CohortSpec& spec);
std::vector<LabeledCase> generate_cohort(const CohortSpec& spec);

enum class BalanceMode : std::uint8_t { balanced = 0, imbalanced_70_30 = 1 };

std::string_view to_string(BalanceMode mode);
BalanceMode parse_balance(std::string_view token);

struct ClassQuota {
    std::size_t successes = 0;
    std::size_t failures = 0;
};

ClassQuota rebalance_quota(std::size_t successes, std::size_t failures, BalanceMode mode);

std::vector<LabeledCase> rebalance(const std::vector<LabeledCase>& cases, BalanceMode mode, std::uint64_t seed);

}  // namespace gk
