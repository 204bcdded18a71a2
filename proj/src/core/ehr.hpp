#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace gk {

enum class EventKind : std::uint8_t { diagnosis = 0, prescription = 1, other = 2 };
enum class Gender : std::uint8_t { female = 0, male = 1, unknown = 2 };
enum class DiseaseKind : std::uint8_t { short_term = 0, chronic = 1 };

inline constexpr int kDaysPerMonth = 30;
inline constexpr int kDaysPerYear = 365;
inline constexpr int kMaxAgeYears = 130;

struct MedicalEvent {
    std::string code;
    std::int64_t day = 0;
    EventKind kind = EventKind::diagnosis;

    friend auto operator<=>(const MedicalEvent&, const MedicalEvent&) = default;
};

// Total order used everywhere events are sorted: day, then (kind, code).
bool event_before(const MedicalEvent& a, const MedicalEvent& b);

struct Demographics {
    Gender gender = Gender::unknown;
    int age_years = 0;

    friend bool operator==(const Demographics&, const Demographics&) = default;
};

struct PatientRecord {
    std::string patient_id;
    Demographics demographics;
    std::vector<MedicalEvent> events;

    friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

struct DiseaseSpec {
    std::string name;
    std::set<std::string> index_codes;
    std::set<std::string> failure_codes;
    int history_window_days = 2 * kDaysPerMonth;
    int outcome_window_days = 2 * kDaysPerMonth;
    DiseaseKind kind = DiseaseKind::short_term;
};

struct LabeledCase {
    PatientRecord record;
    int label = 0;  // failure = 1, success = 0
    std::int64_t index_day = 0;

    friend bool operator==(const LabeledCase&, const LabeledCase&) = default;
};

struct LabelingResult {
    std::vector<LabeledCase> cases;
    std::size_t excluded = 0;  // records without any index event
};

std::string_view to_string(EventKind kind);
std::string_view to_string(Gender gender);
std::string_view to_string(DiseaseKind kind);
EventKind parse_event_kind(std::string_view token);
Gender parse_gender(std::string_view token);
DiseaseKind parse_disease_kind(std::string_view token);

// Event Record Format: patient_id \t day \t dx|rx|other \t code, one row per event.
// Records come out in order of first appearance; events sorted by event_before.
std::vector<PatientRecord> parse_records(std::istream& in);
std::vector<PatientRecord> parse_records(std::string_view text);

// patient_id \t F|M|U \t age_years. Fills demographics of matching records;
// ids absent from `records` are an error, records absent from the file keep
// the default (unknown, 0).
void apply_demographics(std::istream& in, std::vector<PatientRecord>& records);

void write_records(std::ostream& out, const std::vector<PatientRecord>& records);
void write_demographics(std::ostream& out, const std::vector<PatientRecord>& records);

// Flat key=value config. Keys: name, index_codes, failure_codes,
// history_window_days, outcome_window_days, kind.
DiseaseSpec parse_disease_spec(std::istream& in);
void write_disease_spec(std::ostream& out, const DiseaseSpec& spec);
void validate(const DiseaseSpec& spec);

LabelingResult label_cohort(const std::vector<PatientRecord>& records, const DiseaseSpec& spec);

// Labels manifest: patient_id \t label \t index_day.
void write_labels(std::ostream& out, const std::vector<LabeledCase>& cases);
std::vector<LabeledCase> attach_labels(std::istream& labels, std::vector<PatientRecord> records);

}  // namespace gk
