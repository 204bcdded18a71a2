#include "ehr.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "error.hpp"
#include "text.hpp"

namespace gk {

namespace {

bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t extra = 0;
        if (c < 0x80) {
            extra = 0;
        } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
            extra = 1;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
        } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
            extra = 3;
        } else {
            return false;
        }
        for (std::size_t k = 1; k <= extra; ++k) {
            if (i + k >= s.size()) return false;
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
        }
        i += extra + 1;
    }
    return true;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
    fail(ErrorKind::parse, "line " + std::to_string(line) + ": " + what);
}

std::set<std::string> parse_code_list(std::string_view value) {
    std::set<std::string> out;
    for (auto token : text::split(value, ',')) {
        token = text::trim(token);
        if (!token.empty()) out.emplace(token);
    }
    return out;
}

std::string join(const std::set<std::string>& codes) {
    std::string out;
    for (const auto& c : codes) {
        if (!out.empty()) out += ',';
        out += c;
    }
    return out;
}

}  // namespace

bool event_before(const MedicalEvent& a, const MedicalEvent& b) {
    if (a.day != b.day) return a.day < b.day;
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.code < b.code;
}

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::diagnosis: return "dx";
        case EventKind::prescription: return "rx";
        case EventKind::other: return "other";
    }
    return "other";
}

std::string_view to_string(Gender gender) {
    switch (gender) {
        case Gender::female: return "F";
        case Gender::male: return "M";
        case Gender::unknown: return "U";
    }
    return "U";
}

std::string_view to_string(DiseaseKind kind) {
    return kind == DiseaseKind::chronic ? "chronic" : "short_term";
}

EventKind parse_event_kind(std::string_view token) {
    token = text::trim(token);
    if (token == "dx") return EventKind::diagnosis;
    if (token == "rx") return EventKind::prescription;
    if (token == "other") return EventKind::other;
    fail(ErrorKind::parse, "unknown event kind '" + std::string(token) + "'");
}

Gender parse_gender(std::string_view token) {
    token = text::trim(token);
    if (token == "F") return Gender::female;
    if (token == "M") return Gender::male;
    if (token == "U") return Gender::unknown;
    fail(ErrorKind::parse, "unknown gender '" + std::string(token) + "'");
}

DiseaseKind parse_disease_kind(std::string_view token) {
    token = text::trim(token);
    if (token == "short_term") return DiseaseKind::short_term;
    if (token == "chronic") return DiseaseKind::chronic;
    fail(ErrorKind::parse, "unknown disease kind '" + std::string(token) + "'");
}

std::vector<PatientRecord> parse_records(std::istream& in) {
    std::vector<PatientRecord> records;
    std::unordered_map<std::string, std::size_t> slot;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        if (!valid_utf8(line)) parse_fail(lineno, "invalid UTF-8");
        const auto cols = text::split(line, '\t');
        if (cols.size() != 4) {
            parse_fail(lineno, "expected 4 tab-separated columns, got " + std::to_string(cols.size()));
        }
        const auto id = text::trim(cols[0]);
        if (id.empty()) parse_fail(lineno, "empty patient_id");
        const auto day = text::parse_int(cols[1]);
        if (!day) parse_fail(lineno, "day '" + std::string(cols[1]) + "' is not an integer");
        if (*day < 0) parse_fail(lineno, "negative day " + std::to_string(*day));
        MedicalEvent ev;
        ev.day = *day;
        try {
            ev.kind = parse_event_kind(cols[2]);
        } catch (const Error& e) {
            parse_fail(lineno, e.what());
        }
        ev.code = std::string(text::trim(cols[3]));
        if (ev.code.empty()) parse_fail(lineno, "empty code");

        auto [it, inserted] = slot.try_emplace(std::string(id), records.size());
        if (inserted) {
            records.push_back(PatientRecord{std::string(id), {}, {}});
        }
        records[it->second].events.push_back(std::move(ev));
    }
    for (auto& r : records) {
        std::sort(r.events.begin(), r.events.end(), event_before);
        r.events.erase(std::unique(r.events.begin(), r.events.end()), r.events.end());
    }
    return records;
}

std::vector<PatientRecord> parse_records(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_records(in);
}

void apply_demographics(std::istream& in, std::vector<PatientRecord>& records) {
    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < records.size(); ++i) slot.emplace(records[i].patient_id, i);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        const auto cols = text::split(line, '\t');
        if (cols.size() != 3) parse_fail(lineno, "expected 3 tab-separated columns");
        const auto it = slot.find(std::string(text::trim(cols[0])));
        if (it == slot.end()) {
            parse_fail(lineno, "patient '" + std::string(text::trim(cols[0])) + "' has no events");
        }
        Demographics demo;
        try {
            demo.gender = parse_gender(cols[1]);
        } catch (const Error& e) {
            parse_fail(lineno, e.what());
        }
        const auto age = text::parse_int(cols[2]);
        if (!age || *age < 0 || *age > kMaxAgeYears) {
            parse_fail(lineno, "age '" + std::string(cols[2]) + "' outside [0, 130]");
        }
        demo.age_years = static_cast<int>(*age);
        records[it->second].demographics = demo;
    }
}

void write_records(std::ostream& out, const std::vector<PatientRecord>& records) {
    for (const auto& r : records) {
        for (const auto& e : r.events) {
            out << r.patient_id << '\t' << e.day << '\t' << to_string(e.kind) << '\t' << e.code << '\n';
        }
    }
}

void write_demographics(std::ostream& out, const std::vector<PatientRecord>& records) {
    for (const auto& r : records) {
        out << r.patient_id << '\t' << to_string(r.demographics.gender) << '\t'
            << r.demographics.age_years << '\n';
    }
}

void validate(const DiseaseSpec& spec) {
    if (spec.index_codes.empty()) fail(ErrorKind::invalid_argument, "disease spec: index_codes is empty");
    if (spec.history_window_days <= 0) {
        fail(ErrorKind::invalid_argument, "disease spec: history_window_days must be positive");
    }
    if (spec.outcome_window_days <= 0) {
        fail(ErrorKind::invalid_argument, "disease spec: outcome_window_days must be positive");
    }
}

DiseaseSpec parse_disease_spec(std::istream& in) {
    std::size_t bad = 0;
    const auto entries = text::read_key_values(in, &bad);
    if (bad != 0) parse_fail(bad, "expected key=value");
    DiseaseSpec spec;
    std::set<std::string> seen;
    for (const auto& kv : entries) {
        if (!seen.insert(kv.key).second) parse_fail(kv.line, "duplicate key '" + kv.key + "'");
        if (kv.key == "name") {
            spec.name = kv.value;
        } else if (kv.key == "index_codes") {
            spec.index_codes = parse_code_list(kv.value);
        } else if (kv.key == "failure_codes") {
            spec.failure_codes = parse_code_list(kv.value);
        } else if (kv.key == "history_window_days" || kv.key == "outcome_window_days") {
            const auto v = text::parse_int(kv.value);
            if (!v || *v <= 0 || *v > INT32_MAX) parse_fail(kv.line, kv.key + " must be a positive integer");
            (kv.key == "history_window_days" ? spec.history_window_days : spec.outcome_window_days) =
                static_cast<int>(*v);
        } else if (kv.key == "kind") {
            try {
                spec.kind = parse_disease_kind(kv.value);
            } catch (const Error& e) {
                parse_fail(kv.line, e.what());
            }
        } else {
            parse_fail(kv.line, "unknown key '" + kv.key + "'");
        }
    }
    validate(spec);
    return spec;
}

void write_disease_spec(std::ostream& out, const DiseaseSpec& spec) {
    out << "name=" << spec.name << '\n'
        << "index_codes=" << join(spec.index_codes) << '\n'
        << "failure_codes=" << join(spec.failure_codes) << '\n'
        << "history_window_days=" << spec.history_window_days << '\n'
        << "outcome_window_days=" << spec.outcome_window_days << '\n'
        << "kind=" << to_string(spec.kind) << '\n';
}

LabelingResult label_cohort(const std::vector<PatientRecord>& records, const DiseaseSpec& spec) {
    validate(spec);
    LabelingResult result;
    for (const auto& r : records) {
        const auto index = std::find_if(r.events.begin(), r.events.end(), [&](const MedicalEvent& e) {
            return spec.index_codes.count(e.code) > 0;
        });
        if (index == r.events.end()) {
            ++result.excluded;
            continue;
        }
        const std::int64_t index_day = index->day;
        const std::int64_t outcome_end = index_day + spec.outcome_window_days;
        const bool failed = std::any_of(r.events.begin(), r.events.end(), [&](const MedicalEvent& e) {
            return e.day > index_day && e.day <= outcome_end && spec.failure_codes.count(e.code) > 0;
        });

        LabeledCase c;
        c.record.patient_id = r.patient_id;
        c.record.demographics = r.demographics;
        c.label = failed ? 1 : 0;
        c.index_day = index_day;
        const std::int64_t history_start = index_day - spec.history_window_days;
        for (const auto& e : r.events) {
            if (e.day >= history_start && e.day <= index_day) c.record.events.push_back(e);
        }
        result.cases.push_back(std::move(c));
    }
    return result;
}

void write_labels(std::ostream& out, const std::vector<LabeledCase>& cases) {
    for (const auto& c : cases) {
        out << c.record.patient_id << '\t' << c.label << '\t' << c.index_day << '\n';
    }
}

std::vector<LabeledCase> attach_labels(std::istream& labels, std::vector<PatientRecord> records) {
    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < records.size(); ++i) slot.emplace(records[i].patient_id, i);
    std::vector<LabeledCase> cases;
    std::vector<bool> used(records.size(), false);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(labels, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        const auto cols = text::split(line, '\t');
        if (cols.size() != 3) parse_fail(lineno, "expected patient_id, label, index_day");
        const std::string id(text::trim(cols[0]));
        const auto it = slot.find(id);
        if (it == slot.end()) parse_fail(lineno, "patient '" + id + "' has no events");
        if (used[it->second]) parse_fail(lineno, "patient '" + id + "' labeled twice");
        const auto label = text::parse_int(cols[1]);
        if (!label || (*label != 0 && *label != 1)) parse_fail(lineno, "label must be 0 or 1");
        const auto index_day = text::parse_int(cols[2]);
        if (!index_day || *index_day < 0) parse_fail(lineno, "index_day must be a non-negative integer");
        used[it->second] = true;
        cases.push_back(LabeledCase{std::move(records[it->second]), static_cast<int>(*label), *index_day});
    }
    return cases;
}

}  // namespace gk
