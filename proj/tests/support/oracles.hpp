#pragma once

// Independent reference implementations. They share no code with the library
// beyond plain data types, and favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "ehr.hpp"
#include "patient_graph.hpp"
#include "rng.hpp"

namespace oracle {

// ---- random inputs ----------------------------------------------------------

// A case with `events` events drawn from a small code pool, so labels repeat
// and WL refinements actually collide across graphs.
inline gk::LabeledCase random_case(gk::Rng& rng, int events, int vocab, int max_gap = 20) {
    gk::LabeledCase c;
    c.record.patient_id = "R" + std::to_string(rng.next() % 100000);
    c.record.demographics.gender = static_cast<gk::Gender>(rng.below(3));
    c.record.demographics.age_years = static_cast<int>(rng.below(100));
    std::int64_t day = 1000;
    for (int i = 0; i < events; ++i) {
        day += static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(max_gap + 1)));
        gk::MedicalEvent e;
        e.code = "K" + std::to_string(rng.below(static_cast<std::uint64_t>(vocab)));
        e.kind = static_cast<gk::EventKind>(rng.below(3));
        e.day = day;
        c.record.events.push_back(e);
    }
    std::sort(c.record.events.begin(), c.record.events.end(), gk::event_before);
    c.record.events.erase(std::unique(c.record.events.begin(), c.record.events.end()), c.record.events.end());
    c.index_day = day;
    c.label = static_cast<int>(rng.below(2));
    return c;
}

// ---- graph kernels ----------------------------------------------------------

using Histogram = std::map<std::string, double>;

// Materializes every WL feature as an explicit string: a node's round-r label
// is its round-(r-1) label followed by the sorted multisets of its in- and
// out-neighbours' round-(r-1) labels.
inline Histogram wl_dictionary(const gk::PatientGraph& g, int h) {
    const std::size_t n = g.labels.size();
    std::vector<std::string> label(g.labels.begin(), g.labels.end());
    Histogram features;
    for (const auto& l : label) features["0:" + l] += 1.0;
    for (int round = 1; round <= h; ++round) {
        std::vector<std::string> next(n);
        for (std::size_t v = 0; v < n; ++v) {
            std::vector<std::string> ins, outs;
            for (const auto& e : g.edges) {
                if (e.dst == v) ins.push_back(label[e.src]);
                if (e.src == v) outs.push_back(label[e.dst]);
            }
            std::sort(ins.begin(), ins.end());
            std::sort(outs.begin(), outs.end());
            std::string s = "(" + label[v] + "|in:";
            for (const auto& x : ins) s += x + ";";
            s += "|out:";
            for (const auto& x : outs) s += x + ";";
            s += ")";
            next[v] = s;
        }
        label = next;
        for (const auto& l : label) features[std::to_string(round) + ":" + l] += 1.0;
    }
    return features;
}

inline double dot(const Histogram& a, const Histogram& b) {
    double sum = 0.0;
    for (const auto& [key, count] : a) {
        const auto it = b.find(key);
        if (it != b.end()) sum += count * it->second;
    }
    return sum;
}

inline double wl_kernel(const gk::PatientGraph& a, const gk::PatientGraph& b, int h) {
    return dot(wl_dictionary(a, h), wl_dictionary(b, h));
}

inline double vertex_histogram_kernel(const gk::PatientGraph& a, const gk::PatientGraph& b) {
    Histogram ha, hb;
    for (const auto& l : a.labels) ha[l] += 1.0;
    for (const auto& l : b.labels) hb[l] += 1.0;
    return dot(ha, hb);
}

// Buckets edges by (source label, target label); each shared bucket adds
// exp(-alpha * (mean weight difference)^2).
inline double temporal_kernel(const gk::PatientGraph& a, const gk::PatientGraph& b, double alpha) {
    auto buckets = [](const gk::PatientGraph& g) {
        std::map<std::pair<std::string, std::string>, std::vector<double>> m;
        for (const auto& e : g.edges) m[{g.labels[e.src], g.labels[e.dst]}].push_back(static_cast<double>(e.weight));
        std::map<std::pair<std::string, std::string>, double> mean;
        for (const auto& [k, ws] : m) {
            double s = 0.0;
            for (double w : ws) s += w;
            mean[k] = s / static_cast<double>(ws.size());
        }
        return mean;
    };
    const auto ba = buckets(a);
    const auto bb = buckets(b);
    double sum = 0.0;
    for (const auto& [k, wa] : ba) {
        const auto it = bb.find(k);
        if (it != bb.end()) sum += std::exp(-alpha * (wa - it->second) * (wa - it->second));
    }
    return sum;
}

// ---- losses ------------------------------------------------------------------

inline double euclid(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return 1.0 - ab / (std::sqrt(aa) * std::sqrt(bb));
}

// Sum over every ordered pair (i, j), diagonal included, divided by B.
inline double contrastive(const std::vector<std::vector<double>>& e, const std::vector<int>& y, double lambda,
                          bool use_cosine) {
    const std::size_t b = e.size();
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            const double d = i == j ? 0.0 : (use_cosine ? cosine(e[i], e[j]) : euclid(e[i], e[j]));
            if (y[i] == y[j]) {
                total += d;
            } else {
                const double hinge = std::max(0.0, lambda - d);
                total += hinge * hinge;
            }
        }
    }
    return total / static_cast<double>(b);
}

// ---- metrics -----------------------------------------------------------------

struct Metrics {
    double accuracy, macro_f1, auc;
};

inline Metrics metrics(const std::vector<double>& p, const std::vector<int>& pred, const std::vector<int>& y) {
    int confusion[2][2] = {{0, 0}, {0, 0}};  // [actual][predicted]
    for (std::size_t i = 0; i < y.size(); ++i) ++confusion[y[i]][pred[i]];
    const double n = static_cast<double>(y.size());
    Metrics m{};
    m.accuracy = (confusion[0][0] + confusion[1][1]) / n;
    double f1_sum = 0.0;
    for (int c = 0; c < 2; ++c) {
        const double tp = confusion[c][c];
        const double fp = confusion[1 - c][c];
        const double fn = confusion[c][1 - c];
        // Harmonic mean of precision tp/(tp+fp) and recall tp/(tp+fn), with
        // both fractions cleared; zero when the class is never hit.
        f1_sum += tp > 0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
    }
    m.macro_f1 = f1_sum / 2.0;
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (y[i] == 1 && y[j] == 0) {
                pairs += 1.0;
                if (p[i] > p[j]) wins += 1.0;
                else if (p[i] == p[j]) wins += 0.5;
            }
        }
    }
    m.auc = wins / pairs;
    return m;
}

// ---- Student t ----------------------------------------------------------------

using HighPrecision = boost::multiprecision::cpp_bin_float_50;

// Two-sided p-value of a paired t-test computed in 50-digit arithmetic.
inline double paired_t_p(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    HighPrecision mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += HighPrecision(a[i]) - HighPrecision(b[i]);
    mean /= n;
    HighPrecision ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const HighPrecision d = HighPrecision(a[i]) - HighPrecision(b[i]) - mean;
        ss += d * d;
    }
    const HighPrecision sd = boost::multiprecision::sqrt(ss / (n - 1));
    const HighPrecision t = mean / (sd / boost::multiprecision::sqrt(HighPrecision(n)));
    boost::math::students_t_distribution<HighPrecision> dist(static_cast<double>(n - 1));
    const HighPrecision tail = boost::math::cdf(boost::math::complement(dist, boost::multiprecision::abs(t)));
    return static_cast<double>(2 * tail);
}

inline double t_two_sided_p(double t, double df) {
    boost::math::students_t_distribution<HighPrecision> dist(df);
    return static_cast<double>(2 * boost::math::cdf(boost::math::complement(dist, boost::multiprecision::abs(HighPrecision(t)))));
}

}  // namespace oracle
