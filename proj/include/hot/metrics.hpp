#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hot/corpus.hpp"
#include "hot/util.hpp"

namespace hot {

struct MetricsError : std::invalid_argument {
    enum class Kind { LengthMismatch, Empty, OutOfRange, WrongArity, InsufficientData, BadThresholds };
    Kind kind;
    MetricsError(Kind k, const std::string& msg) : std::invalid_argument(msg), kind(k) {}
};

// ---------------------------------------------------------------------------
// Confusion counts and the four headline metrics
// ---------------------------------------------------------------------------

struct ConfusionCounts {
    size_t tp = 0, tn = 0, fp = 0, fn = 0;
    size_t total() const { return tp + tn + fp + fn; }
};

/// 2x2 contingency of predictions against reference labels.
inline ConfusionCounts confusion(const std::vector<bool>& pred, const std::vector<bool>& truth) {
    if (pred.size() != truth.size())
        throw MetricsError(MetricsError::Kind::LengthMismatch, "confusion: length mismatch");
    if (pred.empty()) throw MetricsError(MetricsError::Kind::Empty, "confusion: empty input");
    ConfusionCounts c;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && truth[i]) ++c.tp;
        else if (pred[i] && !truth[i]) ++c.fp;
        else if (!pred[i] && truth[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

// Zero denominators yield nullopt (the undefined marker), never a silent 0.
inline std::optional<double> precision(const ConfusionCounts& c) {
    if (c.tp + c.fp == 0) return std::nullopt;
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

inline std::optional<double> recall(const ConfusionCounts& c) {
    if (c.tp + c.fn == 0) return std::nullopt;
    return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

inline std::optional<double> f1(double p, double r) {
    if (p + r == 0.0) return std::nullopt;
    return 2.0 * p * r / (p + r);
}

inline double accuracy(const ConfusionCounts& c) {
    if (c.total() == 0) throw MetricsError(MetricsError::Kind::Empty, "accuracy: empty counts");
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

// ---------------------------------------------------------------------------
// Per-class reports
// ---------------------------------------------------------------------------

struct MetricsRow {
    std::string class_label;
    size_t support = 0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

struct ClassificationReport {
    std::vector<MetricsRow> rows;
    double accuracy = 0.0;  // shared across the rows of one report
    size_t total = 0;
};

namespace detail {

// One-vs-rest rows over integer-coded labels; shared by the binary and the
// six-level score reports.
inline ClassificationReport one_vs_rest_report(const std::vector<size_t>& pred,
                                               const std::vector<size_t>& truth,
                                               const std::vector<std::string>& class_labels) {
    if (pred.size() != truth.size())
        throw MetricsError(MetricsError::Kind::LengthMismatch, "report: length mismatch");
    if (pred.empty()) throw MetricsError(MetricsError::Kind::Empty, "report: empty input");

    ClassificationReport report;
    report.total = pred.size();
    size_t matches = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == truth[i]) ++matches;
    report.accuracy = static_cast<double>(matches) / static_cast<double>(pred.size());

    for (size_t cls = 0; cls < class_labels.size(); ++cls) {
        std::vector<bool> p(pred.size()), t(truth.size());
        for (size_t i = 0; i < pred.size(); ++i) {
            p[i] = pred[i] == cls;
            t[i] = truth[i] == cls;
        }
        ConfusionCounts c = confusion(p, t);
        MetricsRow row;
        row.class_label = class_labels[cls];
        row.support = c.tp + c.fn;
        row.precision = precision(c);
        row.recall = recall(c);
        if (row.precision && row.recall) row.f1 = f1(*row.precision, *row.recall);
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace detail

/// Two-row (Yes/No) report; `true` encodes Yes. Truth is the reference.
inline ClassificationReport classification_report(const std::vector<bool>& pred,
                                                  const std::vector<bool>& truth) {
    std::vector<size_t> p(pred.size()), t(truth.size());
    for (size_t i = 0; i < pred.size(); ++i) p[i] = pred[i] ? 0 : 1;
    for (size_t i = 0; i < truth.size(); ++i) t[i] = truth[i] ? 0 : 1;
    return detail::one_vs_rest_report(p, t, {"Yes", "No"});
}

// ---------------------------------------------------------------------------
// Thresholds
// ---------------------------------------------------------------------------

// Decision rule is fixed as value >= threshold => positive.
struct ThresholdConfig {
    std::array<double, 3> by_concept{0.7, 0.7, 0.9};

    double get(Concept c) const { return by_concept[concept_index(c)]; }
    void set(Concept c, double t) { by_concept[concept_index(c)] = t; }
    void validate() const {
        for (double t : by_concept)
            if (t < 0.0 || t > 1.0)
                throw MetricsError(MetricsError::Kind::OutOfRange, "threshold outside [0,1]");
    }
};

inline bool apply_threshold(double p, double t) {
    if (p < 0.0 || p > 1.0)
        throw MetricsError(MetricsError::Kind::OutOfRange, "apply_threshold: probability outside [0,1]");
    if (t < 0.0 || t > 1.0)
        throw MetricsError(MetricsError::Kind::OutOfRange, "apply_threshold: threshold outside [0,1]");
    return p >= t;
}

struct SweepPoint {
    double threshold = 0.0;
    ClassificationReport report;
};

/// One classification report per threshold (ascending).
inline std::vector<SweepPoint> threshold_sweep(const std::vector<double>& probs,
                                               const std::vector<bool>& truth,
                                               const std::vector<double>& thresholds) {
    if (probs.size() != truth.size())
        throw MetricsError(MetricsError::Kind::LengthMismatch, "threshold_sweep: length mismatch");
    for (size_t i = 1; i < thresholds.size(); ++i)
        if (thresholds[i] < thresholds[i - 1])
            throw MetricsError(MetricsError::Kind::BadThresholds,
                               "threshold_sweep: thresholds must be ascending");
    std::vector<SweepPoint> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) {
        std::vector<bool> pred(probs.size());
        for (size_t i = 0; i < probs.size(); ++i) pred[i] = apply_threshold(probs[i], t);
        out.push_back({t, classification_report(pred, truth)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Krippendorff's alpha
// ---------------------------------------------------------------------------

enum class Scale { Nominal, Interval };

inline std::string_view scale_name(Scale s) {
    return s == Scale::Nominal ? "nominal" : "interval";
}

// Observers (rows) x units (columns) of possibly-missing values. For nominal
// data the values are label codes; for interval data, reals.
class ReliabilityMatrix {
public:
    ReliabilityMatrix(size_t observers, size_t units, Scale scale)
        : observers_(observers), units_(units), scale_(scale), cells_(observers * units) {}

    size_t observers() const { return observers_; }
    size_t units() const { return units_; }
    Scale scale() const { return scale_; }

    void set(size_t observer, size_t unit, double value) { cells_[index(observer, unit)] = value; }
    void clear(size_t observer, size_t unit) { cells_[index(observer, unit)] = std::nullopt; }
    const std::optional<double>& at(size_t observer, size_t unit) const {
        return cells_[index(observer, unit)];
    }

private:
    size_t index(size_t observer, size_t unit) const {
        if (observer >= observers_ || unit >= units_)
            throw MetricsError(MetricsError::Kind::OutOfRange, "reliability matrix index");
        return observer * units_ + unit;
    }

    size_t observers_;
    size_t units_;
    Scale scale_;
    std::vector<std::optional<double>> cells_;
};

struct AlphaResult {
    double value = 0.0;
    // Expected disagreement was zero (every pairable value identical); the
    // conventional 1.0 is returned and flagged.
    bool degenerate = false;
};

// alpha = 1 - D_o/D_e over the coincidence matrix of all pairable values
// within units. Units with fewer than two values contribute nothing.
inline AlphaResult krippendorff_alpha(const ReliabilityMatrix& m) {
    if (m.observers() < 2)
        throw MetricsError(MetricsError::Kind::InsufficientData,
                           "krippendorff_alpha: need at least 2 observers");

    // Value universe, deterministic order.
    std::map<double, size_t> value_index;
    for (size_t o = 0; o < m.observers(); ++o)
        for (size_t u = 0; u < m.units(); ++u)
            if (m.at(o, u)) value_index.emplace(*m.at(o, u), 0);
    {
        size_t next = 0;
        for (auto& [v, idx] : value_index) idx = next++;
    }
    const size_t k = value_index.size();
    std::vector<double> values(k);
    for (const auto& [v, idx] : value_index) values[idx] = v;

    // Coincidence matrix: each ordered within-unit pair contributes
    // 1/(m_u - 1).
    std::vector<double> coincidence(k * k, 0.0);
    double n = 0.0;
    for (size_t u = 0; u < m.units(); ++u) {
        std::vector<size_t> unit_values;
        for (size_t o = 0; o < m.observers(); ++o)
            if (m.at(o, u)) unit_values.push_back(value_index.at(*m.at(o, u)));
        const size_t mu = unit_values.size();
        if (mu < 2) continue;
        n += static_cast<double>(mu);
        const double w = 1.0 / static_cast<double>(mu - 1);
        for (size_t a = 0; a < mu; ++a)
            for (size_t b = 0; b < mu; ++b)
                if (a != b) coincidence[unit_values[a] * k + unit_values[b]] += w;
    }
    if (n == 0.0)
        throw MetricsError(MetricsError::Kind::InsufficientData,
                           "krippendorff_alpha: no unit has two or more values");

    std::vector<double> marginal(k, 0.0);
    for (size_t c = 0; c < k; ++c)
        for (size_t d = 0; d < k; ++d) marginal[c] += coincidence[c * k + d];

    auto delta_sq = [&](size_t c, size_t d) {
        if (m.scale() == Scale::Nominal) return c == d ? 0.0 : 1.0;
        double diff = values[c] - values[d];
        return diff * diff;
    };

    double observed = 0.0, expected = 0.0;
    for (size_t c = 0; c < k; ++c) {
        for (size_t d = 0; d < k; ++d) {
            if (c == d) continue;
            const double dsq = delta_sq(c, d);
            observed += coincidence[c * k + d] * dsq;
            expected += marginal[c] * marginal[d] * dsq;
        }
    }
    if (expected == 0.0) return {1.0, true};
    return {1.0 - (n - 1.0) * observed / expected, false};
}

// ---------------------------------------------------------------------------
// Score bins (probability levels vs 5-rater true counts)
// ---------------------------------------------------------------------------

enum class ScoreBin { S00 = 0, S02, S04, S06, S08, S10 };

inline constexpr std::array<ScoreBin, 6> kAllScoreBins{ScoreBin::S00, ScoreBin::S02, ScoreBin::S04,
                                                       ScoreBin::S06, ScoreBin::S08, ScoreBin::S10};

inline double score_bin_value(ScoreBin b) { return 0.2 * static_cast<double>(b); }

inline std::string score_bin_label(ScoreBin b) {
    static const std::array<const char*, 6> labels{"0.0", "0.2", "0.4", "0.6", "0.8", "1.0"};
    return labels[static_cast<size_t>(b)];
}

// Probability levels: [0,0.1) [0.1,0.3) [0.3,0.5) [0.5,0.7) [0.7,0.9) [0.9,1].
inline ScoreBin bin_probability(double p) {
    if (p < 0.0 || p > 1.0)
        throw MetricsError(MetricsError::Kind::OutOfRange, "bin_probability: outside [0,1]");
    if (p < 0.1) return ScoreBin::S00;
    if (p < 0.3) return ScoreBin::S02;
    if (p < 0.5) return ScoreBin::S04;
    if (p < 0.7) return ScoreBin::S06;
    if (p < 0.9) return ScoreBin::S08;
    return ScoreBin::S10;
}

// Five-rater score: 0.2 per true vote.
inline ScoreBin mturk_score(const std::vector<bool>& votes) {
    if (votes.size() != 5)
        throw MetricsError(MetricsError::Kind::WrongArity, "mturk_score: exactly 5 votes required");
    size_t trues = 0;
    for (bool v : votes)
        if (v) ++trues;
    return static_cast<ScoreBin>(trues);
}

/// Six-row report treating each score level as the positive class in turn.
inline ClassificationReport score_agreement_report(const std::vector<ScoreBin>& pred,
                                                   const std::vector<ScoreBin>& truth) {
    if (pred.size() != truth.size())
        throw MetricsError(MetricsError::Kind::LengthMismatch,
                           "score_agreement_report: length mismatch");
    std::vector<size_t> p(pred.size()), t(truth.size());
    for (size_t i = 0; i < pred.size(); ++i) p[i] = static_cast<size_t>(pred[i]);
    for (size_t i = 0; i < truth.size(); ++i) t[i] = static_cast<size_t>(truth[i]);
    std::vector<std::string> labels;
    for (ScoreBin b : kAllScoreBins) labels.push_back(score_bin_label(b));
    return detail::one_vs_rest_report(p, t, labels);
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline nlohmann::json metric_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

inline nlohmann::json report_to_json(const ClassificationReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        rows.push_back({{"class", row.class_label},
                        {"support", row.support},
                        {"precision", metric_json(row.precision)},
                        {"recall", metric_json(row.recall)},
                        {"f1", metric_json(row.f1)}});
    }
    return {{"accuracy", report.accuracy}, {"total", report.total}, {"rows", rows}};
}

// Two-decimal display value; undefined metrics render as an em dash.
inline std::string display_metric(const std::optional<double>& v) {
    if (!v) return "—";
    return format_fixed(round_half_up(*v, 2), 2);
}

inline constexpr std::string_view kReportCsvHeader =
    "Category,Class,Support,Precision,Recall,F1-score,Accuracy";

// Rows follow the shared-accuracy table layout: accuracy appears on the
// first row of each category block only.
inline void append_report_csv(std::ostream& out, std::string_view category,
                              const ClassificationReport& report) {
    bool first = true;
    for (const auto& row : report.rows) {
        out << category << ',' << row.class_label << ',' << row.support << ','
            << display_metric(row.precision) << ',' << display_metric(row.recall) << ','
            << display_metric(row.f1) << ',';
        if (first) out << display_metric(report.accuracy);
        first = false;
        out << '\n';
    }
}

}  // namespace hot
