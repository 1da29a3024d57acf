#pragma once

// Independent reference implementations used to cross-check the library.
// These deliberately avoid the production code paths: alpha is computed by
// direct pair enumeration (no coincidence matrix), reports by per-class
// counting loops.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hot/metrics.hpp"

namespace oracle {

struct AlphaOutcome {
    double value = 0.0;
    bool degenerate = false;
};

// alpha = 1 - D_o / D_e, where D_o enumerates every ordered within-unit pair
// weighted by 1/(m_u - 1), and D_e enumerates every ordered pair of the
// pooled pairable values.
inline AlphaOutcome alpha_by_pair_enumeration(const hot::ReliabilityMatrix& m) {
    std::vector<std::vector<double>> units;
    for (size_t u = 0; u < m.units(); ++u) {
        std::vector<double> values;
        for (size_t o = 0; o < m.observers(); ++o)
            if (m.at(o, u)) values.push_back(*m.at(o, u));
        if (values.size() >= 2) units.push_back(std::move(values));
    }

    auto delta_sq = [&](double a, double b) {
        if (m.scale() == hot::Scale::Nominal) return a == b ? 0.0 : 1.0;
        return (a - b) * (a - b);
    };

    double n = 0.0;
    double observed_sum = 0.0;
    std::vector<double> pooled;
    for (const auto& values : units) {
        n += static_cast<double>(values.size());
        double unit_sum = 0.0;
        for (size_t i = 0; i < values.size(); ++i)
            for (size_t j = 0; j < values.size(); ++j)
                if (i != j) unit_sum += delta_sq(values[i], values[j]);
        observed_sum += unit_sum / (static_cast<double>(values.size()) - 1.0);
        for (double v : values) pooled.push_back(v);
    }

    double expected_sum = 0.0;
    for (size_t i = 0; i < pooled.size(); ++i)
        for (size_t j = 0; j < pooled.size(); ++j)
            if (i != j) expected_sum += delta_sq(pooled[i], pooled[j]);

    const double d_observed = observed_sum / n;
    const double d_expected = expected_sum / (n * (n - 1.0));
    if (d_expected == 0.0) return {1.0, true};
    return {1.0 - d_observed / d_expected, false};
}

struct RowOutcome {
    size_t support = 0;
    std::optional<double> precision, recall, f1;
};

struct ReportOutcome {
    std::vector<RowOutcome> rows;  // one per class code, ascending
    double accuracy = 0.0;
};

// Brute-force one-vs-rest contingency over integer class codes 0..k-1.
inline ReportOutcome report_by_counting(const std::vector<size_t>& pred,
                                        const std::vector<size_t>& truth, size_t num_classes) {
    ReportOutcome out;
    size_t hits = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == truth[i]) ++hits;
    out.accuracy = static_cast<double>(hits) / static_cast<double>(pred.size());

    for (size_t cls = 0; cls < num_classes; ++cls) {
        size_t tp = 0, fp = 0, fn = 0, support = 0;
        for (size_t i = 0; i < pred.size(); ++i) {
            if (truth[i] == cls) ++support;
            if (pred[i] == cls && truth[i] == cls) ++tp;
            if (pred[i] == cls && truth[i] != cls) ++fp;
            if (pred[i] != cls && truth[i] == cls) ++fn;
        }
        RowOutcome row;
        row.support = support;
        if (tp + fp > 0) row.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        if (tp + fn > 0) row.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        if (row.precision && row.recall && (*row.precision + *row.recall) > 0.0)
            row.f1 = 2.0 * *row.precision * *row.recall / (*row.precision + *row.recall);
        out.rows.push_back(row);
    }
    return out;
}

inline bool same_metric(const std::optional<double>& a, const std::optional<double>& b,
                        double tol = 1e-12) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    return std::abs(*a - *b) <= tol;
}

}  // namespace oracle
