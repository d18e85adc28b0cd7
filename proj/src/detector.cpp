#include "ietkit/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace iet {

namespace {

bool intervals_intersect(const VariationInterval& a, const VariationInterval& b,
                         double value) {
    const double lo = std::max(a.s_min, b.s_min);
    const double hi = std::min(a.s_max, b.s_max);
    return lo <= hi && value >= lo && value <= hi;
}

Classification classify(double value, const ThresholdEntry& entry) {
    if (!entry.hv_lower) {
        // One-sided entry (the mean): only "looks clean" or "looks loaded".
        return value <= entry.no_hv_upper ? Classification::NoHvSide
                                          : Classification::HvSide;
    }
    const bool in_gap = value > entry.no_hv_upper && value < *entry.hv_lower;
    const bool in_shared_band =
        entry.hv_interval &&
        intervals_intersect(entry.no_hv_interval, *entry.hv_interval, value);
    if (in_gap || in_shared_band) {
        return Classification::Overlap;
    }
    return value >= *entry.hv_lower ? Classification::HvSide
                                    : Classification::NoHvSide;
}

} // namespace

std::vector<EvidenceItem> evaluate_array(const IetArray& array,
                                         const ThresholdTable& table) {
    if (table.entries.empty()) {
        throw Error(ErrorCode::EmptyTable, "threshold table has no entries");
    }
    std::vector<EvidenceItem> evidence;
    evidence.reserve(table.entries.size());
    for (const ThresholdEntry& entry : table.entries) {
        EvidenceItem item;
        item.statistic = entry.statistic;
        item.filtration_level = entry.filtration_level;
        item.value =
            array_statistic(array, entry.statistic, entry.filtration_level);
        item.classification = classify(item.value, entry);
        switch (item.classification) {
        case Classification::NoHvSide:
            item.matched_bound = entry.no_hv_upper;
            break;
        case Classification::HvSide:
            item.matched_bound =
                entry.hv_lower ? *entry.hv_lower : entry.no_hv_upper;
            break;
        case Classification::Overlap:
            break;
        }
        evidence.push_back(item);
    }
    return evidence;
}

BlueChickenReport detect_blue_chicken(const IetArray& array,
                                      const BlueChickenParams& params) {
    if (array.rows() <= params.prefix_len) {
        throw Error(ErrorCode::ArrayTooShort,
                    "need more than " + std::to_string(params.prefix_len) +
                        " rows to split each column");
    }
    const auto part_layers =
        [](std::span<const Ticks> part) -> std::optional<double> {
        try {
            return series_statistic(part, StatisticKind::LayersAvg, 0.0);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::NoQualifyingSegment) {
                return std::nullopt;
            }
            throw;
        }
    };

    BlueChickenReport report;
    report.columns.reserve(array.cols());
    std::size_t flagged_count = 0;
    for (std::size_t col = 0; col < array.cols(); ++col) {
        const auto column = array.column(col);
        BlueChickenColumn c;
        c.prefix_layers = part_layers(column.subspan(0, params.prefix_len));
        c.suffix_layers = part_layers(column.subspan(params.prefix_len));
        if (c.prefix_layers && c.suffix_layers) {
            c.flagged = *c.prefix_layers >=
                            params.layer_ratio * *c.suffix_layers &&
                        *c.suffix_layers <= params.max_suffix_layers;
        }
        flagged_count += c.flagged ? 1 : 0;
        report.columns.push_back(c);
    }
    report.flagged = static_cast<double>(flagged_count) >=
                     params.column_fraction * static_cast<double>(array.cols());
    return report;
}

std::optional<int> count_nested(double layer_count,
                                std::span<const NestedBand> bands) {
    if (bands.empty()) {
        throw Error(ErrorCode::InvalidArgument, "no nested bands calibrated");
    }
    for (const NestedBand& band : bands) {
        const double lo =
            band.lower.value_or(-std::numeric_limits<double>::infinity());
        const double hi =
            band.upper.value_or(std::numeric_limits<double>::infinity());
        if (layer_count >= lo && layer_count <= hi) {
            return band.hypervisor_count;
        }
    }
    return std::nullopt;  // fell in a gap: indeterminate
}

DetectionVerdict detect(const ArrayProvider& provider,
                        const ThresholdTable& table, int max_retries,
                        const BlueChickenParams& bc_params) {
    if (table.entries.empty()) {
        throw Error(ErrorCode::EmptyTable, "threshold table has no entries");
    }
    if (max_retries < 0) {
        throw Error(ErrorCode::InvalidArgument, "max_retries cannot be negative");
    }

    DetectionVerdict verdict;
    bool hiding_seen = false;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        std::optional<IetArray> array = provider();
        if (!array) {
            throw Error(ErrorCode::ProviderExhausted,
                        "measurement source ran dry after " +
                            std::to_string(verdict.arrays_examined) +
                            " arrays");
        }
        ++verdict.arrays_examined;
        verdict.evidence = evaluate_array(*array, table);

        if (array->rows() > bc_params.prefix_len) {
            hiding_seen =
                hiding_seen || detect_blue_chicken(*array, bc_params).flagged;
        }

        bool any_hv = false;
        bool any_overlap = false;
        for (const EvidenceItem& item : verdict.evidence) {
            if (item.statistic == StatisticKind::Mean) {
                continue;  // informational only; trivially spoofed
            }
            any_hv = any_hv || item.classification == Classification::HvSide;
            any_overlap =
                any_overlap || item.classification == Classification::Overlap;
        }

        if (any_hv) {
            verdict.kind = VerdictKind::HypervisorsPresent;
            if (!table.nested_bands.empty()) {
                const double layers = vectorized_statistic(
                    *array, StatisticKind::LayersVec,
                    table.chosen_filtration_level);
                const auto count = count_nested(layers, table.nested_bands);
                if (count && *count >= 1) {
                    verdict.hypervisor_count = count;
                }
            }
            return verdict;
        }
        if (!any_overlap) {
            verdict.kind = hiding_seen ? VerdictKind::BlueChickenSuspect
                                       : VerdictKind::NoHypervisor;
            return verdict;
        }
        // Some statistic sat between the conditions: measure again.
    }
    verdict.kind = VerdictKind::IndeterminateRemeasure;
    return verdict;
}

LayerSetComparison compare_layer_values(const LayerValueSet& reference,
                                        const LayerValueSet& observed) {
    if (reference.values.empty() || observed.values.empty()) {
        throw Error(ErrorCode::InvalidArgument,
                    "layer value sets must be nonempty");
    }
    LayerSetComparison result;
    if (reference.values.size() != observed.values.size()) {
        result.mismatch_detail =
            "layer count " + std::to_string(observed.values.size()) +
            " differs from reference " + std::to_string(reference.values.size());
        return result;
    }
    for (std::size_t i = 0; i < reference.deltas.size(); ++i) {
        if (reference.deltas[i] != observed.deltas[i]) {
            result.mismatch_detail =
                "spacing " + std::to_string(i) + " is " +
                std::to_string(observed.deltas[i]) + ", reference has " +
                std::to_string(reference.deltas[i]);
            return result;
        }
    }
    result.match = true;
    return result;
}

} // namespace iet
