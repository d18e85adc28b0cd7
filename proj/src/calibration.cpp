#include "ietkit/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ietkit/stats.hpp"

namespace iet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Segmentation does not depend on the statistic or the level, so it is done
// once per array and reused across the whole calibration sweep.
struct ArraySegments {
    std::vector<SegmentedSeries> columns;
    SegmentedSeries vectorized;
};

ArraySegments segment_array(const IetArray& array) {
    ArraySegments segs;
    segs.columns.reserve(array.cols());
    for (std::size_t col = 0; col < array.cols(); ++col) {
        segs.columns.push_back(detect_jumps(array.column(col)));
    }
    segs.vectorized = detect_jumps(array.values());
    return segs;
}

std::vector<ArraySegments> segment_batch(const TraceBatch& batch) {
    std::vector<ArraySegments> all;
    all.reserve(batch.arrays.size());
    for (const IetArray& a : batch.arrays) {
        all.push_back(segment_array(a));
    }
    return all;
}

double cached_array_statistic(const ArraySegments& segs, StatisticKind kind,
                              double level) {
    if (is_vectorized_kind(kind)) {
        return segmented_statistic(segs.vectorized, kind, level);
    }
    double sum = 0.0;
    for (const SegmentedSeries& col : segs.columns) {
        sum += segmented_statistic(col, kind, level);
    }
    return sum / static_cast<double>(segs.columns.size());
}

std::vector<double> batch_values(const std::vector<ArraySegments>& batch,
                                 StatisticKind kind, double level) {
    std::vector<double> values;
    values.reserve(batch.size());
    for (const ArraySegments& segs : batch) {
        values.push_back(cached_array_statistic(segs, kind, level));
    }
    return values;
}

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2]
                      : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace

double select_filtration_level(std::span<const LayerProfile> profile) {
    if (profile.empty()) {
        throw Error(ErrorCode::EmptySample, "empty layer profile");
    }
    for (std::size_t i = 0; i + 1 < profile.size(); ++i) {
        bool settled = true;
        for (std::size_t j = i; j + 1 < profile.size(); ++j) {
            if (std::abs(profile[j].averaged_count -
                         profile[j + 1].averaged_count) > 1.0 ||
                std::abs(profile[j].vectorized_count -
                         profile[j + 1].vectorized_count) > 1.0) {
                settled = false;
                break;
            }
        }
        if (settled) {
            return profile[i].level;
        }
    }
    return profile.size() == 1 ? profile.front().level
                               : kFallbackFiltrationLevel;
}

double select_filtration_level(const TraceBatch& batch,
                               std::span<const double> levels) {
    batch.validate();
    if (levels.empty()) {
        throw Error(ErrorCode::InvalidArgument, "no filtration levels given");
    }
    const auto segments = segment_batch(batch);
    std::vector<LayerProfile> profile;
    profile.reserve(levels.size());
    for (double level : levels) {
        LayerProfile p;
        p.level = level;
        p.averaged_count =
            median(batch_values(segments, StatisticKind::LayersAvg, level));
        p.vectorized_count =
            median(batch_values(segments, StatisticKind::LayersVec, level));
        profile.push_back(p);
    }
    return select_filtration_level(profile);
}

double estimate_error_rate(std::span<const double> values, double threshold,
                           ErrorSide side) {
    if (values.empty()) {
        throw Error(ErrorCode::EmptySample, "error rate over empty sample");
    }
    std::size_t wrong = 0;
    for (double v : values) {
        if (side == ErrorSide::AboveMeansHv ? v >= threshold : v <= threshold) {
            ++wrong;
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(values.size());
}

ThresholdScan derive_threshold(std::span<const double> no_hv_values,
                               std::span<const double> hv_values) {
    if (no_hv_values.empty() || hv_values.empty()) {
        throw Error(ErrorCode::EmptySample,
                    "threshold needs samples from both conditions");
    }
    std::vector<double> pooled(no_hv_values.begin(), no_hv_values.end());
    pooled.insert(pooled.end(), hv_values.begin(), hv_values.end());
    std::sort(pooled.begin(), pooled.end());

    std::vector<double> cuts;
    cuts.reserve(pooled.size() + 1);
    cuts.push_back(-kInf);
    for (std::size_t i = 0; i + 1 < pooled.size(); ++i) {
        if (pooled[i] < pooled[i + 1]) {
            cuts.push_back(0.5 * (pooled[i] + pooled[i + 1]));
        }
    }
    cuts.push_back(kInf);

    const auto fraction_above = [](std::span<const double> values, double cut) {
        std::size_t n = 0;
        for (double v : values) {
            if (v > cut) {
                ++n;
            }
        }
        return static_cast<double>(n) / static_cast<double>(values.size());
    };

    ThresholdScan best;
    double best_sum = kInf;
    for (double cut : cuts) {
        const double type1 = fraction_above(no_hv_values, cut);
        const double type2 = 1.0 - fraction_above(hv_values, cut);
        if (type1 + type2 < best_sum) {
            best_sum = type1 + type2;
            best.cut = cut;
            best.type1 = type1;
            best.type2 = type2;
        }
    }

    best.no_hv_upper = -kInf;
    best.hv_lower = kInf;
    for (double v : pooled) {
        if (v <= best.cut) {
            best.no_hv_upper = std::max(best.no_hv_upper, v);
        } else {
            best.hv_lower = std::min(best.hv_lower, v);
        }
    }
    return best;
}

ThresholdTable build_threshold_table(const TraceBatch& no_hv,
                                     const TraceBatch& hv) {
    no_hv.validate();
    hv.validate();

    const auto no_segments = segment_batch(no_hv);
    const auto hv_segments = segment_batch(hv);

    ThresholdTable table;
    table.chosen_filtration_level = select_filtration_level(no_hv);

    std::size_t admitted_two_sided = 0;
    for (StatisticKind kind : kAllStatisticKinds) {
        if (kind == StatisticKind::Mean) {
            const auto values =
                batch_values(no_segments, StatisticKind::Mean, 0.0);
            ThresholdEntry entry;
            entry.statistic = StatisticKind::Mean;
            entry.filtration_level = 0.0;
            entry.no_hv_upper = *std::max_element(values.begin(), values.end());
            entry.no_hv_interval = variation_interval(values);
            table.entries.push_back(entry);
            continue;
        }

        double best_level = 0.0;
        ThresholdScan best_scan;
        std::vector<double> best_no, best_hv;
        double best_sum = kInf;
        for (double level : kFiltrationLevels) {
            std::vector<double> no_values, hv_values;
            try {
                no_values = batch_values(no_segments, kind, level);
                hv_values = batch_values(hv_segments, kind, level);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::NoQualifyingSegment) {
                    continue;  // statistic does not exist at this level
                }
                throw;
            }
            const ThresholdScan scan = derive_threshold(no_values, hv_values);
            if (scan.type1 + scan.type2 < best_sum) {
                best_sum = scan.type1 + scan.type2;
                best_level = level;
                best_scan = scan;
                best_no = std::move(no_values);
                best_hv = std::move(hv_values);
            }
        }
        if (best_sum < kMaxCombinedError) {
            ThresholdEntry entry;
            entry.statistic = kind;
            entry.filtration_level = best_level;
            entry.no_hv_upper = best_scan.no_hv_upper;
            entry.hv_lower = best_scan.hv_lower;
            entry.type1_error = best_scan.type1;
            entry.type2_error = best_scan.type2;
            entry.no_hv_interval = variation_interval(best_no);
            entry.hv_interval = variation_interval(best_hv);
            table.entries.push_back(entry);
            ++admitted_two_sided;
        }
    }

    if (admitted_two_sided == 0) {
        throw Error(ErrorCode::NoAdmissibleStatistic,
                    "no statistic separates the two conditions well enough");
    }
    return table;
}

std::vector<NestedBand> build_nested_bands(
    const std::vector<std::vector<double>>& per_condition_values) {
    if (per_condition_values.size() < 2) {
        throw Error(ErrorCode::InvalidArgument,
                    "nested banding needs at least two conditions");
    }
    for (const auto& values : per_condition_values) {
        if (values.empty()) {
            throw Error(ErrorCode::EmptySample,
                        "nested banding got an empty condition sample");
        }
    }

    std::vector<ThresholdScan> scans;
    scans.reserve(per_condition_values.size() - 1);
    for (std::size_t k = 0; k + 1 < per_condition_values.size(); ++k) {
        ThresholdScan scan = derive_threshold(per_condition_values[k],
                                              per_condition_values[k + 1]);
        if (!std::isfinite(scan.no_hv_upper) || !std::isfinite(scan.hv_lower)) {
            throw Error(ErrorCode::NoAdmissibleStatistic,
                        "conditions " + std::to_string(k) + " and " +
                            std::to_string(k + 1) + " cannot be separated");
        }
        scans.push_back(scan);
    }

    std::vector<NestedBand> bands;
    bands.reserve(per_condition_values.size());
    for (std::size_t k = 0; k < per_condition_values.size(); ++k) {
        NestedBand band;
        band.hypervisor_count = static_cast<int>(k);
        if (k > 0) {
            band.lower = scans[k - 1].hv_lower;
            band.type2_error = scans[k - 1].type2;
        }
        if (k + 1 < per_condition_values.size()) {
            band.upper = scans[k].no_hv_upper;
            band.type1_error = scans[k].type1;
        }
        if (band.lower && band.upper && *band.lower > *band.upper) {
            throw Error(ErrorCode::NoAdmissibleStatistic,
                        "band " + std::to_string(k) +
                            " collapsed; conditions overlap too much");
        }
        bands.push_back(band);
    }
    return bands;
}

NestedCalibration calibrate_nested(std::span<const TraceBatch> batches) {
    if (batches.size() < 2) {
        throw Error(ErrorCode::InvalidArgument,
                    "nested calibration needs at least two batches");
    }
    std::vector<std::vector<ArraySegments>> segments;
    segments.reserve(batches.size());
    for (const TraceBatch& b : batches) {
        b.validate();
        segments.push_back(segment_batch(b));
    }

    double best_level = kFiltrationLevels.front();
    double best_score = kInf;
    std::vector<std::vector<double>> best_values;
    for (double level : kFiltrationLevels) {
        std::vector<std::vector<double>> values;
        values.reserve(segments.size());
        try {
            for (const auto& batch : segments) {
                values.push_back(
                    batch_values(batch, StatisticKind::LayersVec, level));
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::NoQualifyingSegment) {
                continue;
            }
            throw;
        }
        double score = 0.0;
        for (std::size_t k = 0; k + 1 < values.size(); ++k) {
            const ThresholdScan scan =
                derive_threshold(values[k], values[k + 1]);
            score += scan.type1 + scan.type2;
        }
        if (score < best_score) {
            best_score = score;
            best_level = level;
            best_values = std::move(values);
        }
    }

    NestedCalibration result;
    result.filtration_level = best_level;
    result.bands = build_nested_bands(best_values);
    return result;
}

} // namespace iet
