#include "ietkit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace iet {

namespace {

void check_level(double level) {
    if (!(level >= 0.0) || !(level < 1.0) || std::isnan(level)) {
        throw Error(ErrorCode::InvalidArgument,
                    "filtration level must lie in [0, 1), got " +
                        std::to_string(level));
    }
}

std::unordered_map<Ticks, std::size_t> value_counts(std::span<const Ticks> series) {
    std::unordered_map<Ticks, std::size_t> counts;
    counts.reserve(series.size());
    for (Ticks v : series) {
        ++counts[v];
    }
    return counts;
}

Ticks abs_diff(Ticks a, Ticks b) {
    return a > b ? a - b : b - a;
}

} // namespace

std::map<Ticks, double> frequency_classes(std::span<const Ticks> series) {
    if (series.empty()) {
        throw Error(ErrorCode::EmptySeries, "frequency_classes on empty series");
    }
    std::map<Ticks, double> classes;
    const double n = static_cast<double>(series.size());
    for (const auto& [value, count] : value_counts(series)) {
        classes[value] = static_cast<double>(count) / n;
    }
    return classes;
}

Series low_frequency_filter(std::span<const Ticks> series, double level) {
    if (series.empty()) {
        throw Error(ErrorCode::EmptySeries, "low_frequency_filter on empty series");
    }
    check_level(level);
    if (level == 0.0) {
        return Series(series.begin(), series.end());
    }
    const auto counts = value_counts(series);
    const double n = static_cast<double>(series.size());
    Series kept;
    kept.reserve(series.size());
    for (Ticks v : series) {
        if (static_cast<double>(counts.at(v)) / n >= level) {
            kept.push_back(v);
        }
    }
    if (kept.empty()) {
        throw Error(ErrorCode::AllFiltered,
                    "every value fell below filtration level " +
                        std::to_string(level));
    }
    return kept;
}

std::size_t count_layers(std::span<const Ticks> series, double level) {
    if (series.empty()) {
        throw Error(ErrorCode::EmptySeries, "count_layers on empty series");
    }
    check_level(level);
    const auto counts = value_counts(series);
    const double n = static_cast<double>(series.size());
    std::size_t layers = 0;
    for (const auto& [value, count] : counts) {
        (void)value;
        if (static_cast<double>(count) / n >= level) {
            ++layers;
        }
    }
    return layers;  // 0 when the filter would erase everything
}

SegmentedSeries detect_jumps(std::span<const Ticks> series, Ticks jump_threshold) {
    if (series.empty()) {
        throw Error(ErrorCode::EmptySeries, "detect_jumps on empty series");
    }
    if (jump_threshold == 0) {
        throw Error(ErrorCode::InvalidArgument, "jump threshold must be positive");
    }
    SegmentedSeries out;
    std::size_t start = 0;
    for (std::size_t i = 1; i < series.size(); ++i) {
        if (abs_diff(series[i], series[i - 1]) > jump_threshold) {
            out.segments.push_back(
                {start, Series(series.begin() + start, series.begin() + i)});
            out.jump_positions.push_back(i);
            start = i;
        }
    }
    out.segments.push_back(
        {start, Series(series.begin() + start, series.end())});
    return out;
}

double length_averaged_statistic(const SegmentedSeries& segmented,
                                 const SegmentStatistic& statistic,
                                 std::size_t min_segment_length) {
    double weighted_sum = 0.0;
    double total_weight = 0.0;
    for (const auto& segment : segmented.segments) {
        if (segment.values.size() < min_segment_length) {
            continue;
        }
        const auto value = statistic(segment.values);
        if (!value) {
            continue;
        }
        const double weight = static_cast<double>(segment.values.size());
        weighted_sum += weight * *value;
        total_weight += weight;
    }
    if (total_weight == 0.0) {
        throw Error(ErrorCode::NoQualifyingSegment,
                    "no segment long enough to carry a statistic");
    }
    return weighted_sum / total_weight;
}

double central_moment(std::span<const Ticks> series, int order) {
    if (order != 2 && order != 4) {
        throw Error(ErrorCode::InvalidArgument,
                    "central moment order must be 2 or 4");
    }
    if (series.size() < 2) {
        throw Error(ErrorCode::SeriesTooShort,
                    "central moment needs at least two elements");
    }
    const std::size_t n = series.size();
    unsigned __int128 total = 0;
    for (Ticks v : series) {
        total += v;
    }
    // Work with the integer deviations d_i = n*x_i - sum(x).  They are exact
    // and cancel any constant offset, so the result cannot drift when the
    // whole series is shifted.
    double sum_pow = 0.0;
    for (Ticks v : series) {
        const __int128 d = static_cast<__int128>(
                               static_cast<unsigned __int128>(v) * n) -
                           static_cast<__int128>(total);
        const double dd = static_cast<double>(d);
        double p = dd * dd;
        if (order == 4) {
            p *= p;
        }
        sum_pow += p;
    }
    const double nd = static_cast<double>(n);
    const double denom =
        order == 2 ? nd * nd * nd : nd * nd * nd * nd * nd;
    return sum_pow / denom;
}

namespace {

// Per-segment evaluator for the base statistic of `kind`.  Segments whose
// surviving values cannot produce the statistic opt out with nullopt.
SegmentStatistic make_segment_statistic(StatisticKind kind, double level) {
    const auto filtered = [level](std::span<const Ticks> s) -> std::optional<Series> {
        try {
            return low_frequency_filter(s, level);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::AllFiltered) {
                return std::nullopt;
            }
            throw;
        }
    };
    switch (kind) {
    case StatisticKind::LayersAvg:
    case StatisticKind::LayersVec:
        return [level](std::span<const Ticks> s) -> std::optional<double> {
            return static_cast<double>(count_layers(s, level));
        };
    case StatisticKind::Mean:
        return [filtered](std::span<const Ticks> s) -> std::optional<double> {
            const auto kept = filtered(s);
            if (!kept) {
                return std::nullopt;
            }
            unsigned __int128 total = 0;
            for (Ticks v : *kept) {
                total += v;
            }
            return static_cast<double>(total) /
                   static_cast<double>(kept->size());
        };
    case StatisticKind::M2Avg:
    case StatisticKind::M2Vec:
    case StatisticKind::M4Avg:
    case StatisticKind::M4Vec: {
        const int order =
            (kind == StatisticKind::M2Avg || kind == StatisticKind::M2Vec) ? 2 : 4;
        return [filtered, order](std::span<const Ticks> s) -> std::optional<double> {
            const auto kept = filtered(s);
            if (!kept || kept->size() < 2) {
                return std::nullopt;
            }
            return central_moment(*kept, order);
        };
    }
    }
    throw Error(ErrorCode::InvalidArgument, "unhandled statistic kind");
}

} // namespace

double segmented_statistic(const SegmentedSeries& segmented, StatisticKind kind,
                           double filtration_level) {
    check_level(filtration_level);
    return length_averaged_statistic(
        segmented, make_segment_statistic(kind, filtration_level));
}

double series_statistic(std::span<const Ticks> series, StatisticKind kind,
                        double filtration_level, Ticks jump_threshold) {
    return segmented_statistic(detect_jumps(series, jump_threshold), kind,
                               filtration_level);
}

ColumnStatisticResult column_statistic(const IetArray& array, StatisticKind kind,
                                       double filtration_level) {
    if (is_vectorized_kind(kind)) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string("column_statistic cannot take vectorized kind ") +
                        statistic_kind_name(kind));
    }
    ColumnStatisticResult result;
    result.per_column.reserve(array.cols());
    double sum = 0.0;
    for (std::size_t col = 0; col < array.cols(); ++col) {
        double value = 0.0;
        try {
            value = series_statistic(array.column(col), kind, filtration_level);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::NoQualifyingSegment) {
                throw Error(e.code(), "column " + std::to_string(col) + ": " +
                                          e.what());
            }
            throw;
        }
        result.per_column.push_back(value);
        sum += value;
    }
    result.averaged = sum / static_cast<double>(array.cols());
    return result;
}

double vectorized_statistic(const IetArray& array, StatisticKind kind,
                            double filtration_level) {
    if (!is_vectorized_kind(kind)) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string("vectorized_statistic needs a *_vec kind, got ") +
                        statistic_kind_name(kind));
    }
    return series_statistic(array.values(), kind, filtration_level);
}

double array_statistic(const IetArray& array, StatisticKind kind,
                       double filtration_level) {
    if (is_vectorized_kind(kind)) {
        return vectorized_statistic(array, kind, filtration_level);
    }
    return column_statistic(array, kind, filtration_level).averaged;
}

VariationInterval variation_interval(std::span<const double> values) {
    if (values.empty()) {
        throw Error(ErrorCode::EmptySample, "variation interval of no samples");
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    VariationInterval interval;
    interval.s_min = *lo;
    interval.s_max = *hi;
    interval.sample_count = values.size();
    // 1 - 0.5^(n-1); ldexp keeps the power of two exact.
    interval.confidence =
        1.0 - std::ldexp(1.0, -static_cast<int>(values.size() - 1));
    return interval;
}

LayerValueSet layer_value_set(std::span<const Ticks> series,
                              double filtration_level) {
    Series kept = low_frequency_filter(series, filtration_level);
    std::sort(kept.begin(), kept.end());
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    LayerValueSet set;
    set.deltas.reserve(kept.size() > 0 ? kept.size() - 1 : 0);
    for (std::size_t i = 1; i < kept.size(); ++i) {
        set.deltas.push_back(kept[i] - kept[i - 1]);
    }
    set.values = std::move(kept);
    return set;
}

} // namespace iet
