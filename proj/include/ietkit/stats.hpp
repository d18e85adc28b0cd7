#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ietkit/core.hpp"

namespace iet {

// First-order differences above this many ticks are treated as abrupt
// shifts and split the series.
inline constexpr Ticks kDefaultJumpThreshold = 300;

// Segments shorter than this carry no weight in length-averaged statistics;
// they are usually stray outliers, not genuine regimes.
inline constexpr std::size_t kDefaultMinSegmentLength = 2;

// value -> relative frequency, keyed in ascending value order.
std::map<Ticks, double> frequency_classes(std::span<const Ticks> series);

// Keeps only elements whose value occurs with relative frequency >= level
// (frequencies measured on the input itself).  Order is preserved.
Series low_frequency_filter(std::span<const Ticks> series, double level);

// Number of distinct values that survive the filter.  Zero when nothing
// survives.
std::size_t count_layers(std::span<const Ticks> series, double level);

// Splits the series before every element whose distance to its predecessor
// exceeds the threshold.
SegmentedSeries detect_jumps(std::span<const Ticks> series,
                             Ticks jump_threshold = kDefaultJumpThreshold);

// Per-segment statistic.  Returning nullopt means the segment cannot
// produce a value (for example, everything was filtered away) and is
// skipped.
using SegmentStatistic =
    std::function<std::optional<double>(std::span<const Ticks>)>;

// Weighted mean of the per-segment statistic, weights being the segment
// lengths.  Segments shorter than min_segment_length are ignored.
double length_averaged_statistic(
    const SegmentedSeries& segmented, const SegmentStatistic& statistic,
    std::size_t min_segment_length = kDefaultMinSegmentLength);

// Central moment of the given order (2 or 4), computed so that the result
// is bit-for-bit identical when the whole series shifts by a constant.
double central_moment(std::span<const Ticks> series, int order);

// One statistic of a plain series: split at jumps, filter each segment,
// evaluate, length-average.  Only the base statistic of `kind` matters
// here; the averaged/vectorized distinction applies to whole arrays.
double series_statistic(std::span<const Ticks> series, StatisticKind kind,
                        double filtration_level,
                        Ticks jump_threshold = kDefaultJumpThreshold);

// Same, over series that were already segmented (lets callers reuse the
// segmentation across many statistic/level combinations).
double segmented_statistic(const SegmentedSeries& segmented, StatisticKind kind,
                           double filtration_level);

struct ColumnStatisticResult {
    std::vector<double> per_column;
    double averaged = 0.0;
};

// Evaluates the statistic on every column, then averages.  `kind` must be
// Mean or one of the *_avg kinds.
ColumnStatisticResult column_statistic(const IetArray& array, StatisticKind kind,
                                       double filtration_level);

// Evaluates the statistic on the vectorized array.  `kind` must be one of
// the *_vec kinds.
double vectorized_statistic(const IetArray& array, StatisticKind kind,
                            double filtration_level);

// Dispatches to column_statistic or vectorized_statistic and reduces to the
// single per-array value calibration works with.
double array_statistic(const IetArray& array, StatisticKind kind,
                       double filtration_level);

// Smallest interval covering all observed values.  The confidence that one
// further evaluation falls inside is 1 - 0.5^(n-1), exact in binary.
VariationInterval variation_interval(std::span<const double> values);

// Sorted distinct surviving values plus their consecutive differences.  The
// differences are what detection compares: a constant shift of the whole
// series leaves them untouched.
struct LayerValueSet {
    Series values;
    std::vector<Ticks> deltas;
};

LayerValueSet layer_value_set(std::span<const Ticks> series,
                              double filtration_level);

} // namespace iet
