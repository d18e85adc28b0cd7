#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ietkit/error.hpp"

namespace iet {

// Execution times are whole timestamp-counter ticks.
using Ticks = std::uint64_t;
using Series = std::vector<Ticks>;

// Rectangular block of measured execution times.  Each column is one
// contiguous measurement loop; storage is column-major so a column can be
// handed out as a span without copying.  A single measurement is a 1x1
// array.
class IetArray {
public:
    IetArray(std::size_t rows, std::size_t cols, Series values_column_major);

    static IetArray from_columns(const std::vector<Series>& columns);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    Ticks at(std::size_t row, std::size_t col) const {
        return values_[col * rows_ + row];
    }

    std::span<const Ticks> column(std::size_t col) const;

    // Column-major backing store, size rows*cols.
    const Series& values() const { return values_; }

    bool operator==(const IetArray& other) const;

    // Optional acquisition metadata, carried through serialization.
    std::optional<std::string> label;
    std::optional<int> day_index;
    std::optional<int> repeat_index;

private:
    std::size_t rows_;
    std::size_t cols_;
    Series values_;
};

// Flattens column-by-column into one long series: all of column 0, then all
// of column 1, and so on.
Series vectorize(const IetArray& array);

// How a batch of arrays was (or should be) gathered.
struct AcquisitionProtocol {
    int repeats_per_day = 1;
    int days = 1;
    double delay_seconds = 0.0;

    bool operator==(const AcquisitionProtocol&) const = default;
};

// Arrays measured under one condition (one machine state), plus the schedule
// they were gathered on.  All arrays must share a shape.
struct TraceBatch {
    std::vector<IetArray> arrays;
    std::string condition_label;
    AcquisitionProtocol protocol;

    void validate() const;
};

// The statistics the pipeline knows how to compute over an array.  The
// *_avg kinds evaluate each column separately and average the results; the
// *_vec kinds evaluate the vectorized (flattened) array in one pass.
enum class StatisticKind {
    Mean,
    LayersAvg,
    LayersVec,
    M2Avg,
    M2Vec,
    M4Avg,
    M4Vec,
};

inline constexpr StatisticKind kAllStatisticKinds[] = {
    StatisticKind::Mean,      StatisticKind::LayersAvg, StatisticKind::LayersVec,
    StatisticKind::M2Avg,     StatisticKind::M2Vec,     StatisticKind::M4Avg,
    StatisticKind::M4Vec,
};

bool is_vectorized_kind(StatisticKind kind);
const char* statistic_kind_name(StatisticKind kind);
StatisticKind parse_statistic_kind(const std::string& name);

// A series split at its abrupt shifts.  Segment `start` indexes into the
// original series; jump_positions lists the first index of every segment
// after a cut.
struct SegmentedSeries {
    struct Segment {
        std::size_t start = 0;
        Series values;
    };

    std::vector<Segment> segments;
    std::vector<std::size_t> jump_positions;
};

// Range spanned by repeated evaluations of one statistic, with the chance
// that a future evaluation lands inside it.
struct VariationInterval {
    double s_min = 0.0;
    double s_max = 0.0;
    std::size_t sample_count = 0;
    double confidence = 0.0;

    bool contains(double value) const {
        return value >= s_min && value <= s_max;
    }

    bool operator==(const VariationInterval&) const = default;
};

// Calibrated decision data for one statistic.  hv_lower and hv_interval are
// absent for the plain mean, which separates conditions only one-sidedly.
struct ThresholdEntry {
    StatisticKind statistic = StatisticKind::Mean;
    double filtration_level = 0.0;
    double no_hv_upper = 0.0;
    std::optional<double> hv_lower;
    double type1_error = 0.0;
    double type2_error = 0.0;
    VariationInterval no_hv_interval;
    std::optional<VariationInterval> hv_interval;

    bool operator==(const ThresholdEntry&) const = default;
};

// One band of layer counts attributed to a fixed number of nested
// hypervisors.  Open ends are represented by absent bounds.
struct NestedBand {
    std::optional<double> lower;
    std::optional<double> upper;
    int hypervisor_count = 0;
    double type1_error = 0.0;
    double type2_error = 0.0;

    bool operator==(const NestedBand&) const = default;
};

struct ThresholdTable {
    std::vector<ThresholdEntry> entries;
    std::vector<NestedBand> nested_bands;  // empty when not calibrated
    double chosen_filtration_level = 0.0;

    void validate() const;

    bool operator==(const ThresholdTable&) const = default;
};

enum class VerdictKind {
    NoHypervisor,
    HypervisorsPresent,
    IndeterminateRemeasure,
    BlueChickenSuspect,
};

const char* verdict_kind_name(VerdictKind kind);

enum class Classification {
    NoHvSide,
    HvSide,
    Overlap,
};

const char* classification_name(Classification c);

// Where one statistic landed relative to its calibrated bounds.
struct EvidenceItem {
    StatisticKind statistic = StatisticKind::Mean;
    double filtration_level = 0.0;
    double value = 0.0;
    Classification classification = Classification::Overlap;
    std::optional<double> matched_bound;
};

struct DetectionVerdict {
    VerdictKind kind = VerdictKind::IndeterminateRemeasure;
    std::optional<int> hypervisor_count;  // only for HypervisorsPresent, may
                                          // stay unknown
    std::vector<EvidenceItem> evidence;
    int arrays_examined = 0;
};

} // namespace iet
