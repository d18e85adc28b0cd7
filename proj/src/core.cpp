#include "ietkit/core.hpp"

#include <utility>

namespace iet {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw Error(ErrorCode::InvalidArgument, what);
    }
}

} // namespace

IetArray::IetArray(std::size_t rows, std::size_t cols, Series values_column_major)
    : rows_(rows), cols_(cols), values_(std::move(values_column_major)) {
    require(rows_ >= 1, "IetArray needs at least one row");
    require(cols_ >= 1, "IetArray needs at least one column");
    require(values_.size() == rows_ * cols_,
            "IetArray value count " + std::to_string(values_.size()) +
                " does not match shape " + std::to_string(rows_) + "x" +
                std::to_string(cols_));
    for (Ticks v : values_) {
        require(v > 0, "IetArray values must be positive tick counts");
    }
}

IetArray IetArray::from_columns(const std::vector<Series>& columns) {
    require(!columns.empty(), "IetArray needs at least one column");
    const std::size_t rows = columns.front().size();
    Series flat;
    flat.reserve(rows * columns.size());
    for (const Series& col : columns) {
        require(col.size() == rows, "all columns must have equal length");
        flat.insert(flat.end(), col.begin(), col.end());
    }
    return IetArray(rows, columns.size(), std::move(flat));
}

std::span<const Ticks> IetArray::column(std::size_t col) const {
    require(col < cols_, "column index out of range");
    return std::span<const Ticks>(values_.data() + col * rows_, rows_);
}

bool IetArray::operator==(const IetArray& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ &&
           values_ == other.values_ && label == other.label &&
           day_index == other.day_index && repeat_index == other.repeat_index;
}

Series vectorize(const IetArray& array) {
    return array.values();  // storage is already column-major
}

void TraceBatch::validate() const {
    require(!arrays.empty(), "TraceBatch needs at least one array");
    require(protocol.repeats_per_day >= 1, "repeats_per_day must be positive");
    require(protocol.days >= 1, "days must be positive");
    require(protocol.delay_seconds >= 0.0, "delay_seconds must be non-negative");
    const std::size_t rows = arrays.front().rows();
    const std::size_t cols = arrays.front().cols();
    for (const IetArray& a : arrays) {
        require(a.rows() == rows && a.cols() == cols,
                "TraceBatch arrays must share one shape");
    }
}

bool is_vectorized_kind(StatisticKind kind) {
    switch (kind) {
    case StatisticKind::LayersVec:
    case StatisticKind::M2Vec:
    case StatisticKind::M4Vec:
        return true;
    default:
        return false;
    }
}

const char* statistic_kind_name(StatisticKind kind) {
    switch (kind) {
    case StatisticKind::Mean:      return "mean";
    case StatisticKind::LayersAvg: return "layers_avg";
    case StatisticKind::LayersVec: return "layers_vec";
    case StatisticKind::M2Avg:     return "m2_avg";
    case StatisticKind::M2Vec:     return "m2_vec";
    case StatisticKind::M4Avg:     return "m4_avg";
    case StatisticKind::M4Vec:     return "m4_vec";
    }
    return "unknown";
}

StatisticKind parse_statistic_kind(const std::string& name) {
    for (StatisticKind kind : kAllStatisticKinds) {
        if (name == statistic_kind_name(kind)) {
            return kind;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown statistic kind '" + name + "'");
}

void ThresholdTable::validate() const {
    for (const ThresholdEntry& e : entries) {
        if (e.hv_lower) {
            if (!(e.no_hv_upper < *e.hv_lower)) {
                throw Error(ErrorCode::InvalidTable,
                            std::string("entry ") + statistic_kind_name(e.statistic) +
                                ": no_hv_upper must sit below hv_lower");
            }
        }
        if (e.type1_error < 0.0 || e.type2_error < 0.0 ||
            e.type1_error + e.type2_error >= 0.2) {
            throw Error(ErrorCode::InvalidTable,
                        std::string("entry ") + statistic_kind_name(e.statistic) +
                            ": combined error rate must stay below 0.2");
        }
    }
    for (std::size_t i = 0; i + 1 < nested_bands.size(); ++i) {
        const NestedBand& a = nested_bands[i];
        const NestedBand& b = nested_bands[i + 1];
        if (!a.upper || !b.lower || !(*a.upper < *b.lower)) {
            throw Error(ErrorCode::InvalidTable,
                        "nested bands must be ordered and non-overlapping");
        }
        if (b.hypervisor_count != a.hypervisor_count + 1) {
            throw Error(ErrorCode::InvalidTable,
                        "nested band counts must increase by one");
        }
    }
}

const char* verdict_kind_name(VerdictKind kind) {
    switch (kind) {
    case VerdictKind::NoHypervisor:           return "no_hypervisor";
    case VerdictKind::HypervisorsPresent:     return "hypervisors_present";
    case VerdictKind::IndeterminateRemeasure: return "indeterminate_remeasure";
    case VerdictKind::BlueChickenSuspect:     return "blue_chicken_suspect";
    }
    return "unknown";
}

const char* classification_name(Classification c) {
    switch (c) {
    case Classification::NoHvSide: return "no_hv_side";
    case Classification::HvSide:   return "hv_side";
    case Classification::Overlap:  return "overlap";
    }
    return "unknown";
}

const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument:       return "invalid_argument";
    case ErrorCode::EmptySeries:           return "empty_series";
    case ErrorCode::AllFiltered:           return "all_filtered";
    case ErrorCode::SeriesTooShort:        return "series_too_short";
    case ErrorCode::NoQualifyingSegment:   return "no_qualifying_segment";
    case ErrorCode::EmptySample:           return "empty_sample";
    case ErrorCode::NoAdmissibleStatistic: return "no_admissible_statistic";
    case ErrorCode::EmptyTable:            return "empty_table";
    case ErrorCode::ProviderExhausted:     return "provider_exhausted";
    case ErrorCode::ArrayTooShort:         return "array_too_short";
    case ErrorCode::MalformedCsv:          return "malformed_csv";
    case ErrorCode::UnknownField:          return "unknown_field";
    case ErrorCode::MissingField:          return "missing_field";
    case ErrorCode::InvalidTable:          return "invalid_table";
    case ErrorCode::UnsupportedPlatform:   return "unsupported_platform";
    case ErrorCode::AffinityFailed:        return "affinity_failed";
    }
    return "unknown";
}

} // namespace iet
