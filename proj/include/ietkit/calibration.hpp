#pragma once

#include <array>
#include <span>
#include <vector>

#include "ietkit/core.hpp"

namespace iet {

// Candidate relative-frequency cutoffs, swept in this order.
inline constexpr std::array<double, 6> kFiltrationLevels = {
    0.0, 0.02, 0.05, 0.1, 0.15, 0.2};

// Used when no level stabilizes the layer counts.
inline constexpr double kFallbackFiltrationLevel = 0.1;

// A statistic is only worth keeping when its combined error rate stays
// below this.
inline constexpr double kMaxCombinedError = 0.2;

// Layer counts observed at one filtration level: averaged over columns and
// over the vectorized array.
struct LayerProfile {
    double level = 0.0;
    double averaged_count = 0.0;
    double vectorized_count = 0.0;
};

// Smallest level from which both counts have settled, meaning every step to
// the next level changes them by at most one, all the way to the last
// level.  Falls back to kFallbackFiltrationLevel when nothing settles.
double select_filtration_level(std::span<const LayerProfile> profile);

// Same rule applied to a batch: the profile is the per-level median of the
// arrays' layer counts.
double select_filtration_level(const TraceBatch& batch,
                               std::span<const double> levels = kFiltrationLevels);

enum class ErrorSide {
    AboveMeansHv,     // counts values at or above the threshold
    BelowMeansNoHv,   // counts values at or below the threshold
};

// Fraction of sample values that land on the wrong side of the threshold.
double estimate_error_rate(std::span<const double> values, double threshold,
                           ErrorSide side);

// Best separating cut between two samples and the error rates it leaves.
struct ThresholdScan {
    double cut = 0.0;          // decision boundary: above is the hv side
    double no_hv_upper = 0.0;  // largest no-hv-side sample value
    double hv_lower = 0.0;     // smallest hv-side sample value
    double type1 = 0.0;        // no-hv values misread as hv
    double type2 = 0.0;        // hv values misread as no-hv
};

// Scans every boundary between the pooled sorted values and keeps the one
// with the smallest combined error; ties go to the smallest cut.
ThresholdScan derive_threshold(std::span<const double> no_hv_values,
                               std::span<const double> hv_values);

// Calibrates every statistic kind on the two conditions, keeping those
// whose combined error stays below kMaxCombinedError.  The plain mean is
// always recorded (one-sided, zero errors by construction) but a table with
// nothing else to offer is an error.
ThresholdTable build_threshold_table(const TraceBatch& no_hv,
                                     const TraceBatch& hv);

struct NestedCalibration {
    std::vector<NestedBand> bands;
    double filtration_level = 0.0;
};

// Bands from per-condition layer-count samples; index k in the outer vector
// is the condition with k hypervisors installed.
std::vector<NestedBand> build_nested_bands(
    const std::vector<std::vector<double>>& per_condition_values);

// Picks the single filtration level that best separates every adjacent pair
// of conditions on the vectorized layer count, then bands at that level.
NestedCalibration calibrate_nested(std::span<const TraceBatch> batches);

} // namespace iet
