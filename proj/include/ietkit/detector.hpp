#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ietkit/core.hpp"
#include "ietkit/stats.hpp"

namespace iet {

// Where each calibrated statistic of one array lands.  Throws EmptyTable
// when the table has no entries.
std::vector<EvidenceItem> evaluate_array(const IetArray& array,
                                         const ThresholdTable& table);

// Knobs for the hide-and-reappear check: compare the layer structure of the
// first prefix_len rows of each column against the rest.  A column is
// suspicious when the prefix is layer_ratio times richer and the remainder
// is nearly flat.
struct BlueChickenParams {
    std::size_t prefix_len = 100;
    double layer_ratio = 3.0;
    double max_suffix_layers = 2.0;
    double column_fraction = 0.6;  // of columns that must be suspicious
};

struct BlueChickenColumn {
    std::optional<double> prefix_layers;
    std::optional<double> suffix_layers;
    bool flagged = false;
};

struct BlueChickenReport {
    bool flagged = false;
    std::vector<BlueChickenColumn> columns;
};

// Throws ArrayTooShort unless rows > prefix_len.
BlueChickenReport detect_blue_chicken(const IetArray& array,
                                      const BlueChickenParams& params = {});

// How many hypervisors the banded layer count says are stacked; nullopt
// when the value falls between bands.
std::optional<int> count_nested(double layer_count,
                                std::span<const NestedBand> bands);

// Hands out fresh measurement arrays on demand; nullopt means the source is
// exhausted.
using ArrayProvider = std::function<std::optional<IetArray>()>;

// Full decision procedure: pull an array, place every calibrated statistic,
// conclude.  Statistics that land between the conditions trigger a
// remeasure, up to max_retries extra arrays.  The plain mean is reported as
// evidence but never decides by itself; a cheating hypervisor controls it.
DetectionVerdict detect(const ArrayProvider& provider,
                        const ThresholdTable& table, int max_retries = 3,
                        const BlueChickenParams& bc_params = {});

struct LayerSetComparison {
    bool match = false;
    std::string mismatch_detail;  // empty on match
};

// Compares the spacing structure of two layer-value sets.  Spacing survives
// any constant shift of the measurements, so a hypervisor that subtracts a
// fixed count from the clock still mismatches.
LayerSetComparison compare_layer_values(const LayerValueSet& reference,
                                        const LayerValueSet& observed);

} // namespace iet
