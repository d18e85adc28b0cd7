#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ietkit/core.hpp"

namespace iet {

// One probe is this many back-to-back trapping instructions; every
// dispatcher in the chain handles each of them once.
inline constexpr int kInstructionsPerProbe = 10;

// Cost of one system management interrupt, uniform in mean +/- spread.  Two
// interrupts landing in one probe shift it by twice the mean; keep that under
// the jump threshold so routine interrupt noise does not read as regime shifts.
struct SmiCost {
    double mean = 120.0;
    double spread = 0.0;

    bool operator==(const SmiCost&) const = default;
};

// One hypervisor in the (possibly nested) chain.  Per trapped instruction
// it adds a uniform overhead in overhead_mean +/- overhead_spread.  Keep the
// spread well under the jump threshold: consecutive measurements must not
// look like regime shifts just because handlers are noisy.
struct DispatcherSpec {
    double overhead_mean = 2600.0;
    double overhead_spread = 10.0;

    bool operator==(const DispatcherSpec&) const = default;
};

struct CheatSpec {
    enum class Mode { Off, MatchMean };
    Mode mode = Mode::Off;
    // Mean the cheating hypervisor steers measurements toward (its plant's
    // bare-metal mean).  Only read in MatchMean mode.
    Ticks target_mean = 0;

    bool operator==(const CheatSpec&) const = default;
};

// Hide-and-reappear behaviour: the hypervisor unloads itself after a number
// of measurements drawn uniformly from [lo, hi] within each column, and is
// back for the next column.
struct BlueChickenSpec {
    std::uint32_t uninstall_lo = 50;
    std::uint32_t uninstall_hi = 100;

    bool operator==(const BlueChickenSpec&) const = default;
};

struct TickRange {
    Ticks lo = 0;
    Ticks hi = 0;

    bool operator==(const TickRange&) const = default;
};

// Full generative description of one measurement environment.
struct ScenarioSpec {
    Ticks base_ticks = 2888;   // bare-metal duration of one probe
    Ticks tick_quantum = 8;    // counter advances in steps of this size

    double smi_rate = 0.02;    // expected interrupts per 10000 ticks of runtime
    SmiCost smi_cost;

    std::vector<DispatcherSpec> dispatchers;  // empty means no hypervisor
    CheatSpec cheat;
    std::optional<BlueChickenSpec> blue_chicken;

    // Rare additive disturbances: isolated spikes and persistent regime
    // shifts (the shift ends with probability 1/jump_run_length per row).
    double outlier_prob = 0.0;
    TickRange outlier_magnitude{2000, 8000};
    double jump_prob = 0.0;
    TickRange jump_magnitude{800, 2400};
    double jump_run_length = 60.0;

    std::size_t rows = 1000;
    std::size_t cols = 10;

    void validate() const;

    bool operator==(const ScenarioSpec&) const = default;
};

// Stable seed mixing for (day, repeat) cells of a batch.  repeat 0 is
// reserved for the per-day drift stream.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint32_t day,
                          std::uint32_t repeat);

// One probe duration under the spec's installed configuration.  Ignores
// outliers, jumps and hide-and-reappear; those only exist array-wise.
Ticks simulate_measurement(const ScenarioSpec& spec, std::mt19937_64& rng);

// Full rows x cols array: per-column uninstall points, jump regimes,
// outliers, quantization.  Identical seeds give identical arrays.
IetArray simulate_array(const ScenarioSpec& spec, std::uint64_t seed);

// days x repeats_per_day arrays with recorded day/repeat indices.  The base
// duration drifts mildly (within one quantum) from day to day; day 1 is the
// anchor and never drifts, so a one-day one-repeat batch reproduces
// simulate_array exactly.
TraceBatch simulate_batch(const ScenarioSpec& spec, int days,
                          int repeats_per_day, std::uint64_t base_seed,
                          const std::string& condition_label = "",
                          double delay_seconds = 2.0);

} // namespace iet
