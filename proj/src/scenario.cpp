#include "ietkit/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "ietkit/stats.hpp"

namespace iet {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw Error(ErrorCode::InvalidArgument, what);
    }
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Generative law for a single probe under one machine state.  Folded in
// here so the hot loop only draws.
class Sampler {
public:
    Sampler(const ScenarioSpec& spec, long long day_drift,
            bool dispatchers_active, bool cheat_active)
        : quantum_(spec.tick_quantum) {
        const long long shifted_base = std::max<long long>(
            1, static_cast<long long>(spec.base_ticks) + day_drift);
        base_ = static_cast<double>(shifted_base);
        lattice_rem_ = static_cast<Ticks>(
            shifted_base % static_cast<long long>(spec.tick_quantum));

        double nominal = base_;
        if (dispatchers_active) {
            for (const DispatcherSpec& d : spec.dispatchers) {
                instr_bounds_.push_back({d.overhead_mean - d.overhead_spread,
                                         d.overhead_mean + d.overhead_spread});
                nominal += kInstructionsPerProbe * d.overhead_mean;
            }
        }
        // Interrupts arrive at a rate proportional to how long the probe
        // nominally runs.
        lambda_ = spec.smi_rate * nominal / 10000.0;
        smi_lo_ = spec.smi_cost.mean - spec.smi_cost.spread;
        smi_hi_ = spec.smi_cost.mean + spec.smi_cost.spread;

        cheat_sub_ = 0.0;
        if (cheat_active && spec.cheat.mode == CheatSpec::Mode::MatchMean) {
            // The cheater calibrates its constant once, against the
            // undrifted machine; day-to-day drift passes through it.
            double nominal0 = static_cast<double>(spec.base_ticks);
            for (const DispatcherSpec& d : spec.dispatchers) {
                nominal0 += kInstructionsPerProbe * d.overhead_mean;
            }
            const double lambda0 = spec.smi_rate * nominal0 / 10000.0;
            const double expected_raw = nominal0 + lambda0 * spec.smi_cost.mean;
            cheat_sub_ =
                expected_raw - static_cast<double>(spec.cheat.target_mean);
        }
    }

    double raw(std::mt19937_64& rng) const {
        double x = base_;
        for (const auto& bounds : instr_bounds_) {
            std::uniform_real_distribution<double> u(bounds[0], bounds[1]);
            for (int k = 0; k < kInstructionsPerProbe; ++k) {
                x += u(rng);
            }
        }
        if (lambda_ > 0.0) {
            std::poisson_distribution<int> smi_count(lambda_);
            const int n = smi_count(rng);
            if (n > 0) {
                std::uniform_real_distribution<double> u(smi_lo_, smi_hi_);
                for (int k = 0; k < n; ++k) {
                    x += u(rng);
                }
            }
        }
        return x - cheat_sub_;
    }

    // Snaps to the counter lattice (base remainder preserved) and clamps to
    // at least one quantum so durations stay positive.
    Ticks quantize(double x) const {
        const double q = static_cast<double>(quantum_);
        const long long k =
            std::llround((x - static_cast<double>(lattice_rem_)) / q);
        long long v = static_cast<long long>(lattice_rem_) +
                      k * static_cast<long long>(quantum_);
        if (v < static_cast<long long>(quantum_)) {
            v = lattice_rem_ == 0
                    ? static_cast<long long>(quantum_)
                    : static_cast<long long>(lattice_rem_ + quantum_);
        }
        return static_cast<Ticks>(v);
    }

    Ticks draw(std::mt19937_64& rng) const { return quantize(raw(rng)); }

private:
    double base_;
    std::vector<std::array<double, 2>> instr_bounds_;
    double lambda_ = 0.0;
    double smi_lo_ = 0.0;
    double smi_hi_ = 0.0;
    double cheat_sub_ = 0.0;
    Ticks quantum_;
    Ticks lattice_rem_ = 0;
};

IetArray simulate_array_impl(const ScenarioSpec& spec, std::uint64_t seed,
                             long long day_drift) {
    spec.validate();
    std::mt19937_64 rng(seed);
    const Sampler installed(spec, day_drift, true, true);
    std::optional<Sampler> uninstalled;
    if (spec.blue_chicken) {
        uninstalled.emplace(spec, day_drift, false, false);
    }

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Series flat;
    flat.reserve(spec.rows * spec.cols);

    for (std::size_t col = 0; col < spec.cols; ++col) {
        std::optional<std::size_t> uninstall_at;
        if (spec.blue_chicken) {
            std::uniform_int_distribution<std::uint32_t> cut(
                spec.blue_chicken->uninstall_lo, spec.blue_chicken->uninstall_hi);
            uninstall_at = cut(rng);
        }
        bool in_jump = false;
        double jump_shift = 0.0;
        for (std::size_t row = 0; row < spec.rows; ++row) {
            if (spec.jump_prob > 0.0) {
                if (in_jump) {
                    if (u01(rng) < 1.0 / spec.jump_run_length) {
                        in_jump = false;
                    }
                } else if (u01(rng) < spec.jump_prob) {
                    in_jump = true;
                    std::uniform_int_distribution<Ticks> mag(
                        spec.jump_magnitude.lo, spec.jump_magnitude.hi);
                    jump_shift = static_cast<double>(mag(rng));
                }
            }
            const bool active = !uninstall_at || row < *uninstall_at;
            const Sampler& law = active ? installed : *uninstalled;
            double x = law.raw(rng);
            if (in_jump) {
                x += jump_shift;
            }
            if (spec.outlier_prob > 0.0 && u01(rng) < spec.outlier_prob) {
                std::uniform_int_distribution<Ticks> mag(
                    spec.outlier_magnitude.lo, spec.outlier_magnitude.hi);
                x += static_cast<double>(mag(rng));
            }
            flat.push_back(law.quantize(x));
        }
    }
    return IetArray(spec.rows, spec.cols, std::move(flat));
}

} // namespace

void ScenarioSpec::validate() const {
    require(base_ticks >= 1, "base_ticks must be positive");
    require(tick_quantum >= 1, "tick_quantum must be positive");
    require(smi_rate >= 0.0, "smi_rate cannot be negative");
    require(smi_cost.spread >= 0.0, "smi_cost.spread cannot be negative");
    require(smi_cost.mean >= smi_cost.spread,
            "smi_cost must stay non-negative across its spread");
    for (const DispatcherSpec& d : dispatchers) {
        require(d.overhead_spread >= 0.0, "dispatcher spread cannot be negative");
        require(d.overhead_mean >= d.overhead_spread,
                "dispatcher overhead must stay non-negative across its spread");
    }
    if (cheat.mode == CheatSpec::Mode::MatchMean) {
        require(cheat.target_mean >= 1, "cheat target mean must be positive");
    }
    if (blue_chicken) {
        require(blue_chicken->uninstall_lo >= 1 &&
                    blue_chicken->uninstall_lo <= blue_chicken->uninstall_hi,
                "blue_chicken uninstall range must be ordered and positive");
    }
    require(outlier_prob >= 0.0 && outlier_prob < 1.0,
            "outlier_prob must lie in [0, 1)");
    require(jump_prob >= 0.0 && jump_prob < 1.0, "jump_prob must lie in [0, 1)");
    require(outlier_magnitude.lo >= 1 &&
                outlier_magnitude.lo <= outlier_magnitude.hi,
            "outlier magnitude range must be ordered and positive");
    require(jump_magnitude.lo <= jump_magnitude.hi,
            "jump magnitude range must be ordered");
    require(jump_magnitude.lo > kDefaultJumpThreshold,
            "jump magnitude must exceed the segmentation threshold");
    require(jump_run_length >= 1.0, "jump_run_length must be at least 1");
    require(rows >= 1, "rows must be positive");
    require(cols >= 1, "cols must be positive");
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint32_t day,
                          std::uint32_t repeat) {
    std::uint64_t h = splitmix64(base_seed);
    h = splitmix64(h ^ ((static_cast<std::uint64_t>(day) << 32) | repeat));
    return h;
}

Ticks simulate_measurement(const ScenarioSpec& spec, std::mt19937_64& rng) {
    spec.validate();
    return Sampler(spec, 0, true, true).draw(rng);
}

IetArray simulate_array(const ScenarioSpec& spec, std::uint64_t seed) {
    return simulate_array_impl(spec, seed, 0);
}

TraceBatch simulate_batch(const ScenarioSpec& spec, int days,
                          int repeats_per_day, std::uint64_t base_seed,
                          const std::string& condition_label,
                          double delay_seconds) {
    spec.validate();
    require(days >= 1, "days must be positive");
    require(repeats_per_day >= 1, "repeats_per_day must be positive");
    require(delay_seconds >= 0.0, "delay_seconds cannot be negative");

    TraceBatch batch;
    batch.condition_label = condition_label;
    batch.protocol = {repeats_per_day, days, delay_seconds};
    batch.arrays.reserve(static_cast<std::size_t>(days) * repeats_per_day);

    const long long q = static_cast<long long>(spec.tick_quantum);
    for (int day = 1; day <= days; ++day) {
        long long drift = 0;
        if (day > 1) {
            std::mt19937_64 drift_rng(
                derive_seed(base_seed, static_cast<std::uint32_t>(day), 0));
            drift = std::uniform_int_distribution<long long>(-q, q)(drift_rng);
        }
        for (int rep = 1; rep <= repeats_per_day; ++rep) {
            IetArray arr = simulate_array_impl(
                spec,
                derive_seed(base_seed, static_cast<std::uint32_t>(day),
                            static_cast<std::uint32_t>(rep)),
                drift);
            arr.day_index = day;
            arr.repeat_index = rep;
            if (!condition_label.empty()) {
                arr.label = condition_label;
            }
            batch.arrays.push_back(std::move(arr));
        }
    }
    return batch;
}

} // namespace iet
