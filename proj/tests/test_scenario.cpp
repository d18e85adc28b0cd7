#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "ietkit/core.hpp"
#include "ietkit/scenario.hpp"
#include "ietkit/stats.hpp"

using namespace iet;

namespace {

bool rejects(const std::function<void(ScenarioSpec&)>& tweak) {
    ScenarioSpec spec;
    tweak(spec);
    try {
        spec.validate();
    } catch (const Error& e) {
        return e.code() == ErrorCode::InvalidArgument;
    }
    return false;
}

ScenarioSpec quiet_spec() {
    ScenarioSpec spec;
    spec.smi_rate = 0.0;
    spec.dispatchers.clear();
    return spec;
}

ScenarioSpec hv_spec(std::size_t depth) {
    ScenarioSpec spec;
    for (std::size_t i = 0; i < depth; ++i) {
        spec.dispatchers.push_back(DispatcherSpec{});
    }
    return spec;
}

double mean_of(std::span<const Ticks> values) {
    double sum = 0.0;
    for (Ticks v : values) {
        sum += static_cast<double>(v);
    }
    return sum / static_cast<double>(values.size());
}

Series draw(const ScenarioSpec& spec, std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    Series out(n);
    for (Ticks& v : out) {
        v = simulate_measurement(spec, rng);
    }
    return out;
}

} // namespace

TEST_CASE("scenario validation rejects out-of-range fields") {
    CHECK_NOTHROW(ScenarioSpec{}.validate());
    CHECK(rejects([](ScenarioSpec& s) { s.base_ticks = 0; }));
    CHECK(rejects([](ScenarioSpec& s) { s.tick_quantum = 0; }));
    CHECK(rejects([](ScenarioSpec& s) { s.smi_rate = -0.1; }));
    CHECK(rejects([](ScenarioSpec& s) { s.smi_cost = {100.0, 150.0}; }));
    CHECK(rejects([](ScenarioSpec& s) {
        s.dispatchers.push_back({50.0, 60.0});
    }));
    CHECK(rejects([](ScenarioSpec& s) {
        s.cheat = {CheatSpec::Mode::MatchMean, 0};
    }));
    CHECK(rejects([](ScenarioSpec& s) { s.blue_chicken = {{0, 10}}; }));
    CHECK(rejects([](ScenarioSpec& s) { s.blue_chicken = {{80, 50}}; }));
    CHECK(rejects([](ScenarioSpec& s) { s.outlier_prob = 1.0; }));
    CHECK(rejects([](ScenarioSpec& s) { s.jump_prob = -0.5; }));
    CHECK(rejects([](ScenarioSpec& s) { s.outlier_magnitude = {0, 100}; }));
    CHECK(rejects([](ScenarioSpec& s) { s.jump_magnitude = {900, 400}; }));
    // Shifts that segmentation cannot see are not allowed.
    CHECK(rejects([](ScenarioSpec& s) { s.jump_magnitude = {300, 400}; }));
    CHECK(rejects([](ScenarioSpec& s) { s.jump_run_length = 0.5; }));
    CHECK(rejects([](ScenarioSpec& s) { s.rows = 0; }));
    CHECK(rejects([](ScenarioSpec& s) { s.cols = 0; }));
}

TEST_CASE("noise-free scenario always yields the base duration") {
    const ScenarioSpec spec = quiet_spec();
    for (Ticks v : draw(spec, 1, 200)) {
        CHECK(v == 2888);
    }
    const IetArray arr = simulate_array(spec, 2);
    for (Ticks v : arr.values()) {
        CHECK(v == 2888);
    }
}

TEST_CASE("values land on the counter lattice") {
    ScenarioSpec spec = hv_spec(1);
    spec.base_ticks = 2891;  // 3 mod 8
    for (Ticks v : draw(spec, 3, 2000)) {
        CHECK(v % 8 == 3);
    }
}

TEST_CASE("quantization clamps to at least one quantum") {
    // A cheat target far below reality drags raw values negative.
    ScenarioSpec spec = quiet_spec();
    spec.cheat = {CheatSpec::Mode::MatchMean, 1};
    for (Ticks v : draw(spec, 4, 200)) {
        CHECK(v >= spec.tick_quantum);
    }
}

TEST_CASE("interrupt noise follows the compound Poisson law") {
    ScenarioSpec spec;
    spec.base_ticks = 2888;
    spec.tick_quantum = 1;
    spec.smi_rate = 2.0;
    spec.smi_cost = {160.0, 0.0};
    spec.dispatchers.clear();

    const double lambda = 2.0 * 2888.0 / 10000.0;
    const double expect_mean = 2888.0 + 160.0 * lambda;   // 2980.416
    const double expect_var = lambda * 160.0 * 160.0;     // 14786.56

    const Series sample = draw(spec, 9001, 200000);
    const double m = mean_of(sample);
    const double v = central_moment(sample, 2);

    const double mean_tol = 3.0 * std::sqrt(expect_var / 200000.0);
    CHECK(std::abs(m - expect_mean) < mean_tol);
    CHECK(std::abs(v - expect_var) / expect_var < 0.02);
}

TEST_CASE("mean matching pulls measurements onto the target") {
    ScenarioSpec spec = hv_spec(1);
    spec.cheat = {CheatSpec::Mode::MatchMean, 2888};
    const Series sample = draw(spec, 42, 10000);
    CHECK(std::abs(mean_of(sample) - 2888.0) <= 1.0);
}

TEST_CASE("mean matching leaves the variance intact") {
    ScenarioSpec honest = hv_spec(1);
    ScenarioSpec cheating = honest;
    cheating.cheat = {CheatSpec::Mode::MatchMean, 2888};

    // Same seed: identical noise stream, the cheat only shifts it.
    const Series a = draw(honest, 1234, 50000);
    const Series b = draw(cheating, 1234, 50000);
    const double va = central_moment(a, 2);
    const double vb = central_moment(b, 2);
    CHECK(std::abs(va - vb) / va < 0.01);
}

TEST_CASE("each nesting level raises mean and variance") {
    for (bool cheat : {false, true}) {
        double prev_var = -1.0;
        double prev_mean = -1.0;
        for (std::size_t depth : {0u, 1u, 2u}) {
            ScenarioSpec spec = hv_spec(depth);
            if (cheat) {
                spec.cheat = {CheatSpec::Mode::MatchMean, 2888};
            }
            const Series sample = draw(spec, 31 + depth, 40000);
            const double m = mean_of(sample);
            const double v = central_moment(sample, 2);
            if (!cheat) {
                CHECK(m > prev_mean);
                prev_mean = m;
            } else {
                // The cheat holds every depth near the same target.
                CHECK(std::abs(m - 2888.0) <= 2.0);
            }
            CHECK(v > prev_var);
            prev_var = v;
        }
    }
}

TEST_CASE("simulate_array is a pure function of spec and seed") {
    ScenarioSpec spec = hv_spec(1);
    spec.rows = 200;
    spec.cols = 4;
    spec.outlier_prob = 0.01;
    spec.jump_prob = 0.001;
    const IetArray a = simulate_array(spec, 99);
    const IetArray b = simulate_array(spec, 99);
    CHECK(a == b);
    CHECK(a.rows() == 200);
    CHECK(a.cols() == 4);
    const IetArray c = simulate_array(spec, 100);
    CHECK_FALSE(a.values() == c.values());
}

TEST_CASE("regime shifts appear iff jump_prob is set") {
    ScenarioSpec jumper = hv_spec(1);
    jumper.rows = 1000;
    jumper.cols = 10;
    jumper.jump_prob = 0.002;
    const IetArray arr = simulate_array(jumper, 7);
    std::size_t cuts = 0;
    for (std::size_t c = 0; c < arr.cols(); ++c) {
        cuts += detect_jumps(arr.column(c)).jump_positions.size();
    }
    CHECK(cuts > 0);

    const ScenarioSpec calm = quiet_spec();
    const IetArray flat = simulate_array(calm, 7);
    for (std::size_t c = 0; c < flat.cols(); ++c) {
        CHECK(detect_jumps(flat.column(c)).jump_positions.empty());
    }
}

TEST_CASE("outliers appear at roughly the configured rate") {
    ScenarioSpec spec = quiet_spec();
    spec.outlier_prob = 0.01;
    const IetArray arr = simulate_array(spec, 11);  // 1000 x 10
    std::size_t spikes = 0;
    for (Ticks v : arr.values()) {
        if (v >= 2888 + 1000) {
            ++spikes;
        }
        CHECK(v >= 2888);  // outliers only ever add time
    }
    CHECK(spikes >= 50);   // expectation 100, binomial sd about 10
    CHECK(spikes <= 150);
}

TEST_CASE("hide-and-reappear uninstalls mid-column and re-arms") {
    ScenarioSpec spec = hv_spec(1);
    spec.rows = 600;
    spec.cols = 4;
    spec.blue_chicken = BlueChickenSpec{50, 100};
    const IetArray arr = simulate_array(spec, 4242);

    for (std::size_t c = 0; c < arr.cols(); ++c) {
        const auto col = arr.column(c);
        // Installed probes trap ten instructions at ~2600 ticks each;
        // uninstalled ones sit near bare metal.  10000 separates cleanly.
        std::size_t transition = col.size();
        for (std::size_t r = 0; r < col.size(); ++r) {
            if (col[r] < 10000) {
                transition = r;
                break;
            }
        }
        REQUIRE(transition < col.size());
        CHECK(transition >= 50);
        CHECK(transition <= 100);
        std::size_t base_hits = 0;
        for (std::size_t r = 0; r < col.size(); ++r) {
            if (r < transition) {
                CHECK(col[r] >= 10000);
            } else {
                // Bare metal plus an occasional whole interrupt.
                CHECK(col[r] < 10000);
                CHECK((col[r] - 2888) % 120 == 0);
                if (col[r] == 2888) {
                    ++base_hits;
                }
            }
        }
        const std::size_t suffix_len = col.size() - transition;
        CHECK(static_cast<double>(base_hits) >
              0.9 * static_cast<double>(suffix_len));
    }
}

TEST_CASE("seed derivation separates days, repeats and the drift stream") {
    std::set<std::uint64_t> seen;
    for (std::uint32_t day = 1; day <= 10; ++day) {
        for (std::uint32_t repeat = 0; repeat <= 6; ++repeat) {
            seen.insert(derive_seed(12345, day, repeat));
        }
    }
    CHECK(seen.size() == 70);
    CHECK(derive_seed(12345, 1, 1) != derive_seed(12346, 1, 1));
}

TEST_CASE("batch shape, indices and labels") {
    ScenarioSpec spec = hv_spec(1);
    spec.rows = 100;
    spec.cols = 3;

    const TraceBatch batch = simulate_batch(spec, 10, 5, 555, "bench");
    REQUIRE(batch.arrays.size() == 50);
    CHECK(batch.condition_label == "bench");
    CHECK(batch.protocol.days == 10);
    CHECK(batch.protocol.repeats_per_day == 5);
    CHECK(batch.protocol.delay_seconds == 2.0);
    CHECK_NOTHROW(batch.validate());

    std::size_t i = 0;
    for (int day = 1; day <= 10; ++day) {
        for (int rep = 1; rep <= 5; ++rep, ++i) {
            REQUIRE(batch.arrays[i].day_index.has_value());
            REQUIRE(batch.arrays[i].repeat_index.has_value());
            CHECK(*batch.arrays[i].day_index == day);
            CHECK(*batch.arrays[i].repeat_index == rep);
            CHECK(batch.arrays[i].label == "bench");
        }
    }

    const TraceBatch anon = simulate_batch(spec, 1, 1, 555);
    CHECK_FALSE(anon.arrays.at(0).label.has_value());

    const TraceBatch again = simulate_batch(spec, 10, 5, 555, "bench");
    REQUIRE(again.arrays.size() == batch.arrays.size());
    for (std::size_t k = 0; k < batch.arrays.size(); ++k) {
        CHECK(batch.arrays[k] == again.arrays[k]);
    }
}

TEST_CASE("a one-day one-repeat batch reproduces simulate_array") {
    ScenarioSpec spec = hv_spec(1);
    spec.rows = 150;
    spec.cols = 2;
    const TraceBatch batch = simulate_batch(spec, 1, 1, 2024);
    const IetArray direct = simulate_array(spec, derive_seed(2024, 1, 1));
    CHECK(batch.arrays.at(0).values() == direct.values());
}

TEST_CASE("day-to-day drift stays within one quantum and spares day one") {
    ScenarioSpec spec = quiet_spec();
    spec.rows = 20;
    spec.cols = 2;
    const TraceBatch batch = simulate_batch(spec, 6, 2, 888);
    for (const IetArray& arr : batch.arrays) {
        const Ticks first = arr.values().front();
        for (Ticks v : arr.values()) {
            CHECK(v == first);  // noise-free: one constant per day
        }
        const long long off = static_cast<long long>(first) - 2888;
        CHECK(std::llabs(off) <= 8);
        if (*arr.day_index == 1) {
            CHECK(first == 2888);
        }
    }
    // Both repeats of a day share the drift.
    CHECK(batch.arrays[2].values().front() == batch.arrays[3].values().front());
}

TEST_CASE("single measurements ignore array-level disturbances") {
    ScenarioSpec spec = quiet_spec();
    spec.blue_chicken = BlueChickenSpec{50, 100};
    spec.outlier_prob = 0.9;
    spec.outlier_magnitude = {2000, 8000};
    spec.jump_prob = 0.9;
    for (Ticks v : draw(spec, 6, 100)) {
        CHECK(v == 2888);
    }
}

TEST_CASE("batch argument validation") {
    const ScenarioSpec spec = quiet_spec();
    CHECK_THROWS_AS(simulate_batch(spec, 0, 1, 1), Error);
    CHECK_THROWS_AS(simulate_batch(spec, 1, 0, 1), Error);
    CHECK_THROWS_AS(simulate_batch(spec, 1, 1, 1, "", -1.0), Error);
}
