#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>

#include "ietkit/core.hpp"

using namespace iet;

namespace {

bool throws_code(ErrorCode expected, const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code() == expected;
    }
    return false;
}

} // namespace

TEST_CASE("array stores column-major and indexes by row/col") {
    const IetArray a(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK(a.rows() == 2);
    CHECK(a.cols() == 3);
    CHECK(a.at(0, 0) == 1);
    CHECK(a.at(1, 0) == 2);
    CHECK(a.at(0, 1) == 3);
    CHECK(a.at(1, 2) == 6);
    const auto col1 = a.column(1);
    REQUIRE(col1.size() == 2);
    CHECK(col1[0] == 3);
    CHECK(col1[1] == 4);
    CHECK(throws_code(ErrorCode::InvalidArgument, [&] { a.column(3); }));
}

TEST_CASE("from_columns matches direct construction") {
    const IetArray direct(2, 3, {1, 2, 3, 4, 5, 6});
    const IetArray built = IetArray::from_columns({{1, 2}, {3, 4}, {5, 6}});
    CHECK(built == direct);
}

TEST_CASE("array construction rejects bad shapes and values") {
    CHECK(throws_code(ErrorCode::InvalidArgument, [] { IetArray(0, 1, {}); }));
    CHECK(throws_code(ErrorCode::InvalidArgument, [] { IetArray(1, 0, {}); }));
    CHECK(throws_code(ErrorCode::InvalidArgument,
                      [] { IetArray(2, 2, {1, 2, 3}); }));
    CHECK(throws_code(ErrorCode::InvalidArgument,
                      [] { IetArray(1, 2, {5, 0}); }));
    CHECK(throws_code(ErrorCode::InvalidArgument,
                      [] { IetArray::from_columns({}); }));
    CHECK(throws_code(ErrorCode::InvalidArgument,
                      [] { IetArray::from_columns({{1, 2}, {3}}); }));
    // A single measurement is a legal 1x1 array.
    const IetArray one(1, 1, {2888});
    CHECK(one.at(0, 0) == 2888);
}

TEST_CASE("vectorize flattens column by column") {
    const IetArray a = IetArray::from_columns({{1, 2, 3}, {4, 5, 6}});
    CHECK(vectorize(a) == Series{1, 2, 3, 4, 5, 6});

    const IetArray big(1000, 10, Series(10000, 7));
    CHECK(vectorize(big).size() == 10000);
    CHECK(vectorize(big) == big.values());
}

TEST_CASE("array equality includes acquisition metadata") {
    IetArray a(1, 1, {5});
    IetArray b(1, 1, {5});
    CHECK(a == b);
    a.day_index = 3;
    CHECK_FALSE(a == b);
    b.day_index = 3;
    a.label = "x";
    b.label = "x";
    CHECK(a == b);
}

TEST_CASE("trace batch validation") {
    TraceBatch batch;
    CHECK(throws_code(ErrorCode::InvalidArgument, [&] { batch.validate(); }));

    batch.arrays.push_back(IetArray(2, 1, {1, 2}));
    batch.protocol = {1, 1, 0.0};
    CHECK_NOTHROW(batch.validate());

    batch.arrays.push_back(IetArray(3, 1, {1, 2, 3}));
    CHECK(throws_code(ErrorCode::InvalidArgument, [&] { batch.validate(); }));
    batch.arrays.pop_back();

    batch.protocol.days = 0;
    CHECK(throws_code(ErrorCode::InvalidArgument, [&] { batch.validate(); }));
    batch.protocol.days = 1;
    batch.protocol.repeats_per_day = 0;
    CHECK(throws_code(ErrorCode::InvalidArgument, [&] { batch.validate(); }));
    batch.protocol.repeats_per_day = 1;
    batch.protocol.delay_seconds = -1.0;
    CHECK(throws_code(ErrorCode::InvalidArgument, [&] { batch.validate(); }));
}

TEST_CASE("statistic kind names round-trip") {
    for (StatisticKind kind : kAllStatisticKinds) {
        CHECK(parse_statistic_kind(statistic_kind_name(kind)) == kind);
    }
    CHECK(throws_code(ErrorCode::InvalidArgument,
                      [] { parse_statistic_kind("median"); }));

    CHECK_FALSE(is_vectorized_kind(StatisticKind::Mean));
    CHECK_FALSE(is_vectorized_kind(StatisticKind::LayersAvg));
    CHECK(is_vectorized_kind(StatisticKind::LayersVec));
    CHECK_FALSE(is_vectorized_kind(StatisticKind::M2Avg));
    CHECK(is_vectorized_kind(StatisticKind::M2Vec));
    CHECK_FALSE(is_vectorized_kind(StatisticKind::M4Avg));
    CHECK(is_vectorized_kind(StatisticKind::M4Vec));
}

TEST_CASE("enum display names are stable") {
    CHECK(std::string(verdict_kind_name(VerdictKind::NoHypervisor)) ==
          "no_hypervisor");
    CHECK(std::string(verdict_kind_name(VerdictKind::HypervisorsPresent)) ==
          "hypervisors_present");
    CHECK(std::string(verdict_kind_name(VerdictKind::IndeterminateRemeasure)) ==
          "indeterminate_remeasure");
    CHECK(std::string(verdict_kind_name(VerdictKind::BlueChickenSuspect)) ==
          "blue_chicken_suspect");
    CHECK(std::string(classification_name(Classification::NoHvSide)) ==
          "no_hv_side");
    CHECK(std::string(classification_name(Classification::HvSide)) == "hv_side");
    CHECK(std::string(classification_name(Classification::Overlap)) ==
          "overlap");
    CHECK(std::string(error_code_name(ErrorCode::MalformedCsv)) ==
          "malformed_csv");
}

TEST_CASE("variation interval containment is endpoint-inclusive") {
    const VariationInterval iv{4.0, 14.0, 5, 0.9375};
    CHECK(iv.contains(4.0));
    CHECK(iv.contains(14.0));
    CHECK(iv.contains(9.0));
    CHECK_FALSE(iv.contains(3.999));
    CHECK_FALSE(iv.contains(14.001));
}

namespace {

ThresholdEntry sane_entry() {
    ThresholdEntry e;
    e.statistic = StatisticKind::LayersAvg;
    e.filtration_level = 0.1;
    e.no_hv_upper = 7.0;
    e.hv_lower = 8.0;
    e.type1_error = 0.04;
    e.type2_error = 0.0;
    e.no_hv_interval = {4.0, 14.0, 50, 1.0 - std::ldexp(1.0, -49)};
    e.hv_interval = VariationInterval{8.0, 21.0, 50, 1.0 - std::ldexp(1.0, -49)};
    return e;
}

} // namespace

TEST_CASE("threshold table validation") {
    ThresholdTable table;
    table.entries.push_back(sane_entry());
    CHECK_NOTHROW(table.validate());

    SUBCASE("bounds must be ordered") {
        table.entries[0].hv_lower = 7.0;
        CHECK(throws_code(ErrorCode::InvalidTable, [&] { table.validate(); }));
    }
    SUBCASE("combined error must stay below 0.2") {
        table.entries[0].type1_error = 0.1;
        table.entries[0].type2_error = 0.1;
        CHECK(throws_code(ErrorCode::InvalidTable, [&] { table.validate(); }));
    }
    SUBCASE("negative error is rejected") {
        table.entries[0].type1_error = -0.01;
        CHECK(throws_code(ErrorCode::InvalidTable, [&] { table.validate(); }));
    }
    SUBCASE("one-sided mean entry is fine") {
        ThresholdEntry mean = sane_entry();
        mean.statistic = StatisticKind::Mean;
        mean.hv_lower.reset();
        mean.hv_interval.reset();
        table.entries.push_back(mean);
        CHECK_NOTHROW(table.validate());
    }
    SUBCASE("bands must be ordered, gapped or touching, counts ascending") {
        NestedBand b0{{}, 31.0, 0, 0.0, 0.0};
        NestedBand b1{32.0, 67.0, 1, 0.0, 0.0};
        NestedBand b2{86.0, {}, 2, 0.0, 0.0};
        table.nested_bands = {b0, b1, b2};
        CHECK_NOTHROW(table.validate());

        table.nested_bands[1].lower = 20.0;  // overlaps band 0
        CHECK(throws_code(ErrorCode::InvalidTable, [&] { table.validate(); }));

        table.nested_bands[1].lower = 32.0;
        table.nested_bands[2].hypervisor_count = 5;
        CHECK(throws_code(ErrorCode::InvalidTable, [&] { table.validate(); }));

        table.nested_bands[2].hypervisor_count = 2;
        table.nested_bands[0].upper.reset();  // open end mid-sequence
        CHECK(throws_code(ErrorCode::InvalidTable, [&] { table.validate(); }));
    }
}
