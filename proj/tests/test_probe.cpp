#include <doctest.h>

#include <optional>
#include <string>

#include "ietkit/core.hpp"
#include "ietkit/probe.hpp"

using namespace iet;

// Hardware-dependent tests.  They run the real timing loop, so they only
// assert properties that hold on any machine: shape, positivity, argument
// checking.  On hosts where the probe cannot run (non-x86 builds, or a
// sandbox that forbids thread pinning) the cases degrade to warnings.

TEST_CASE("probe argument validation") {
    if (!probe_supported()) {
        WARN_MESSAGE(true, "probe not supported here; skipping");
        return;
    }

    const auto code_of = [](const ProbeOptions& options) -> std::optional<ErrorCode> {
        try {
            probe_array(options);
        } catch (const Error& e) {
            return e.code();
        }
        return std::nullopt;
    };

    ProbeOptions bad;
    bad.rows = 0;
    bad.cols = 1;
    CHECK(code_of(bad) == ErrorCode::InvalidArgument);

    bad = ProbeOptions{};
    bad.cols = 0;
    CHECK(code_of(bad) == ErrorCode::InvalidArgument);

    bad = ProbeOptions{};
    bad.inter_column_delay_ms = -5;
    CHECK(code_of(bad) == ErrorCode::InvalidArgument);

    bad = ProbeOptions{};
    bad.cpu_index = 1 << 20;  // far beyond any real core count
    try {
        probe_array(bad);
        FAIL_CHECK("expected pinning to an absurd cpu index to fail");
    } catch (const Error& e) {
        CHECK((e.code() == ErrorCode::InvalidArgument ||
               e.code() == ErrorCode::AffinityFailed));
    }
}

TEST_CASE("probe produces positive measurements in the requested shape") {
    if (!probe_supported()) {
        WARN_MESSAGE(true, "probe not supported here; skipping");
        return;
    }

    ProbeOptions options;
    options.rows = 40;
    options.cols = 3;
    try {
        const IetArray array = probe_array(options);
        CHECK(array.rows() == 40);
        CHECK(array.cols() == 3);
        for (Ticks v : array.values()) {
            CHECK(v >= 1);
        }
        if (!probe_cpu_name().empty()) {
            CHECK(array.label == probe_cpu_name());
        }

        ProbeOptions tiny;
        tiny.rows = 1;
        tiny.cols = 1;
        CHECK(probe_array(tiny).values().size() == 1);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::AffinityFailed) {
            WARN_MESSAGE(true, "cannot pin a thread in this environment");
            return;
        }
        throw;
    }
}
