#include "ietkit/probe.hpp"

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "ietkit/scenario.hpp"  // kInstructionsPerProbe

#if (defined(__x86_64__) || defined(__i386__)) && defined(__linux__)
#define IET_PROBE_AVAILABLE 1
#include <cpuid.h>
#include <sched.h>
#include <x86intrin.h>
#else
#define IET_PROBE_AVAILABLE 0
#endif

namespace iet {

bool probe_supported() {
    return IET_PROBE_AVAILABLE != 0;
}

#if IET_PROBE_AVAILABLE

namespace {

// One sample: serialize, read the counter, run the instruction block,
// serialize, read again.  CPUID itself serializes; the fences keep the
// counter reads from drifting into the block.
std::uint64_t measure_once() {
    unsigned int a, b, c, d;
    _mm_lfence();
    const std::uint64_t t0 = __rdtsc();
    _mm_lfence();
    for (int i = 0; i < kInstructionsPerProbe; ++i) {
        __cpuid(0, a, b, c, d);
    }
    _mm_lfence();
    const std::uint64_t t1 = __rdtsc();
    _mm_lfence();
    return t1 > t0 ? t1 - t0 : 0;
}

void pin_to_cpu(int cpu_index) {
    if (cpu_index < 0 || cpu_index >= CPU_SETSIZE) {
        throw Error(ErrorCode::InvalidArgument,
                    "cpu index " + std::to_string(cpu_index) + " out of range");
    }
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(cpu_index, &set);
    if (sched_setaffinity(0, sizeof(set), &set) != 0) {
        throw Error(ErrorCode::AffinityFailed,
                    "cannot pin to cpu " + std::to_string(cpu_index) + ": " +
                        std::strerror(errno));
    }
}

} // namespace

std::string probe_cpu_name() {
    unsigned int regs[4];
    char brand[49] = {};
    for (unsigned int i = 0; i < 3; ++i) {
        if (!__get_cpuid(0x80000002u + i, &regs[0], &regs[1], &regs[2],
                         &regs[3])) {
            return {};
        }
        std::memcpy(brand + i * 16, regs, 16);
    }
    std::string name(brand);
    const auto first = name.find_first_not_of(' ');
    if (first == std::string::npos) {
        return {};
    }
    const auto last = name.find_last_not_of(' ');
    return name.substr(first, last - first + 1);
}

IetArray probe_array(const ProbeOptions& options) {
    if (options.rows < 1 || options.cols < 1) {
        throw Error(ErrorCode::InvalidArgument,
                    "probe needs at least one row and one column");
    }
    if (options.inter_column_delay_ms < 0) {
        throw Error(ErrorCode::InvalidArgument, "delay cannot be negative");
    }
    pin_to_cpu(options.cpu_index);

    // Let caches and frequency settle before keeping samples.
    for (int i = 0; i < 64; ++i) {
        (void)measure_once();
    }

    Series flat;
    flat.reserve(options.rows * options.cols);
    for (std::size_t col = 0; col < options.cols; ++col) {
        if (col > 0 && options.inter_column_delay_ms > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(options.inter_column_delay_ms));
        }
        for (std::size_t row = 0; row < options.rows; ++row) {
            std::uint64_t sample = measure_once();
            for (int retry = 0; sample == 0 && retry < 8; ++retry) {
                sample = measure_once();
            }
            flat.push_back(sample > 0 ? sample : 1);
        }
    }
    IetArray array(options.rows, options.cols, std::move(flat));
    const std::string name = probe_cpu_name();
    if (!name.empty()) {
        array.label = name;
    }
    return array;
}

#else  // !IET_PROBE_AVAILABLE

std::string probe_cpu_name() {
    return {};
}

IetArray probe_array(const ProbeOptions&) {
    throw Error(ErrorCode::UnsupportedPlatform,
                "hardware probing needs an x86 cpu on linux");
}

#endif

} // namespace iet
