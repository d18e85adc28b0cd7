#pragma once

#include <string>

#include "ietkit/core.hpp"

namespace iet {

struct ProbeOptions {
    std::size_t rows = 1000;
    std::size_t cols = 10;
    int cpu_index = 0;
    int inter_column_delay_ms = 0;
};

// True when this build can measure on this machine (x86 with a timestamp
// counter, and a way to pin the thread).
bool probe_supported();

// Marketing name of the measuring CPU; empty if it cannot be read.
std::string probe_cpu_name();

// Times a fixed block of serializing instructions rows*cols times on the
// pinned CPU.  The label of the result records the CPU name.
IetArray probe_array(const ProbeOptions& options);

} // namespace iet
