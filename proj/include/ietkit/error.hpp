#pragma once

#include <stdexcept>
#include <string>

namespace iet {

// Every failure the library reports deliberately.  Codes let callers react
// programmatically; the message carries the human detail (indices, field
// names, line numbers).
enum class ErrorCode {
    InvalidArgument,        // constructor/spec invariant violated
    EmptySeries,            // operation needs at least one element
    AllFiltered,            // low-frequency filter removed everything
    SeriesTooShort,         // moment needs >= 2 elements
    NoQualifyingSegment,    // no segment long enough to average
    EmptySample,            // interval/error-rate over an empty sample
    NoAdmissibleStatistic,  // calibration admitted nothing usable
    EmptyTable,             // detector given a table with no entries
    ProviderExhausted,      // measurement source ran dry mid-detection
    ArrayTooShort,          // split-based check needs more rows
    MalformedCsv,           // array file violates the expected layout
    UnknownField,           // document carries a field we do not know
    MissingField,           // document lacks a required field
    InvalidTable,           // threshold table fails its own invariants
    UnsupportedPlatform,    // hardware probe not available here
    AffinityFailed,         // could not pin to the requested cpu
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace iet
