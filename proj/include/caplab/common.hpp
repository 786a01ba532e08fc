#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace caplab {

// Error taxonomy mirrors the CLI exit codes: validation/usage errors exit 1,
// data errors exit 2, internal invariant violations exit 3.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InternalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(std::string_view bytes);

// 16-digit lowercase hex, zero padded.
std::string hex64(std::uint64_t value);

}  // namespace caplab
