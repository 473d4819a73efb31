#pragma once

#include <stdexcept>
#include <string>

namespace textkernel {

// Invalid polygon or box geometry (too few vertices, duplicate consecutive
// vertices, inverted extents, ...).
struct InvalidGeometryError : std::runtime_error {
    explicit InvalidGeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

// Box regression targets requested for a box with non-positive width/height.
struct DegenerateBoxError : std::runtime_error {
    explicit DegenerateBoxError(const std::string& msg) : std::runtime_error(msg) {}
};

// Class-balance weights requested for counts that make them undefined.
struct DegenerateCountsError : std::runtime_error {
    explicit DegenerateCountsError(const std::string& msg) : std::runtime_error(msg) {}
};

// An operation that needs a non-empty mask got an all-zero one.
struct EmptyMaskError : std::runtime_error {
    explicit EmptyMaskError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file (bad magic, truncated payload, unparseable record).
struct DataFormatError : std::runtime_error {
    explicit DataFormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing input file or directory.
struct NotFoundError : std::runtime_error {
    explicit NotFoundError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace textkernel
