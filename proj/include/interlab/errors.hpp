#pragma once

#include <stdexcept>
#include <string>

namespace interlab {

// Base class for all library errors. Subclasses exist so callers (and the
// CLI exit-code mapping) can distinguish bad input data from bad usage.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Mismatched dimensions: tensor vs model, weight matrix vs bias, etc.
struct ShapeError : Error {
    using Error::Error;
};

// Class label outside [0, num_classes).
struct LabelError : Error {
    using Error::Error;
};

// Operation asked for an unsupported mode (e.g. curvature probe on relu).
struct UnsupportedError : Error {
    using Error::Error;
};

// Exact enumeration requested beyond the player-count cap.
struct CapacityError : Error {
    using Error::Error;
};

// Bad pair/index arguments to interaction queries.
struct InvalidPairError : Error {
    using Error::Error;
};

// Invalid configuration detected before any compute starts.
struct ConfigError : Error {
    using Error::Error;
};

// File exists / missing file / unreadable path.
struct IoError : Error {
    using Error::Error;
};

// File parses as the wrong kind of thing (bad magic, unknown version).
struct FormatError : Error {
    using Error::Error;
};

// File is recognisably ours but truncated or internally inconsistent.
struct MalformedFileError : Error {
    using Error::Error;
};

// Dataset ingestion failure (counts disagree, bad magic in data files, ...).
struct IngestionError : Error {
    using Error::Error;
};

// Training diverged (non-finite loss).
struct TrainingError : Error {
    TrainingError(const std::string& msg, std::size_t epoch_)
        : Error(msg), epoch(epoch_) {}
    std::size_t epoch;
};

// A pipeline stage was asked to run before its inputs exist.
struct DependencyError : Error {
    using Error::Error;
};

}  // namespace interlab
