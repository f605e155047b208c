#pragma once

#include <stdexcept>
#include <string>

namespace rgdm {

// Base of every error this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad numeric ranges, bad topologies, bad ratios, bad config values.
struct InvalidArgument : Error {
    using Error::Error;
};

// Array shapes that do not line up (cloud sizes, gradient lengths, ...).
struct ShapeMismatch : Error {
    using Error::Error;
};

// Reward or its gradient went non-finite inside a shift solver.
struct SolverFailure : Error {
    using Error::Error;
};

// Non-finite loss or propagated solver failure during training.
struct TrainingFailure : Error {
    using Error::Error;
};

// Filesystem trouble: unwritable directory, unreadable file.
struct IoError : Error {
    using Error::Error;
};

// Dataset manifest or sample file does not parse; message names file/field.
struct ManifestError : Error {
    using Error::Error;
};

// Checkpoint file is truncated, has a bad magic, or inconsistent lengths.
struct CheckpointError : Error {
    using Error::Error;
};

// Config file violates the schema; message names the offending key.
struct ConfigError : Error {
    using Error::Error;
};

// Metric preconditions: empty set, EMD size mismatch, degenerate bbox.
struct MetricPrecondition : Error {
    using Error::Error;
};

}  // namespace rgdm
