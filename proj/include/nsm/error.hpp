#pragma once

#include <stdexcept>
#include <string>

namespace nsm {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or truncated file contents (bad magic, short read, bad header).
struct FormatError : Error {
    using Error::Error;
};

// Structurally valid input whose values are unusable (NaN coordinates,
// duplicate labels, ids out of range, ...).
struct DataError : Error {
    using Error::Error;
};

// Caller-supplied parameter outside its legal range.
struct ParameterError : Error {
    using Error::Error;
};

struct EmptyCollectionError : DataError {
    using DataError::DataError;
};

// A vector with zero norm cannot be normalized for cosine similarity.
struct DegenerateVectorError : DataError {
    using DataError::DataError;
};

// Collection too small for the requested operation (e.g. k > count).
struct CollectionTooSmallError : ParameterError {
    using ParameterError::ParameterError;
};

// Spearman correlation is undefined when either side has zero rank variance.
struct UndefinedCorrelationError : DataError {
    using DataError::DataError;
};

// ROC-AUC is undefined unless both classes are non-empty.
struct DegenerateLabelsError : DataError {
    using DataError::DataError;
};

// No overlap between scored labels and the ratings table.
struct NoCoverageError : DataError {
    using DataError::DataError;
};

}  // namespace nsm
