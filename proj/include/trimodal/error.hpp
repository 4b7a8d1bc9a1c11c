#pragma once

#include <stdexcept>
#include <string>

namespace trimodal {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class shape_error : public error {
public:
    using error::error;
};

/// An operation that needs at least one element received none.
class empty_input_error : public error {
public:
    using error::error;
};

/// A scalar hyperparameter is outside its domain (e.g. tau <= 0).
class parameter_error : public error {
public:
    using error::error;
};

/// A dataset or checkpoint file failed validation. The message carries the
/// file and the byte offset or line where the problem was found.
class format_error : public error {
public:
    using error::error;
};

/// The data does not provide what the requested regime or task needs.
class data_mismatch_error : public error {
public:
    using error::error;
};

/// Ground truth refers to a clip absent from the retrieval database.
class mapping_error : public error {
public:
    using error::error;
};

/// A loss or gradient became non-finite during training.
class divergence_error : public error {
public:
    using error::error;
};

} // namespace trimodal
