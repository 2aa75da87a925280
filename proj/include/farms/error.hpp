#pragma once

#include <stdexcept>
#include <string>

namespace farms {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File access problems: missing files, short reads, write failures.
class io_error : public error {
public:
    using error::error;
};

/// Manifest or config content that violates the expected schema.
class schema_error : public error {
public:
    using error::error;
};

/// Tensor data rejected on load (non-finite values, element budget).
class data_error : public error {
public:
    using error::error;
};

/// Invalid configuration passed to an operation.
class config_error : public error {
public:
    using error::error;
};

/// Raised when a spectrum cannot support a tail estimate.
class spectrum_error : public error {
public:
    enum class reason { too_few_eigenvalues, degenerate, svd_failure };

    spectrum_error(reason r, const std::string& what) : error(what), reason_(r) {}

    reason why() const noexcept { return reason_; }

private:
    reason reason_;
};

/// Allocation constraints that cannot be satisfied.
class allocation_error : public error {
public:
    using error::error;
};

} // namespace farms
