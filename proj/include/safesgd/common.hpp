#pragma once

#include <stdexcept>
#include <string>

namespace safesgd {

inline constexpr const char* kVersion = "0.1.0";

// Invalid or inconsistent user configuration (bad key, bad range, missing file).
// The CLI maps this to exit code 2.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// The Byzantine-count precondition of an aggregation kernel does not hold.
// The CLI maps this to exit code 3.
struct resilience_error : std::runtime_error {
    explicit resilience_error(const std::string& what) : std::runtime_error(what) {}
};

// Subset enumeration in the hull-intersection kernel would exceed the cap.
struct cap_error : std::runtime_error {
    explicit cap_error(const std::string& what) : std::runtime_error(what) {}
};

// Requested operation is not defined for the given mode or dimension.
struct unsupported_error : std::runtime_error {
    explicit unsupported_error(const std::string& what) : std::runtime_error(what) {}
};

// Estimator called with insufficient inputs.
struct estimation_error : std::runtime_error {
    explicit estimation_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace safesgd
