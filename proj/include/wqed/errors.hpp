#ifndef WQED_ERRORS_HPP
#define WQED_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace wqed {

// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Bad configuration or scenario input (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File could not be written or read; the message names the path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical abort during time marching (maps to CLI exit code 3).
// Carries the last step index whose data is still valid.
class NumericAbort : public std::runtime_error {
public:
    NumericAbort(const std::string& what, long last_valid_step)
        : std::runtime_error(what), last_valid_step_(last_valid_step) {}

    long last_valid_step() const noexcept { return last_valid_step_; }

private:
    long last_valid_step_;
};

} // namespace wqed

#endif
