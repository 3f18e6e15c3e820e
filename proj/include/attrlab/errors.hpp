#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace attrlab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated a precondition (dimension mismatch, grid mismatch, bad argument).
class UsageError : public Error {
public:
    using Error::Error;
};

/// Several configuration violations collected in one pass.
class ValidationError : public UsageError {
public:
    explicit ValidationError(std::vector<std::string> problems)
        : UsageError(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out = "invalid configuration:";
        for (const auto& p : items) {
            out += "\n  - ";
            out += p;
        }
        return out;
    }
    std::vector<std::string> problems_;
};

class OutOfDomain : public Error {
public:
    using Error::Error;
};

/// Trajectory left the escape box. Carries the exit time and state; image()
/// adds the parameter, the source cell and the sample point.
class DomainEscape : public Error {
public:
    DomainEscape(std::string what, double exit_time, std::vector<double> exit_state)
        : Error(std::move(what)), exit_time(exit_time), exit_state(std::move(exit_state)) {}

    double exit_time;
    std::vector<double> exit_state;
    std::vector<double> lambda;
    std::vector<std::size_t> cell;
    std::vector<double> sample;
};

class EmptyTarget : public Error {
public:
    using Error::Error;
};

class InternalError : public Error {
public:
    using Error::Error;
};

class NotAbsorbed : public Error {
public:
    NotAbsorbed(std::string what, std::vector<double> lambda)
        : Error(std::move(what)), lambda(std::move(lambda)) {}
    std::vector<double> lambda;
};

class AllFailed : public Error {
public:
    using Error::Error;
};

}  // namespace attrlab
