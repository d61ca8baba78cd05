#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gridloop {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An optimization or steady-state problem has no feasible point.
/// `constraint()` names the violated constraint class (e.g. "budget",
/// "line 1-2", "capacity") so callers can report it without parsing text.
class InfeasibleError : public Error {
public:
    InfeasibleError(std::string constraint, const std::string& what)
        : Error(what), constraint_(std::move(constraint)) {}

    const std::string& constraint() const noexcept { return constraint_; }

private:
    std::string constraint_;
};

/// Scenario or problem input failed validation. Carries every problem
/// found, not just the first.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}
    explicit ConfigError(const std::string& problem)
        : ConfigError(std::vector<std::string>{problem}) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out;
        for (const auto& s : items) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }
    std::vector<std::string> problems_;
};

/// A numeric routine failed (singular system, non-convergence, bound
/// violation of a state update).
class NumericError : public Error {
public:
    using Error::Error;
};

/// A precondition on the arguments of an operation does not hold.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace gridloop
