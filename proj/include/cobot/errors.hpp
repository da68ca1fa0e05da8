#pragma once

#include <stdexcept>
#include <string>

namespace cobot {

/// Malformed input file (model, trajectory, campaign, log).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A model or campaign violated a structural invariant.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Inverse kinematics could not reach the requested pose.
class IkError : public std::runtime_error {
public:
    explicit IkError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Integration produced a non-finite or diverging state.
class SimDivergedError : public std::runtime_error {
public:
    explicit SimDivergedError(const std::string& msg) : std::runtime_error(msg) {}
};

/// An identification step received data it cannot work with.
class IdentDataError : public std::runtime_error {
public:
    explicit IdentDataError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace cobot
