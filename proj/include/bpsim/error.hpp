#pragma once

#include <stdexcept>
#include <string>

namespace bpsim {

/// Base of every runtime failure the library raises. `name()` is the stable
/// identifier the CLI prints on standard error.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& what)
        : std::runtime_error(name + ": " + what), name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

/// Bad user input (parameters out of their domain, malformed files). The CLI
/// maps this to the usage/config exit code.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("ConfigError", what) {}
};

class NotBracketed : public Error {
public:
    explicit NotBracketed(const std::string& what) : Error("NotBracketed", what) {}
};

class DegenerateJacobian : public Error {
public:
    explicit DegenerateJacobian(const std::string& what) : Error("DegenerateJacobian", what) {}
};

class Diverged : public Error {
public:
    explicit Diverged(const std::string& what) : Error("Diverged", what) {}
};

class StartBranchMissing : public Error {
public:
    explicit StartBranchMissing(const std::string& what) : Error("StartBranchMissing", what) {}
};

class NoTransition : public Error {
public:
    explicit NoTransition(const std::string& what) : Error("NoTransition", what) {}
};

class NonPositiveInput : public Error {
public:
    explicit NonPositiveInput(const std::string& what) : Error("NonPositiveInput", what) {}
};

class SegmentTooLong : public Error {
public:
    explicit SegmentTooLong(const std::string& what) : Error("SegmentTooLong", what) {}
};

class ToneNotFound : public Error {
public:
    explicit ToneNotFound(const std::string& what) : Error("ToneNotFound", what) {}
};

class DenominatorNonpositive : public Error {
public:
    explicit DenominatorNonpositive(const std::string& what) : Error("DenominatorNonpositive", what) {}
};

class BandOutOfRange : public Error {
public:
    explicit BandOutOfRange(const std::string& what) : Error("BandOutOfRange", what) {}
};

}  // namespace bpsim
