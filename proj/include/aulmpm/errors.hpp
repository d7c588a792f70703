#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aulmpm {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unsupported option or out-of-range parameter.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

// A precondition on the caller's inputs was broken.
class ContractViolation : public Error {
public:
    using Error::Error;
};

class OutOfDomainError : public Error {
public:
    using Error::Error;
};

class DegenerateNeighborhoodError : public Error {
public:
    explicit DegenerateNeighborhoodError(const std::string& what, std::ptrdiff_t particle = -1)
        : Error(what), particle_(particle)
    {
    }
    std::ptrdiff_t particle() const { return particle_; }

private:
    std::ptrdiff_t particle_;
};

class InvalidConfigurationError : public Error {
public:
    using Error::Error;
};

class CapabilityError : public Error {
public:
    using Error::Error;
};

class OrphanParticleError : public Error {
public:
    using Error::Error;
};

// Scene documents: syntax errors and schema/semantic violations.
class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace aulmpm
