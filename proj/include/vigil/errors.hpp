#pragma once

#include <stdexcept>
#include <string>

namespace vigil {

// Base class for every error the pipeline raises. Subclasses exist so the
// CLI can map failure classes onto exit codes and tests can assert on the
// exact failure mode.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-supplied configuration (flags, config file, probe parameters).
class ConfigError : public Error { public: using Error::Error; };
class PolicyError : public ConfigError { public: using ConfigError::ConfigError; };
class UnknownDose : public ConfigError { public: using ConfigError::ConfigError; };

// Filesystem-level failures.
class IoError : public Error { public: using Error::Error; };
class MissingFile : public IoError { public: using IoError::IoError; };

// Upstream data is present but broken or insufficient.
class ParseError : public Error { public: using Error::Error; };
class InvariantViolation : public Error { public: using Error::Error; };
class EmptySession : public Error { public: using Error::Error; };
class ModelFormatError : public Error { public: using Error::Error; };
class MissingBaseline : public Error { public: using Error::Error; };
class KeyMismatch : public Error { public: using Error::Error; };
class EmptyInput : public Error { public: using Error::Error; };

class InsufficientData : public Error { public: using Error::Error; };
class TooFewCheckups : public InsufficientData { public: using InsufficientData::InsufficientData; };
class TooFewPoints : public InsufficientData { public: using InsufficientData::InsufficientData; };
class InsufficientCheckups : public InsufficientData { public: using InsufficientData::InsufficientData; };
class DegenerateLabels : public InsufficientData { public: using InsufficientData::InsufficientData; };
class NoDecidableSubjects : public InsufficientData { public: using InsufficientData::InsufficientData; };

// Numerical failure inside a solver.
class ConvergenceFailure : public Error { public: using Error::Error; };

} // namespace vigil
