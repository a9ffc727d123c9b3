#ifndef ANL_ERROR_HPP
#define ANL_ERROR_HPP

#include <stdexcept>
#include <string>

namespace anl {

// Base of every error raised by the library. Each subtype maps to one
// failure category so callers (and the CLI exit-code logic) can dispatch
// on type rather than on message text.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error { public: using Error::Error; };
class IndexError : public Error { public: using Error::Error; };
class UnsupportedLoss : public Error { public: using Error::Error; };
class DegenerateInput : public Error { public: using Error::Error; };
class InvariantViolation : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class StateError : public Error { public: using Error::Error; };
class PreconditionError : public Error { public: using Error::Error; };
class GenerationError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

// Configuration problems carry the dotted path of the offending field.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
    ConfigError(const std::string& field, const std::string& msg)
        : Error(field + ": " + msg), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace anl

#endif // ANL_ERROR_HPP
