#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace discloc {

/// Base of every error raised by the library. Callers that only need to
/// report a failure catch this; callers that branch on the failure kind
/// catch the concrete subclass.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor interchange format.
class FormatError : public Error { using Error::Error; };
class UnsupportedDtype : public Error { using Error::Error; };
class UnsupportedSize : public Error { using Error::Error; };
class CorruptFile : public Error { using Error::Error; };
class InvalidValue : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

// Shapes and arguments.
class ShapeError : public Error { using Error::Error; };
class InvalidArgument : public Error { using Error::Error; };

// Saliency and geometry.
class DegenerateMap : public Error { using Error::Error; };
class DegenerateRoI : public Error { using Error::Error; };
class DeltaOutOfRange : public Error { using Error::Error; };
class InvalidProbability : public Error { using Error::Error; };

// Evaluation.
class EmptyEvaluation : public Error { using Error::Error; };

// Dataset annotations.
class MissingAnnotation : public Error { using Error::Error; };
class InconsistentIndex : public Error { using Error::Error; };

class ParseError : public Error {
public:
    ParseError(std::string file, std::size_t line, const std::string& message)
        : Error(file + ":" + std::to_string(line) + ": " + message),
          file_(std::move(file)),
          line_(line) {}

    const std::string& file() const noexcept { return file_; }
    /// 1-based line number within file().
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class ImageError : public Error { using Error::Error; };

}  // namespace discloc
