#pragma once

#include <stdexcept>
#include <string>

namespace netred {

/// Base of every error raised by the library. `kind()` is a stable,
/// machine-readable name that the CLI echoes into its error objects.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define NETRED_DEFINE_ERROR(Name)                                          \
    class Name : public Error {                                            \
    public:                                                                \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

NETRED_DEFINE_ERROR(InvalidGraph);
NETRED_DEFINE_ERROR(InvalidLaplacian);
NETRED_DEFINE_ERROR(InvalidArgument);
NETRED_DEFINE_ERROR(NotStronglyConnected);
NETRED_DEFINE_ERROR(NotSemistable);
NETRED_DEFINE_ERROR(LyapunovSolveFailure);
NETRED_DEFINE_ERROR(SylvesterSolveFailure);
NETRED_DEFINE_ERROR(NotASolution);
NETRED_DEFINE_ERROR(NotInH2);
NETRED_DEFINE_ERROR(InvalidInitialState);
NETRED_DEFINE_ERROR(DegenerateNetwork);
NETRED_DEFINE_ERROR(ZeroDissimilarityPresent);
NETRED_DEFINE_ERROR(ImproperClustering);
NETRED_DEFINE_ERROR(UnboundedError);

#undef NETRED_DEFINE_ERROR

/// Requested order below the number of clusterable classes.
class OrderTooSmall : public Error {
public:
    OrderTooSmall(const std::string& message, int min_order)
        : Error("OrderTooSmall", message), min_order_(min_order) {}

    int min_order() const noexcept { return min_order_; }

private:
    int min_order_;
};

/// Raised by the file readers; carries the offending file and 1-based line.
class ParseError : public Error {
public:
    ParseError(std::string file, std::size_t line, const std::string& message)
        : Error("ParseError", file + ":" + std::to_string(line) + ": " + message),
          file_(std::move(file)), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

}  // namespace netred
