#pragma once

#include <stdexcept>
#include <string>

namespace vconv {

enum class ErrorKind {
    Parse,              // malformed file or value
    Precondition,       // operation called outside its contract
    DomainExceeded,     // geometry leaves the sampled box
    ConvexityViolation, // a function that must be convex is not
    IllConditioned,     // numerical solve refused
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool cond, const std::string& what,
                    ErrorKind kind = ErrorKind::Precondition) {
    if (!cond) throw Error(kind, what);
}

} // namespace vconv
