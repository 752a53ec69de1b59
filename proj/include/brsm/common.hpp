#pragma once

#include <stdexcept>
#include <string>

namespace brsm {

// Error hierarchy. Everything thrown by this library derives from Error so
// callers can catch one type at the CLI boundary.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

[[noreturn]] inline void fail_dim(const std::string& what) { throw DimensionError(what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) throw Error(what);
}

inline void require_dim(bool cond, const std::string& what) {
    if (!cond) throw DimensionError(what);
}

}  // namespace brsm
