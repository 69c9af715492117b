#pragma once

#include <stdexcept>
#include <string>

namespace rsb {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed model, partition, controller, formula or config input.
class ParseError : public Error {
public:
    using Error::Error;
};

/// An operation was called outside its documented domain (deadlocked
/// system, overlapping source and target, relation that is not an RSB...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// The concrete-controller runtime observed something it cannot account for.
class ExecutorError : public Error {
public:
    using Error::Error;
};

}  // namespace rsb
