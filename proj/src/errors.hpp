#pragma once

#include <stdexcept>
#include <string>

namespace selfsynth {

// Module-level error hierarchy. Routine failures of *sampled* programs
// (parse or runtime errors) are data, not exceptions; these types cover
// faults in inputs the caller is responsible for.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SyntaxError : Error {
    using Error::Error;
};

struct UnsupportedConstruct : Error {
    using Error::Error;
};

struct ContextOverflow : Error {
    using Error::Error;
};

struct MalformedRecord : Error {
    using Error::Error;
};

struct GoldExecutionFailure : Error {
    using Error::Error;
};

struct InvalidArguments : Error {
    using Error::Error;
};

struct EmptyTargets : Error {
    using Error::Error;
};

struct BetaOutOfRange : Error {
    using Error::Error;
};

struct TooFewTemplates : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace selfsynth
