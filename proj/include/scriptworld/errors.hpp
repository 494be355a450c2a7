#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scriptworld {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SCRIPTWORLD_DEFINE_ERROR(Name)          \
    class Name : public Error {                 \
    public:                                     \
        using Error::Error;                     \
    }

// corpus
SCRIPTWORLD_DEFINE_ERROR(ParseError);
SCRIPTWORLD_DEFINE_ERROR(ValidationError);
SCRIPTWORLD_DEFINE_ERROR(CoverageError);
SCRIPTWORLD_DEFINE_ERROR(RepeatError);

// graph
SCRIPTWORLD_DEFINE_ERROR(CycleError);
SCRIPTWORLD_DEFINE_ERROR(UnknownNode);

// engine
SCRIPTWORLD_DEFINE_ERROR(ConfigError);
SCRIPTWORLD_DEFINE_ERROR(SamplingError);
SCRIPTWORLD_DEFINE_ERROR(OutOfRange);
SCRIPTWORLD_DEFINE_ERROR(Terminated);

// features
SCRIPTWORLD_DEFINE_ERROR(DimMismatch);
SCRIPTWORLD_DEFINE_ERROR(NonFinite);

// agents
SCRIPTWORLD_DEFINE_ERROR(ShapeMismatch);
SCRIPTWORLD_DEFINE_ERROR(NonFiniteLoss);
SCRIPTWORLD_DEFINE_ERROR(OracleUnavailable);
SCRIPTWORLD_DEFINE_ERROR(FeatureDimMismatch);

// replay
SCRIPTWORLD_DEFINE_ERROR(VersionMismatch);

#undef SCRIPTWORLD_DEFINE_ERROR

/// Replay divergence; carries the first step index whose record differs.
class MismatchError : public Error {
public:
    MismatchError(std::size_t step, const std::string& what)
        : Error(what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

} // namespace scriptworld
