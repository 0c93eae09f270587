#pragma once

#include <stdexcept>
#include <string>

namespace dispatchlab {

enum class Errc {
    NoAdapter,
    LimitsTooSmall,
    SizeMismatch,
    MapFailed,
    DimsMismatch,
    ShapeMismatch,
    MegaKernelScaleExceeded,
    DeviceLost,
    ClockTooCoarse,
    TooFewSamples,
    RangeInverted,
    ZeroSavedDispatches,
    OutOfMemory,
    UnknownExperiment,
    IoError,
    ShaderError,
    OracleMismatch,
    InvalidArgument,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace dispatchlab
