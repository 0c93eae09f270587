#include "dispatchlab/tensor.hpp"

#include <sstream>

namespace dispatchlab {

std::string TensorSpec::to_string() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); i++) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

HostTensor HostTensor::zeros(std::vector<size_t> shape) {
    HostTensor t;
    t.spec.shape = std::move(shape);
    t.data.assign(t.spec.element_count(), 0.0f);
    return t;
}

HostTensor HostTensor::full(std::vector<size_t> shape, float value) {
    HostTensor t;
    t.spec.shape = std::move(shape);
    t.data.assign(t.spec.element_count(), value);
    return t;
}

HostTensor HostTensor::from(std::vector<size_t> shape, std::vector<float> values) {
    HostTensor t;
    t.spec.shape = std::move(shape);
    t.data = std::move(values);
    t.check_consistent();
    return t;
}

HostTensor random_tensor(std::vector<size_t> shape, uint64_t seed, float lo, float hi) {
    HostTensor t;
    t.spec.shape = std::move(shape);
    t.data.resize(t.spec.element_count());
    SeededRng rng(seed);
    for (float& v : t.data) v = rng.next_float(lo, hi);
    return t;
}

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::NoAdapter: return "NoAdapter";
        case Errc::LimitsTooSmall: return "LimitsTooSmall";
        case Errc::SizeMismatch: return "SizeMismatch";
        case Errc::MapFailed: return "MapFailed";
        case Errc::DimsMismatch: return "DimsMismatch";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::MegaKernelScaleExceeded: return "MegaKernelScaleExceeded";
        case Errc::DeviceLost: return "DeviceLost";
        case Errc::ClockTooCoarse: return "ClockTooCoarse";
        case Errc::TooFewSamples: return "TooFewSamples";
        case Errc::RangeInverted: return "RangeInverted";
        case Errc::ZeroSavedDispatches: return "ZeroSavedDispatches";
        case Errc::OutOfMemory: return "OutOfMemory";
        case Errc::UnknownExperiment: return "UnknownExperiment";
        case Errc::IoError: return "IoError";
        case Errc::ShaderError: return "ShaderError";
        case Errc::OracleMismatch: return "OracleMismatch";
        case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "UnknownError";
}

}  // namespace dispatchlab
