#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dispatchlab/error.hpp"

namespace dispatchlab {

// Shape of a row-major float32 tensor. Rank 1 or 2 is all the suite needs.
struct TensorSpec {
    std::vector<size_t> shape;

    size_t element_count() const {
        if (shape.empty()) return 0;
        size_t n = 1;
        for (size_t d : shape) n *= d;
        return n;
    }
    size_t byte_length() const { return element_count() * sizeof(float); }
    size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

    bool operator==(const TensorSpec&) const = default;
    std::string to_string() const;
};

// Host-side tensor: the unit of kernel I/O and oracle comparison.
struct HostTensor {
    TensorSpec spec;
    std::vector<float> data;

    static HostTensor zeros(std::vector<size_t> shape);
    static HostTensor full(std::vector<size_t> shape, float value);
    static HostTensor from(std::vector<size_t> shape, std::vector<float> values);

    size_t element_count() const { return spec.element_count(); }
    float& at(size_t r, size_t c) { return data[r * spec.cols() + c]; }
    float at(size_t r, size_t c) const { return data[r * spec.cols() + c]; }

    void check_consistent() const {
        if (data.size() != spec.element_count())
            raise(Errc::SizeMismatch, "payload length " + std::to_string(data.size()) +
                                          " != spec " + std::to_string(spec.element_count()));
    }
};

// Deterministic cross-platform PRNG (xoshiro-free: raw mt19937 words mapped to
// floats by hand, since std::uniform_real_distribution is implementation-defined).
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    uint32_t next_u32() {
        // splitmix64, truncated. Fully specified, no library variance.
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return static_cast<uint32_t>((z ^ (z >> 31)) >> 16);
    }

    // uniform in [0, 1), exactly representable: (k >> 8) * 2^-24
    float next_float01() { return static_cast<float>(next_u32() >> 8) * 0x1p-24f; }

    // uniform in [lo, hi)
    float next_float(float lo, float hi) { return lo + (hi - lo) * next_float01(); }

private:
    uint64_t state_;
};

// Seeded random tensor with entries uniform in [lo, hi). Bit-identical across
// platforms for a fixed seed.
HostTensor random_tensor(std::vector<size_t> shape, uint64_t seed, float lo = -1.0f,
                         float hi = 1.0f);

}  // namespace dispatchlab
