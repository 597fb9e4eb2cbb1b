#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace gacbo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using Rng = std::mt19937_64;

/// Derive an independent rng stream from a base seed and a stream id.
/// SplitMix64 finalizer; identical (seed, stream) always yields the same stream.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return Rng(z);
}

inline double uniform_in(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FactorizationError : std::runtime_error {
    explicit FactorizationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gacbo
