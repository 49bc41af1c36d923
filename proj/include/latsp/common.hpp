#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace latsp {

// A precondition or shape requirement was violated by the caller.
class ContractViolation : public std::runtime_error {
public:
    explicit ContractViolation(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or infeasible configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Optimization produced non-finite values or otherwise diverged.
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem or artifact problem.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Seeded random stream. All randomness in the project flows through
/// instances of this class; there is no wall-clock entropy anywhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double normal() { return normal_(gen_); }
    double uniform() { return uniform_(gen_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(gen_); }

    /// Uniform integer in [0, bound).
    std::uint64_t integer(std::uint64_t bound) {
        std::uniform_int_distribution<std::uint64_t> d(0, bound - 1);
        return d(gen_);
    }

    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
        return m;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), gen_);
    }

    std::mt19937_64& engine() { return gen_; }

    /// Derive an independent stream seed from a base seed (splitmix64 step).
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Shortest decimal form that round-trips a double exactly (%.17g).
std::string fmt_double(double v);

/// FNV-1a 64-bit hash, used for config digests.
std::uint64_t fnv1a64(const std::string& text);

std::string to_hex(std::uint64_t v);

}  // namespace latsp
