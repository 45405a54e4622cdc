#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace udil {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using StateVector = Eigen::VectorXd;
using Rng = std::mt19937_64;
using Index = Eigen::Index;

// Bad input: malformed files, dimension mismatches, invalid configs.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t line, const std::string& source = {})
        : ValidationError((source.empty() ? "" : source + ": ") + "line " + std::to_string(line) + ": " + what),
          detail_(what), line_(line) {}
    std::size_t line() const { return line_; }
    const std::string& detail() const { return detail_; }

private:
    std::string detail_;
    std::size_t line_;
};

// Numerical failure during a run (non-finite loss, gradient, ...).
class RuntimeAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Transition {
    StateVector from;
    StateVector to;
};

enum class Label { Expert, PseudoRandom };

struct LabeledTransition {
    Transition transition;
    Label label;
};

// An embedded transition (z, z').
struct EmbeddedPair {
    Vec z;
    Vec z_next;
};

inline bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

inline bool same_values(const Vec& a, const Vec& b) {
    return a.size() == b.size() && (a.array() == b.array()).all();
}

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix_seed(mix_seed(base) ^ (stream * 0xd1b54a32d192ed03ULL));
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace udil
