#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kmdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Bad caller input (dimension mismatch, out-of-range argument, ...).
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure (factorization breakdown, non-convergence, ...).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed experiment configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / stream failure.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Deterministic random streams.
//
// Everything stochastic in the library draws from Rng, a small self-contained
// generator (splitmix64 state updates, Box-Muller normals). Keeping the
// sampling code in-tree means a fixed seed produces the same bytes on every
// platform, which the experiment harness relies on.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform in [0, 1).
    double uniform();

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);

    /// Uniform integer in {0, ..., n-1}; n must be positive.
    std::uint64_t uniform_int(std::uint64_t n);

    /// Standard normal via Box-Muller (one spare cached).
    double normal();

    Vector normal_vector(Eigen::Index n);

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives an independent child stream from a master seed and a stream name.
/// Streams with distinct (name, index) pairs are statistically independent.
Rng derive_stream(std::uint64_t master_seed, std::string_view name, std::uint64_t index = 0);

/// Stable 64-bit hash (FNV-1a) used for stream derivation and cache keys.
std::uint64_t hash64(std::string_view bytes);
std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b);

// ---------------------------------------------------------------------------
// Axis-aligned box.
// ---------------------------------------------------------------------------

struct Box {
    Vector lo;
    Vector hi;

    Box() = default;
    Box(Vector lo_in, Vector hi_in);

    /// Cube [lo, hi]^dim.
    static Box cube(int dim, double lo, double hi);

    Eigen::Index dim() const { return lo.size(); }
    Vector clip(const Vector& v) const;
    bool contains(const Vector& v, double tol = 1e-12) const;
    Vector center() const { return 0.5 * (lo + hi); }
    /// Euclidean diameter max_{u,v} ||u - v||_2 = ||hi - lo||_2.
    double diameter() const { return (hi - lo).norm(); }
    /// max over the box of ||v||^2, attained at a corner.
    double max_sq_norm() const;
    Vector sample(Rng& rng) const;
};

/// Round-trip-exact decimal formatting ("%.17g", C locale) used everywhere a
/// double is written to CSV or stdout, so reruns are byte-comparable.
std::string format_double(double v);

/// Strict double parse; throws IoError on trailing garbage.
double parse_double(const std::string& s);

} // namespace kmdp
